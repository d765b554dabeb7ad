# test_verification.py - verification suites run directly against a RunConfig

import pytest

from errors import ConfigError
from schemas import RunConfig, VerifySuite
from verification import SUITE_DEFAULT_LINKS, MultiSLEVerifier, run_suite


def config(**values):
    values.setdefault("kappa", 3.0)
    return RunConfig(**values)


class TestClosedFormSuites:
    @pytest.mark.parametrize("kappa", [3.0, 4.0, 5.0])
    def test_pde(self, kappa):
        result = run_suite(VerifySuite.PDE, config(kappa=kappa, links=SUITE_DEFAULT_LINKS[VerifySuite.PDE]))
        assert result.passed
        assert [c["status"] for c in result.details["checks"]] == ["PASS"] * 4

    def test_pde_single_link(self):
        result = run_suite(VerifySuite.PDE, config(links="0,1"))
        assert result.passed
        assert len(result.details["checks"]) == 2

    def test_symmetry_and_covariance(self):
        for suite in (VerifySuite.SYMMETRY, VerifySuite.COVARIANCE):
            assert run_suite(suite, config(links="0,3;1,2")).passed

    def test_covariance_with_infinity(self):
        assert run_suite(VerifySuite.COVARIANCE, config(kappa=5.0, links="0,inf;1,2")).passed

    def test_asymptotics(self):
        result = run_suite(VerifySuite.ASYMPTOTICS, config(links="0,inf;1,2"))
        assert result.passed
        assert result.details["checks"][-1]["feature"] == "raw G(1-) reported"

    def test_martingale_single_link(self):
        result = run_suite(VerifySuite.MARTINGALE, config(links="0,1", n_samples=3))
        assert result.passed
        assert len(result.details["checks"]) == 3

    def test_convergence_closed_form(self):
        result = run_suite(VerifySuite.CONVERGENCE, config(links="1,3", n_samples=3, dt=0.01))
        assert result.passed
        assert result.warnings == []


class TestPreconditions:
    def test_pde_needs_at_most_two_links(self):
        with pytest.raises(ConfigError):
            run_suite(VerifySuite.PDE, config(links="0,1;2,3;4,5"))

    def test_twolink_needs_two_links(self):
        with pytest.raises(ConfigError):
            run_suite(VerifySuite.TWOLINK, config(links="0,inf"))

    def test_avoidance_needs_non_simple_kappa(self):
        with pytest.raises(ConfigError):
            run_suite(VerifySuite.AVOIDANCE, config(kappa=3.0))

    def test_asymptotics_needs_two_links(self):
        with pytest.raises(ConfigError):
            run_suite(VerifySuite.ASYMPTOTICS, config(links="0,1"))


class TestResult:
    def test_result_carries_the_config(self):
        result = run_suite(VerifySuite.PDE, config(links="0,5;1,2", seed=8))
        assert result.config["seed"] == 8
        assert result.config["links"] == [[0.0, 5.0], [1.0, 2.0]]
        assert result.suite == VerifySuite.PDE

    def test_log_test_records_values(self):
        verifier = MultiSLEVerifier(config())
        assert not verifier.log_test("example", False, "details", z_score=4.0)
        assert verifier.checks == [{"feature": "example", "status": "FAIL", "details": "details", "z_score": 4.0}]


@pytest.mark.slow
def test_crossval_produces_a_report():
    cfg = config(links="0,inf;1,2", n_samples=6, dt=0.05, t_max=0.5, n_steps=4, burn_in=1)
    result = run_suite(VerifySuite.CROSSVAL, cfg)
    assert result.details["checks"]
    assert result.warnings and "false alarms" in result.warnings[0]
