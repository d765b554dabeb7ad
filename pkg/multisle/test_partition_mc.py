# test_partition_mc.py - closed forms, the cascade estimator and its diagnostics

import math

import numpy as np
import pytest

from domain_algebra import ComponentChart, LinkPattern, initial_state, permute
from errors import DomainError, PatternError, SpacingError
from partition_mc import (
    asymptotics_check,
    avoidance_check,
    convergence_table,
    estimate_H,
    h_component,
    h_one,
    h_two,
    martingale_diag,
    pde_residual,
    tail_factor,
)
from schemas import Numerics
from special_fns import g_factor, g_limit, g_normalized, kappa_params


class TestClosedForms:
    def test_single_link(self, kappa3):
        assert h_one(kappa3, 1.0, 3.0) == pytest.approx(2.0 ** (-2.0 * kappa3.b))
        assert h_one(kappa3, 0.0, math.inf) == 1.0
        assert h_one(kappa3, math.inf, 5.0) == 1.0

    def test_single_link_coincident(self, kappa3):
        with pytest.raises(PatternError):
            h_one(kappa3, 1.0, 1.0)

    def test_kappa_six_is_flat(self, kappa6):
        assert h_one(kappa6, 0.0, 5.0) == 1.0

    def test_two_links(self, kappa3):
        value = h_two(kappa3, "0,3;1,2")
        expected = g_normalized(3.0, 0.25) * h_one(kappa3, 0.0, 3.0) * h_one(kappa3, 1.0, 2.0)
        assert value == pytest.approx(expected, rel=1e-14)

    def test_two_links_through_infinity(self, kappa3):
        assert h_two(kappa3, "0,inf;1,2") == pytest.approx(g_normalized(3.0, 0.5) * h_one(kappa3, 1.0, 2.0))

    def test_two_link_factor_is_divided_by_its_limit(self, kappa6):
        raw = g_factor(6.0, 0.25) * h_one(kappa6, 0.0, 3.0) * h_one(kappa6, 1.0, 2.0)
        assert g_limit(6.0) > 1.0
        assert h_two(kappa6, "0,3;1,2") == pytest.approx(raw / g_limit(6.0), rel=1e-12)
        assert h_two(kappa6, "0,3;1,2") <= 1.0

    def test_crossing_links_vanish(self, kappa3):
        assert h_two(kappa3, "0,2;1,3") == 0.0

    def test_h_two_needs_two_links(self, kappa3):
        with pytest.raises(PatternError):
            h_two(kappa3, "0,1")

    @pytest.mark.parametrize("kappa", [3.0, 5.0])
    def test_covariance_under_scaling(self, kappa):
        params = kappa_params(kappa)
        pattern = LinkPattern.from_string("0,3;1,2")
        factor = 2.0 ** (4.0 * params.b)
        assert factor * h_two(params, pattern.mapped(2.0)) == pytest.approx(h_two(params, pattern), rel=1e-12)

    def test_covariance_with_infinity(self, kappa5):
        pattern = LinkPattern.from_string("0,inf;1,2")
        factor = 2.0 ** (2.0 * kappa5.b)
        assert factor * h_two(kappa5, pattern.mapped(2.0)) == pytest.approx(h_two(kappa5, pattern), rel=1e-12)

    def test_link_order_does_not_matter(self, kappa5):
        pattern = LinkPattern.from_string("0,5;1,2")
        assert h_two(kappa5, permute(pattern, [2, 1])) == pytest.approx(h_two(kappa5, pattern), rel=1e-12)

    def test_component_value_matches_half_plane(self, kappa3):
        pattern = LinkPattern.from_string("0,5;1,2")
        chart = initial_state(pattern).components[0].chart
        assert h_component(kappa3, chart, [(0, 1), (2, 3)]) == pytest.approx(h_two(kappa3, pattern), rel=1e-12)

    def test_tail_factor(self, kappa3):
        assert tail_factor(kappa3, 1.0, 2.0, None) == 1.0
        assert tail_factor(kappa3, -1.0, 2.0, 0.0) == 0.0
        assert tail_factor(kappa3, 1.0, 2.0, 0.0) == pytest.approx(g_normalized(3.0, 0.5))

    def test_two_links_in_a_tail_chart_have_no_closed_form(self, kappa3):
        chart = ComponentChart(
            members=(0, 1, 2, 3),
            images=np.array([-3.0, -2.0, 1.0, 2.0]),
            derivatives=np.ones(4),
            tail_drive=0.0,
            tail_images=np.array([-3.0, -2.0, 1.0, 2.0]),
            tail_derivatives=np.ones(4),
        )
        with pytest.raises(DomainError):
            h_component(kappa3, chart, [(0, 1), (2, 3)])
        # one link still has its tail-weighted form
        single = h_component(kappa3, chart, [(2, 3)])
        assert single == pytest.approx(h_one(kappa3, 1.0, 2.0) * g_normalized(3.0, 0.5), rel=1e-12)


class TestEstimate:
    def test_closed_form_path(self, kappa3):
        est = estimate_H(kappa3, "1,3", 10)
        assert est.value == pytest.approx(h_one(kappa3, 1.0, 3.0))
        assert est.std_error == 0.0
        assert est.n_samples == 10

    def test_record_layout(self, kappa3):
        record = estimate_H(kappa3, "0,inf", 5).to_record()
        assert list(record)[:3] == ["kappa", "links", "value"]
        assert record["links"] == [[0.0, "inf"]]
        assert "warnings" in record["diagnostics"]

    def test_crossing_cascade_is_all_zero(self, kappa3, coarse):
        est = estimate_H(kappa3, "0,2;1,3;5,6", 3, coarse)
        assert est.value == 0.0
        assert est.n_zero_weight + est.n_rejected == 3
        if est.n_rejected == 0:
            assert any("NONTRIVIALITY" in w for w in est.warnings)

    def test_coincident_points_raise(self, kappa3):
        with pytest.raises(PatternError):
            estimate_H(kappa3, "0,1;1,2;3,4", 2)

    def test_cascade_is_reproducible(self, kappa3, coarse, three_links):
        one = estimate_H(kappa3, three_links, 4, coarse, seed=9)
        two = estimate_H(kappa3, three_links, 4, coarse, seed=9)
        assert one.value == two.value

    def test_two_links_beside_a_chord_keep_cascading(self, kappa3, coarse):
        # after the first chord the two remaining links share a tail chart, so allowing
        # two-link closed forms must not change a single draw
        pattern = "0,inf;1,2;3,4"
        closed = estimate_H(kappa3, pattern, 3, coarse, seed=4, closed_form_max=2)
        cascaded = estimate_H(kappa3, pattern, 3, coarse, seed=4, closed_form_max=1)
        assert closed.value == cascaded.value
        assert closed.n_rejected == cascaded.n_rejected

    @pytest.mark.slow
    @pytest.mark.parametrize("kappa", [3.0, 4.0])
    def test_weights_respect_product_bound(self, kappa, coarse, three_links):
        est = estimate_H(kappa_params(kappa), three_links, 20, coarse, seed=1)
        assert est.bound_violations == 0
        assert est.value > 0


class TestPdeResidual:
    @pytest.mark.parametrize("kappa", [3.0, 4.0, 5.0])
    def test_single_link(self, kappa):
        assert abs(pde_residual(kappa_params(kappa), [0.0, 1.0], 1)) <= 1e-6

    @pytest.mark.parametrize("r", [1, 2, 3, 4])
    def test_two_links(self, kappa3, r):
        assert abs(pde_residual(kappa3, [0.0, 5.0, 1.0, 2.0], r, relative=True)) <= 1e-4

    def test_stencil_collision(self, kappa3):
        with pytest.raises(SpacingError):
            pde_residual(kappa3, [0.0, 1.5e-4], 1)

    def test_needs_closed_form(self, kappa3):
        with pytest.raises(DomainError):
            pde_residual(kappa3, [0.0, 1.0, 2.0, 3.0, 4.0, 5.0], 1)
        with pytest.raises(DomainError):
            pde_residual(kappa3, [0.0, math.inf], 1)


class TestMartingale:
    def test_single_link_is_constant(self, kappa3):
        diag = martingale_diag(kappa3, [0.0, 1.0], 1, [0.1, 0.2], 5)
        assert diag.means == [1.0, 1.0]
        assert diag.m0 == 1.0
        assert diag.z_scores() == [0.0, 0.0]

    def test_two_links_start_value(self, kappa3):
        numerics = Numerics(dt=1e-3)
        diag = martingale_diag(kappa3, [0.0, 3.0, 1.0, 2.0], 1, [0.01, 0.02], 8, numerics, n_jobs=1)
        assert diag.m0 == pytest.approx(h_two(kappa3, "0,3;1,2") / h_one(kappa3, 0.0, 3.0))
        assert len(diag.means) == 2
        assert all(math.isfinite(m) for m in diag.means)
        assert all(0 <= n <= 8 for n in diag.n_alive)

    def test_bad_times(self, kappa3):
        with pytest.raises(DomainError):
            martingale_diag(kappa3, [0.0, 1.0], 1, [0.2, 0.1], 5)

    def test_crossing_pattern_rejected(self, kappa3):
        with pytest.raises(PatternError):
            martingale_diag(kappa3, [0.0, 2.0, 1.0, 3.0], 1, [0.1], 5)


class TestAsymptotics:
    def test_ratio_tends_to_one(self, kappa3):
        rows = asymptotics_check(kappa3, "0,inf;1,2", 2, [0.5, 0.1, 0.02], 5)
        ratios = [row["ratio"] for row in rows]
        assert all(not row["skipped"] for row in rows)
        assert np.all(np.diff(ratios) > 0)
        assert ratios[-1] < 1.0
        assert abs(ratios[-1] - 1.0) < abs(ratios[0] - 1.0)

    def test_tiny_separation_is_skipped(self, kappa3):
        rows = asymptotics_check(kappa3, "0,inf;1,2", 2, [1e-3], 5)
        assert rows[0]["skipped"]
        assert math.isnan(rows[0]["ratio"])

    def test_shrinking_link_must_be_finite(self, kappa3):
        with pytest.raises(DomainError):
            asymptotics_check(kappa3, "0,inf;1,2", 1, [0.5], 5)


class TestAvoidanceAndConvergence:
    def test_avoidance_row(self, kappa5, coarse):
        row = avoidance_check(kappa5, 1.0, 2.0, 30, coarse, n_jobs=1)
        assert 0.0 <= row["frequency"] <= 1.0
        assert 0.0 < row["exact"] < 1.0
        assert row["n_samples"] == 30

    def test_avoidance_needs_non_simple_kappa(self, kappa3, coarse):
        with pytest.raises(DomainError):
            avoidance_check(kappa3, 1.0, 2.0, 5, coarse)

    def test_closed_form_rows_never_flag(self, kappa3):
        rows = convergence_table(kappa3, "1,3", [0.01, 0.005, 0.0025], 5)
        assert [row["dt"] for row in rows] == [0.01, 0.005, 0.0025]
        assert len({row["value"] for row in rows}) == 1
        assert not any(row["bias_flag"] for row in rows)


def z_score(a, b):
    spread = math.hypot(a.std_error, b.std_error)
    return (a.value - b.value) / spread if spread > 0 else 0.0


@pytest.mark.slow
class TestCascadeAgainstExactValues:
    numerics = Numerics(dt=2e-3, t_max=1.0, max_trace_points=400, zipper_points=400)

    def test_two_link_monte_carlo_matches_closed_form(self, kappa5, two_links):
        est = estimate_H(kappa5, two_links, 400, self.numerics, seed=11, closed_form_max=1)
        exact = h_two(kappa5, two_links)
        assert est.n_rejected <= 4
        assert abs(est.value - exact) <= 3.0 * est.std_error

    def test_martingale_over_time(self, kappa3):
        diag = martingale_diag(kappa3, [0.0, 3.0, 1.0, 2.0], 1, [0.05, 0.1, 0.2], 300, self.numerics, seed=5)
        assert all(abs(z) <= 3.0 for z in diag.z_scores())

    def test_three_links_reversed(self, kappa3, three_links):
        base = estimate_H(kappa3, three_links, 200, self.numerics, seed=3)
        reversed_links = estimate_H(kappa3, permute(three_links, [3, 2, 1]), 200, self.numerics, seed=3)
        assert base.value > 0
        assert abs(z_score(base, reversed_links)) <= 3.0

    def test_three_links_scaled(self, kappa3, three_links):
        base = estimate_H(kappa3, three_links, 200, self.numerics, seed=3)
        scaled = estimate_H(kappa3, three_links.mapped(2.0), 200, self.numerics, seed=3)
        # five finite points and one at infinity
        factor = 2.0 ** (4.0 * kappa3.b)
        spread = math.hypot(base.std_error, factor * scaled.std_error)
        assert abs(base.value - factor * scaled.value) <= 3.0 * spread

    @pytest.mark.parametrize("kappa", [5.0, 6.0])
    def test_weights_stay_finite_and_bounded(self, kappa, three_links):
        est = estimate_H(kappa_params(kappa), three_links, 100, self.numerics, seed=2)
        assert est.bound_violations == 0
        assert math.isfinite(est.value) and est.value > 0
