# test_sle_sampling.py - random streams, Mobius frames, chordal samples and the two-point flow

import math

import numpy as np
import pytest
from pydantic import ValidationError

from errors import DomainError, PatternError
from schemas import Numerics, StopReason
from sle_sampling import (
    MobiusMap,
    RngStream,
    frame_scale,
    mobius_to_chord,
    sample_chord,
    sample_chordal_driving,
    sample_chordal_trace,
    sample_two_point_driving,
)


class TestRngStream:
    def test_same_key_same_numbers(self):
        one = RngStream(seed=7, stream_index=2).generator().standard_normal(5)
        two = RngStream(seed=7, stream_index=2).generator().standard_normal(5)
        assert np.array_equal(one, two)

    def test_keys_separate_streams(self):
        base = RngStream(seed=7, stream_index=2)
        draws = [
            base.generator(0).standard_normal(3),
            base.generator(1).standard_normal(3),
            base.child(1).generator(0).standard_normal(3),
            RngStream(seed=7, stream_index=3).generator(0).standard_normal(3),
            RngStream(seed=8, stream_index=2).generator(0).standard_normal(3),
        ]
        for i in range(len(draws)):
            for j in range(i + 1, len(draws)):
                assert not np.array_equal(draws[i], draws[j])

    def test_child_extends_path(self):
        assert RngStream(seed=1, stream_index=0).child(3).child(1).path == (3, 1)

    def test_negative_seed_rejected(self):
        with pytest.raises(ValidationError):
            RngStream(seed=-1, stream_index=0)


class TestChordalDriving:
    def test_step_count_and_start(self, kappa3):
        driving = sample_chordal_driving(kappa3, 0.02, 0.01, RngStream(seed=0, stream_index=0))
        assert driving.values.size == 3
        assert driving.values[0] == 0.0

    def test_exact_replay(self, kappa3):
        rng = RngStream(seed=11, stream_index=4)
        one = sample_chordal_driving(kappa3, 0.5, 0.01, rng)
        two = sample_chordal_driving(kappa3, 0.5, 0.01, rng)
        assert np.array_equal(one.values, two.values)

    def test_increment_variance(self, kappa5):
        driving = sample_chordal_driving(kappa5, 200.0, 0.01, RngStream(seed=1, stream_index=0))
        steps = np.diff(driving.values)
        assert np.var(steps) == pytest.approx(5.0 * 0.01, rel=0.05)

    @pytest.mark.parametrize("t_max, dt", [(0.0, 0.01), (1.0, 0.0), (-1.0, 0.01)])
    def test_bad_budget(self, kappa3, t_max, dt):
        with pytest.raises(DomainError):
            sample_chordal_driving(kappa3, t_max, dt, RngStream(seed=0, stream_index=0))


class TestMobius:
    def test_finite_chord_endpoints(self):
        phi = mobius_to_chord(1.0, 3.0)
        assert phi.apply(0.0) == pytest.approx(1.0)
        assert phi.apply(complex(math.inf, 0.0)) == pytest.approx(3.0)
        assert phi.apply(1j).imag > 0

    def test_chord_to_infinity(self):
        phi = mobius_to_chord(1.0, math.inf)
        assert phi.apply(0.0) == pytest.approx(1.0)
        assert math.isinf(phi.apply_real(math.inf))

    def test_chord_from_infinity(self):
        phi = mobius_to_chord(math.inf, 2.0)
        assert math.isinf(phi.apply_real(0.0))
        assert phi.apply_real(math.inf) == pytest.approx(2.0)

    def test_scale_fixes_endpoints(self):
        phi = mobius_to_chord(-1.0, 4.0, scale=3.0)
        assert phi.apply_real(0.0) == pytest.approx(-1.0)
        assert phi.apply_real(math.inf) == pytest.approx(4.0)

    def test_coincident_endpoints(self):
        with pytest.raises(PatternError):
            mobius_to_chord(1.0, 1.0)

    def test_orientation_reversing_map_is_rejected(self):
        with pytest.raises(DomainError):
            MobiusMap(1.0, 0.0, 0.0, -1.0)

    def test_inverse_and_compose(self):
        phi = mobius_to_chord(-1.0, 2.0)
        z = np.array([0.3 + 1j, -2.0 + 0.5j])
        assert np.allclose(phi.inverse().apply(phi.apply(z)), z)
        both = phi.compose(phi.inverse())
        assert np.allclose(both.apply(z), z)

    def test_boundary_jet_is_positive(self):
        phi = mobius_to_chord(-1.0, 2.0)
        image, deriv = phi.boundary_jet(0.5)
        assert image == pytest.approx(phi.apply_real(0.5))
        assert deriv > 0

    def test_frame_scale(self):
        assert frame_scale(0.0, math.inf, [1.0, 2.0]) == pytest.approx(0.5)
        assert frame_scale(0.0, math.inf, []) == 1.0


class TestSampleChord:
    def test_base_run_matches_chordal_driving(self, kappa3):
        numerics = Numerics(dt=0.01, t_max=0.1)
        rng = RngStream(seed=5, stream_index=0)
        driving = sample_chordal_driving(kappa3, numerics.t_max, numerics.dt, rng)
        sample = sample_chord(kappa3, 0.0, 1.0, numerics, rng)
        n0 = numerics.n_steps
        assert np.array_equal(sample.chart.drives[:n0], driving.values[1:])
        assert len(sample.chart) <= int(numerics.max_extension * n0)

    def test_extensions_grow_capacity(self, kappa3):
        numerics = Numerics(dt=0.01, t_max=0.1, dist_stop=1e-9)
        sample = sample_chord(kappa3, 0.0, 1.0, numerics, RngStream(seed=5, stream_index=0))
        assert sample.extensions >= 1
        assert sample.total_capacity > numerics.t_max

    def test_trace_starts_at_a(self, kappa3, coarse):
        sample = sample_chord(kappa3, 2.0, 5.0, coarse, RngStream(seed=1, stream_index=0))
        trace = sample.trace_frame(coarse.max_trace_points)
        assert trace.points[0] == pytest.approx(2.0)

    def test_chordal_trace_in_h(self, kappa3, coarse):
        trace = sample_chordal_trace(None, 0, math.inf, kappa3, coarse.t_max, coarse.dt,
                                     RngStream(seed=2, stream_index=0), coarse)
        assert trace.points[0] == 0.0
        assert np.all(trace.points.imag >= -1e-9)


class TestTwoPoint:
    def test_force_point_at_infinity(self, kappa3):
        sample = sample_two_point_driving(kappa3, 0.0, math.inf, [1.0], 1.0, 0.01,
                                          RngStream(seed=0, stream_index=0), noise_off=True)
        assert sample.stop_reason == StopReason.T_MAX
        assert sample.flows.g[0] == pytest.approx(math.sqrt(5.0), rel=1e-12)
        assert sample.n_halvings == 0
        assert np.all(sample.driving.values == 0.0)

    def test_kappa_six_has_no_drift(self, kappa6):
        sample = sample_two_point_driving(kappa6, 0.0, 1.0, [], 1.0, 0.01,
                                          RngStream(seed=0, stream_index=0), noise_off=True)
        assert sample.stop_reason == StopReason.T_MAX
        assert np.all(sample.driving.values == 0.0)
        assert sample.v_values[-1] == pytest.approx(math.sqrt(5.0), rel=1e-9)
        assert sample.n_halvings > 0
        assert sample.stop_capacity == pytest.approx(1.0)

    def test_snapshots(self, kappa3):
        sample = sample_two_point_driving(kappa3, 0.0, math.inf, [1.0], 0.5, 0.01,
                                          RngStream(seed=0, stream_index=0), record_times=[0.0, 0.25],
                                          noise_off=True)
        snap = sample.snapshot_at(0.25)
        assert snap is not None
        assert snap.g[0] == pytest.approx(math.sqrt(2.0), rel=1e-12)
        assert sample.snapshot_at(0.3) is None

    def test_coincident_points(self, kappa3):
        with pytest.raises(PatternError):
            sample_two_point_driving(kappa3, 1.0, 1.0, [], 1.0, 0.01, RngStream(seed=0, stream_index=0))
        with pytest.raises(PatternError):
            sample_two_point_driving(kappa3, 1.0, 2.0, [1.0], 1.0, 0.01, RngStream(seed=0, stream_index=0))
