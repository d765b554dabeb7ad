# sle_sampling.py - driving functions: chordal SLE, the two-point SLE(k-6) system, chord frames

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field

from errors import DomainError, PatternError
from loewner_core import (
    BoundaryFlow,
    DrivingPath,
    LoewnerChart,
    Trace,
    extract_trace,
    flow_step,
    invert_chart,
)
from schemas import Numerics, StopReason
from special_fns import KappaParams

logger = structlog.get_logger(__name__)


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------

class RngStream(BaseModel):
    """Counter-based stream: Philox keyed by SeedSequence(seed, spawn_key=(stream_index, *path, sub))

    sub=0 carries the main Gaussian increments, sub=1 the Brownian-bridge
    refinements used when a step is halved. child(k) derives the stream of the
    k-th curve sampled inside one ensemble member.
    """

    model_config = ConfigDict(frozen=True)

    seed: int = Field(..., ge=0)
    stream_index: int = Field(..., ge=0)
    path: Tuple[int, ...] = ()

    def generator(self, sub: int = 0) -> np.random.Generator:
        return rng_generator(self.seed, self.stream_index, sub, self.path)

    def child(self, k: int) -> "RngStream":
        return RngStream(seed=self.seed, stream_index=self.stream_index, path=self.path + (int(k),))


def rng_generator(seed: int, stream_index: int, sub: int = 0, path: Tuple[int, ...] = ()) -> np.random.Generator:
    sequence = np.random.SeedSequence(seed, spawn_key=(stream_index, *path, sub))
    return np.random.Generator(np.random.Philox(sequence))


def _increments(gen: np.random.Generator, n: int, kappa: float, dt: float) -> np.ndarray:
    return np.sqrt(kappa * dt) * gen.standard_normal(n)


# ---------------------------------------------------------------------------
# Mobius self-maps of H
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MobiusMap:
    """z -> (p z + q) / (r z + s) with ps - qr > 0"""

    p: float
    q: float
    r: float
    s: float

    def __post_init__(self):
        if not self.det > 0:
            raise DomainError("Mobius map must preserve the upper half-plane", {"det": self.det})

    @property
    def det(self) -> float:
        return self.p * self.s - self.q * self.r

    @classmethod
    def identity(cls) -> "MobiusMap":
        return cls(1.0, 0.0, 0.0, 1.0)

    def inverse(self) -> "MobiusMap":
        return MobiusMap(self.s, -self.q, -self.r, self.p)

    def compose(self, other: "MobiusMap") -> "MobiusMap":
        """self o other"""
        return MobiusMap(
            self.p * other.p + self.q * other.r,
            self.p * other.q + self.q * other.s,
            self.r * other.p + self.s * other.r,
            self.r * other.q + self.s * other.s,
        )

    def apply(self, z):
        """Complex points (vectorized); inf maps to p/r"""
        scalar = np.ndim(z) == 0
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        out = np.empty_like(z)
        at_inf = np.isinf(z)
        num = self.p * z[~at_inf] + self.q
        den = self.r * z[~at_inf] + self.s
        with np.errstate(divide="ignore", invalid="ignore"):
            out[~at_inf] = np.where(den == 0, complex(np.inf, 0.0), num / np.where(den == 0, 1.0, den))
        out[at_inf] = complex(np.inf, 0.0) if self.r == 0 else complex(self.p / self.r, 0.0)
        return complex(out[0]) if scalar else out

    def apply_real(self, x: float) -> float:
        if math.isinf(x):
            return math.inf if self.r == 0 else self.p / self.r
        den = self.r * x + self.s
        if den == 0:
            return math.inf
        return (self.p * x + self.q) / den

    def derivative(self, z):
        return self.det / (self.r * np.asarray(z, dtype=complex) + self.s) ** 2

    def boundary_jet(self, x: float) -> Tuple[float, float]:
        """(image, |derivative|) at a boundary point, using the coordinate -1/z at infinity"""
        image = self.apply_real(x)
        if math.isinf(x):
            deriv = abs(self.s / self.p) if math.isinf(image) else self.det / self.r ** 2
        elif math.isinf(image):
            deriv = self.det / (self.p * x + self.q) ** 2
        else:
            deriv = self.det / (self.r * x + self.s) ** 2
        return image, deriv


def mobius_to_chord(a: float, b: float, scale: float = 1.0) -> MobiusMap:
    """Self-map of H sending 0 to a and infinity to b; scale s stretches the source frame (z -> phi(z/s))"""
    a, b = float(a), float(b)
    if a == b:
        raise PatternError("chord endpoints must differ", (0, 1))
    if scale <= 0:
        raise DomainError("frame scale must be positive", {"scale": scale})
    if math.isinf(a) and math.isinf(b):
        raise PatternError("both chord endpoints at infinity", (0, 1))
    if math.isinf(b):
        return MobiusMap(1.0, a * scale, 0.0, scale)
    if math.isinf(a):
        return MobiusMap(b, -scale, 1.0, 0.0)
    lam = scale * (b - a)
    return MobiusMap(b, a * lam, 1.0, lam)


# ---------------------------------------------------------------------------
# Chordal SLE
# ---------------------------------------------------------------------------

def sample_chordal_driving(params: KappaParams, t_max: float, dt: float, rng: RngStream) -> DrivingPath:
    """W_0 = 0 and i.i.d. N(0, kappa dt) increments"""
    if t_max <= 0 or dt <= 0:
        raise DomainError("t_max and dt must be positive", {"t_max": t_max, "dt": dt})
    n = max(1, int(round(t_max / dt)))
    increments = _increments(rng.generator(0), n, params.kappa, dt)
    return DrivingPath(dt=dt, values=np.concatenate([[0.0], np.cumsum(increments)]))


@dataclass(frozen=True, eq=False)
class ChordSample:
    """A 0 -> inf chordal sample in its standard frame plus the Mobius map to the target chord"""

    mobius: MobiusMap
    chart: LoewnerChart
    closeness: float
    extensions: int
    dt: float

    @property
    def total_capacity(self) -> float:
        return self.chart.total_capacity

    @property
    def tip_std(self) -> complex:
        return invert_chart(self.chart, complex(self.chart.tip_driving, 0.0))

    def trace_std(self, max_points: int = 1000, complete: bool = True, n_completion: int = 40) -> Trace:
        """Trace in the standard frame, optionally continued by the geodesic g_T^{-1}(W_T + i s)"""
        stride = max(1, int(math.ceil(len(self.chart) / max(1, max_points))))
        trace = extract_trace(self.chart, stride)
        if not complete or not len(self.chart):
            return trace
        w_t = self.chart.tip_driving
        reach = 1e4 * max(1.0, abs(trace.tip))
        heights = np.geomspace(2.0 * math.sqrt(self.dt), reach, n_completion)[1:]
        ray = invert_chart(self.chart, w_t + 1j * heights)
        capacities = self.chart.total_capacity + 0.25 * heights * heights
        return Trace(
            points=np.concatenate([trace.points, ray]),
            capacities=np.concatenate([trace.capacities, capacities]),
            flagged_steps=trace.flagged_steps,
        )

    def trace_frame(self, max_points: int = 1000, complete: bool = True) -> Trace:
        std = self.trace_std(max_points, complete)
        return Trace(self.mobius.apply(std.points), std.capacities, std.flagged_steps, std.warnings)


def _closeness(mobius: MobiusMap, tip_std: complex, b: float) -> float:
    image = mobius.apply(tip_std)
    if math.isinf(b):
        return 1.0 / abs(image) if abs(image) > 0 else math.inf
    return abs(image - b)


def frame_scale(a: float, b: float, others: Sequence[float], radius: float = 1.0) -> float:
    """Scale placing the other marked points within radius of 0 in the standard frame"""
    unit = mobius_to_chord(a, b).inverse()
    extent = [abs(unit.apply_real(x)) for x in others]
    extent = [e for e in extent if math.isfinite(e) and e > 0]
    if not extent:
        return 1.0
    return radius / max(extent)


def sample_chord(
    params: KappaParams,
    a: float,
    b: float,
    numerics: Numerics,
    rng: RngStream,
    scale: float = 1.0,
) -> ChordSample:
    """Sample a->b by a 0->inf chordal driving, extending capacity until the tip nears b

    The base run reproduces sample_chordal_driving(t_max) exactly; extensions
    continue the same generator and double the capacity up to max_extension*t_max.
    """
    mobius = mobius_to_chord(a, b, scale)
    gen = rng.generator(0)
    dt = numerics.dt
    n0 = numerics.n_steps
    values = np.concatenate([[0.0], np.cumsum(_increments(gen, n0, params.kappa, dt))])
    n_cap = int(round(numerics.max_extension * n0))
    extensions = 0
    while True:
        chart = LoewnerChart(drives=values[1:], dts=np.full(values.size - 1, dt), start=0.0)
        tip = invert_chart(chart, complex(values[-1], 0.0))
        closeness = _closeness(mobius, tip, b)
        n_now = values.size - 1
        if closeness <= numerics.dist_stop or n_now >= n_cap:
            break
        n_add = min(n_now, n_cap - n_now)
        more = values[-1] + np.cumsum(_increments(gen, n_add, params.kappa, dt))
        values = np.concatenate([values, more])
        extensions += 1
    return ChordSample(mobius=mobius, chart=chart, closeness=float(closeness), extensions=extensions, dt=dt)


def sample_chordal_trace(chart, a_pt: int, b_pt: int, params: KappaParams, t_max: float, dt: float, rng: RngStream,
                         numerics: Optional[Numerics] = None, accuracy_threshold: float = 1e-3) -> Trace:
    """Sample the chord between two marked points of a component and return it in original coordinates

    chart is a component chart (anything exposing image, members, to_original and
    accuracy); None means the identity chart of H, with a_pt and b_pt then taken as
    the boundary points themselves.
    """
    numerics = numerics or Numerics(dt=dt, t_max=t_max)
    if chart is None:
        x_a, x_b, others = float(a_pt), float(b_pt), []
    else:
        x_a, x_b = chart.image(a_pt), chart.image(b_pt)
        others = [chart.image(m) for m in chart.members if m not in (a_pt, b_pt)]
    scale = frame_scale(x_a, x_b, others)
    sample = sample_chord(params, x_a, x_b, numerics, rng, scale)
    frame = sample.trace_frame(numerics.max_trace_points)
    if chart is None:
        return frame
    points = chart.to_original(frame.points)
    trace = Trace(points, frame.capacities, frame.flagged_steps)
    if chart.accuracy > accuracy_threshold:
        trace = trace.with_warning(f"chart accuracy {chart.accuracy:.3g} above threshold {accuracy_threshold:.3g}")
    return trace


# ---------------------------------------------------------------------------
# Two-point system dW = (k-6)/(W-V) dt + sqrt(k) dB, V and tracked points on the Loewner flow
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FlowSnapshot:
    t: float
    w: float
    v: float
    g: np.ndarray
    g_prime: np.ndarray


@dataclass(frozen=True, eq=False)
class TwoPointSample:
    driving: DrivingPath
    chart: LoewnerChart
    v_values: np.ndarray
    flows: BoundaryFlow
    stop_reason: StopReason
    stop_capacity: float
    n_halvings: int
    snapshots: Tuple[FlowSnapshot, ...] = ()
    last: Optional[FlowSnapshot] = None

    def snapshot_at(self, t: float) -> Optional[FlowSnapshot]:
        for snap in self.snapshots:
            if abs(snap.t - t) <= 1e-12 * max(1.0, t):
                return snap
        return None


def sample_two_point_driving(
    params: KappaParams,
    u_a: float,
    u_b: float,
    tracked: Sequence[float],
    t_max: float,
    dt: float,
    rng: RngStream,
    numerics: Optional[Numerics] = None,
    record_times: Sequence[float] = (),
    noise_off: bool = False,
) -> TwoPointSample:
    """Euler-Maruyama for W with exact slit-map flow of V and the tracked points

    Stops at t_max or at the first step where V or a tracked point is swallowed.
    A step is halved (Brownian bridge from sub-stream 1) while |W - V| is below
    drift_halving_factor * sqrt(kappa * h); u_b = inf freezes V and removes the drift.
    """
    numerics = numerics or Numerics(dt=dt, t_max=t_max)
    if u_a == u_b:
        raise PatternError("driven point and force point coincide", (0, 1))
    tracked = np.asarray(tracked, dtype=float)
    if np.any(tracked == u_a):
        raise PatternError("tracked point coincides with the driven point", tuple(np.flatnonzero(tracked == u_a)))

    kappa = params.kappa
    n = max(1, int(round(t_max / dt)))
    noise = np.zeros(n) if noise_off else _increments(rng.generator(0), n, kappa, dt)
    bridge = rng.generator(1)
    eps_factor = numerics.eps_swallow_factor
    factor = numerics.drift_halving_factor
    v_finite = math.isfinite(u_b)

    w = float(u_a)
    v = float(u_b)
    v_side = math.copysign(1.0, v - w)
    g = tracked.copy()
    g_prime = np.ones_like(g)
    side = np.sign(g - w)
    alive = np.ones(g.size, dtype=bool)
    swallowed_at = np.full(g.size, np.inf)
    swallow_step = np.full(g.size, -1, dtype=int)
    hit = np.zeros(g.size, dtype=bool)

    record_steps = {int(round(t / dt)): t for t in record_times}
    snapshots = []
    if 0 in record_steps:
        snapshots.append(FlowSnapshot(0.0, w, v, g.copy(), g_prime.copy()))
    drives: List[float] = []
    dts: List[float] = []
    main = [w]
    v_values = [v]
    t = 0.0
    n_halvings = 0
    stop = StopReason.T_MAX
    last = FlowSnapshot(0.0, w, v, g.copy(), g_prime.copy())

    for k in range(n):
        pending = [(dt, noise[k], 0)]
        while pending and stop == StopReason.T_MAX:
            h, xi, depth = pending.pop()
            if v_finite and abs(w - v) < factor * math.sqrt(kappa * h):
                if depth < numerics.max_halvings:
                    z = 0.0 if noise_off else bridge.standard_normal()
                    first = 0.5 * xi + math.sqrt(kappa * h / 4.0) * z
                    pending.append((0.5 * h, xi - first, depth + 1))
                    pending.append((0.5 * h, first, depth + 1))
                    n_halvings += 1
                    continue
                stop = StopReason.HALVING_LIMIT
                break
            drift = (kappa - 6.0) / (w - v) if v_finite else 0.0
            w = w + drift * h + xi
            if v_finite:
                d = v - w
                if math.copysign(1.0, d) != v_side or abs(d) <= eps_factor * math.sqrt(h):
                    stop = StopReason.V_SWALLOWED
                    break
            if g.size:
                flow_step(g, g_prime, side, alive, swallowed_at, w, h, t, eps_factor * math.sqrt(h), swallow_step, len(dts), hit)
                if not alive.all():
                    stop = StopReason.TRACKED_SWALLOWED
                    break
            if v_finite:
                v = w + v_side * math.sqrt(d * d + 4.0 * h)
            drives.append(w)
            dts.append(h)
            t += h
            last = FlowSnapshot(t, w, v, g.copy(), g_prime.copy())
        if stop != StopReason.T_MAX:
            break
        main.append(w)
        v_values.append(v)
        if k + 1 in record_steps:
            snapshots.append(FlowSnapshot(record_steps[k + 1], w, v, g.copy(), g_prime.copy()))

    if stop != StopReason.T_MAX:
        logger.debug("⏹️ two-point flow stopped", reason=stop.value, capacity=t, halvings=n_halvings)
    chart = LoewnerChart(drives=np.asarray(drives), dts=np.asarray(dts), start=float(u_a))
    flows = BoundaryFlow(g, g_prime, swallowed_at, swallow_step, hit)
    return TwoPointSample(
        driving=DrivingPath(dt=dt, values=np.asarray(main)),
        chart=chart,
        v_values=np.asarray(v_values),
        flows=flows,
        stop_reason=stop,
        stop_capacity=t,
        n_halvings=n_halvings,
        snapshots=tuple(snapshots),
        last=last,
    )
