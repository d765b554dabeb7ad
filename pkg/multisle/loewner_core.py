# loewner_core.py - discrete chordal Loewner evolution by composition of vertical-slit maps

from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd
import structlog

logger = structlog.get_logger(__name__)

EPS_SWALLOW_FACTOR = 1e-6


@dataclass(frozen=True)
class DrivingPath:
    """W_0, ..., W_M on the uniform capacity grid k*dt"""

    dt: float
    values: np.ndarray

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("driving values must be a nonempty 1-d sequence")
        object.__setattr__(self, "values", values)

    @property
    def n_steps(self) -> int:
        return self.values.size - 1

    @property
    def total_capacity(self) -> float:
        return self.n_steps * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.size) * self.dt

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.times, "w": self.values})

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "DrivingPath":
        t = frame["t"].to_numpy(dtype=float)
        dt = float(t[1] - t[0]) if t.size > 1 else 1.0
        return cls(dt=dt, values=frame["w"].to_numpy(dtype=float))


@dataclass(frozen=True)
class LoewnerChart:
    """Composition g = f_M o ... o f_1 of elementary slit maps

    Step k has driving value drives[k] and capacity increment dts[k]; start is the
    driving value at capacity 0 (the root of the hull), nan for the empty chart.
    """

    drives: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dts: np.ndarray = field(default_factory=lambda: np.zeros(0))
    start: float = float("nan")

    def __post_init__(self):
        drives = np.asarray(self.drives, dtype=float)
        dts = np.asarray(self.dts, dtype=float)
        if drives.shape != dts.shape:
            raise ValueError("drives and dts must have the same length")
        if np.any(dts < 0):
            raise ValueError("capacity increments must be nonnegative")
        object.__setattr__(self, "drives", drives)
        object.__setattr__(self, "dts", dts)

    def __len__(self) -> int:
        return self.drives.size

    @property
    def total_capacity(self) -> float:
        return float(np.sum(self.dts))

    @property
    def capacities(self) -> np.ndarray:
        """Capacity reached after each step"""
        return np.cumsum(self.dts)

    @property
    def tip_driving(self) -> float:
        if len(self):
            return float(self.drives[-1])
        return float(self.start)

    @classmethod
    def empty(cls) -> "LoewnerChart":
        return cls()

    def concat(self, other: "LoewnerChart") -> "LoewnerChart":
        start = self.start if len(self) or not np.isnan(self.start) else other.start
        return LoewnerChart(
            drives=np.concatenate([self.drives, other.drives]),
            dts=np.concatenate([self.dts, other.dts]),
            start=start,
        )

    def truncate(self, n_steps: int) -> "LoewnerChart":
        return LoewnerChart(drives=self.drives[:n_steps], dts=self.dts[:n_steps], start=self.start)


@dataclass(frozen=True)
class Trace:
    """Polyline of a curve in the closed upper half-plane, parametrized by capacity"""

    points: np.ndarray
    capacities: np.ndarray
    flagged_steps: int = 0
    warnings: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=complex))
        object.__setattr__(self, "capacities", np.asarray(self.capacities, dtype=float))

    def __len__(self) -> int:
        return self.points.size

    @property
    def tip(self) -> complex:
        return complex(self.points[-1])

    def with_warning(self, message: str) -> "Trace":
        return Trace(self.points, self.capacities, self.flagged_steps, self.warnings + (message,))

    def coarsen(self, max_points: int) -> "Trace":
        if len(self) <= max_points:
            return self
        stride = int(np.ceil((len(self) - 1) / (max_points - 1)))
        keep = np.unique(np.append(np.arange(0, len(self), stride), len(self) - 1))
        return Trace(self.points[keep], self.capacities[keep], self.flagged_steps, self.warnings)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"capacity": self.capacities, "re": self.points.real, "im": self.points.imag})

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "Trace":
        points = frame["re"].to_numpy(dtype=float) + 1j * frame["im"].to_numpy(dtype=float)
        return cls(points=points, capacities=frame["capacity"].to_numpy(dtype=float))


@dataclass(frozen=True)
class BoundaryFlow:
    """Images g, derivatives g' and swallowing data of real points

    Swallowed points keep the image and derivative they had just before swallowing.
    swallowed_at is the capacity before the swallowing step (inf for survivors),
    swallow_step its index (-1 for survivors), hit marks points the curve itself
    reached rather than enclosed.
    """

    g: np.ndarray
    g_prime: np.ndarray
    swallowed_at: np.ndarray
    swallow_step: np.ndarray
    hit: np.ndarray

    @property
    def swallowed(self) -> np.ndarray:
        return np.isfinite(self.swallowed_at)


# ---------------------------------------------------------------------------
# Elementary maps
# ---------------------------------------------------------------------------

def upper_root(q: np.ndarray, sign_hint: np.ndarray) -> np.ndarray:
    """Square root in the closed upper half-plane; real roots take the sign of sign_hint"""
    root = np.sqrt(q)
    root = np.where(root.imag < 0, -root, root)
    flip = (root.imag == 0) & (np.real(sign_hint) < 0)
    return np.where(flip, -root, root)


def slit_forward(z, w: float, dt: float):
    """z -> w + sqrt((z - w)^2 + 4 dt), mapping H minus the slit onto H"""
    d = np.asarray(z, dtype=complex) - w
    return w + upper_root(d * d + 4.0 * dt, d)


def slit_forward_derivative(z, w: float, dt: float):
    d = np.asarray(z, dtype=complex) - w
    return d / upper_root(d * d + 4.0 * dt, d)


def slit_inverse(z, w: float, dt: float):
    """Inverse of slit_forward; real points under the slit base land on the slit"""
    d = np.asarray(z, dtype=complex) - w
    return w + upper_root(d * d - 4.0 * dt, d)


# ---------------------------------------------------------------------------
# Chart operations
# ---------------------------------------------------------------------------

def advance_chart(chart: LoewnerChart, driving: DrivingPath) -> LoewnerChart:
    """Append one elementary map per driving step (step k driven by W_k)"""
    steps = LoewnerChart(
        drives=driving.values[1:],
        dts=np.full(driving.n_steps, driving.dt),
        start=float(driving.values[0]),
    )
    return chart.concat(steps)


def chart_from_driving(driving: DrivingPath) -> LoewnerChart:
    return advance_chart(LoewnerChart.empty(), driving)


def apply_chart(chart: LoewnerChart, z):
    """Forward map of interior points; scalar in, scalar out"""
    scalar = np.ndim(z) == 0
    out = np.atleast_1d(np.asarray(z, dtype=complex)).copy()
    for w, dt in zip(chart.drives, chart.dts):
        out = slit_forward(out, w, dt)
    return complex(out[0]) if scalar else out


def apply_chart_with_derivative(chart: LoewnerChart, z):
    out = np.atleast_1d(np.asarray(z, dtype=complex)).copy()
    deriv = np.ones_like(out)
    for w, dt in zip(chart.drives, chart.dts):
        deriv = deriv * slit_forward_derivative(out, w, dt)
        out = slit_forward(out, w, dt)
    return out, deriv


def invert_chart(chart: LoewnerChart, w):
    """Pull points back through the chart, last step first"""
    scalar = np.ndim(w) == 0
    out = np.atleast_1d(np.asarray(w, dtype=complex)).copy()
    for drive, dt in zip(chart.drives[::-1], chart.dts[::-1]):
        out = slit_inverse(out, drive, dt)
    return complex(out[0]) if scalar else out


def interior_sides(chart: LoewnerChart, z) -> Tuple[np.ndarray, np.ndarray]:
    """Flow interior points and record which side of the curve each one ends on

    Returns (side, swallowed_at): side is +1 for points right of the curve, -1 for
    left. Points cut off by the curve keep the side they had when their image
    reached the real line.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex)).copy()
    side = np.zeros(z.size)
    swallowed_at = np.full(z.size, np.inf)
    alive = np.ones(z.size, dtype=bool)
    t = 0.0
    for w, dt in zip(chart.drives, chart.dts):
        z[alive] = slit_forward(z[alive], w, dt)
        t += dt
        hit = alive & (z.imag <= 1e-12 * (1.0 + np.abs(z.real - w)))
        if np.any(hit):
            side[hit] = np.sign(z[hit].real - w)
            swallowed_at[hit] = t
            alive &= ~hit
    if len(chart):
        side[alive] = np.sign(z[alive].real - chart.tip_driving)
    return side, swallowed_at


def flow_step(g, g_prime, side, alive, swallowed_at, w, dt, t_before, eps, swallow_step=None, step=0, hit=None):
    """One elementary map on tracked real points; mutates the arrays in place

    A point is swallowed when the driving value comes within eps of its image or
    lands on its other side. Points caught by the eps rule are flagged in hit.
    """
    d = g - w
    near = alive & (np.abs(d) <= eps)
    crossed = alive & (near | (np.sign(d) != side))
    if np.any(crossed):
        swallowed_at[crossed] = t_before
        if swallow_step is not None:
            swallow_step[crossed] = step
        if hit is not None:
            hit |= near
        alive &= ~crossed
    if not np.any(alive):
        return
    da = d[alive]
    root = np.sqrt(da * da + 4.0 * dt)
    g[alive] = w + side[alive] * root
    g_prime[alive] *= np.abs(da) / root


def flow_boundary(chart: LoewnerChart, u, eps_factor: float = EPS_SWALLOW_FACTOR) -> BoundaryFlow:
    """Flow real points through the chart, tracking derivatives and swallowing"""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    g = u.copy()
    g_prime = np.ones_like(u)
    swallowed_at = np.full(u.size, np.inf)
    swallow_step = np.full(u.size, -1, dtype=int)
    hit = np.zeros(u.size, dtype=bool)
    finite = np.isfinite(u)
    if not len(chart):
        return BoundaryFlow(g, g_prime, swallowed_at, swallow_step, hit)

    side = np.sign(u - chart.start)
    root_hit = finite & (side == 0)
    swallowed_at[root_hit] = 0.0
    swallow_step[root_hit] = 0
    hit |= root_hit
    alive = finite & ~root_hit
    t = 0.0
    for k, (w, dt) in enumerate(zip(chart.drives, chart.dts)):
        flow_step(g, g_prime, side, alive, swallowed_at, w, dt, t, eps_factor * np.sqrt(dt), swallow_step, k, hit)
        t += dt
        if not np.any(alive):
            break
    return BoundaryFlow(g, g_prime, swallowed_at, swallow_step, hit)


def apply_chart_boundary(chart: LoewnerChart, u: float, eps_factor: float = EPS_SWALLOW_FACTOR):
    """(g, g') for a surviving point, or ("SWALLOWED", tau)"""
    flow = flow_boundary(chart, [u], eps_factor)
    if flow.swallowed[0]:
        return ("SWALLOWED", float(flow.swallowed_at[0]))
    return float(flow.g[0]), float(flow.g_prime[0])


# ---------------------------------------------------------------------------
# Traces
# ---------------------------------------------------------------------------

def extract_trace(source: Union[DrivingPath, LoewnerChart], stride: int = 1) -> Trace:
    """Tips g_t^{-1}(W_t) at every stride-th grid capacity, plus the final one

    The tip after k steps is the slit tip W_k + 2i sqrt(dt_k) pulled back through
    steps k-1, ..., 1. All requested tips are pulled back together, so the cost is
    O(M^2 / stride).
    """
    chart = chart_from_driving(source) if isinstance(source, DrivingPath) else source
    m = len(chart)
    start = complex(chart.start if not np.isnan(chart.start) else 0.0)
    if m == 0:
        return Trace(points=np.array([start]), capacities=np.array([0.0]))

    stride = max(1, int(stride))
    ks = np.unique(np.append(np.arange(stride, m + 1, stride), m))
    idx = ks - 1
    tips = chart.drives[idx] + 2j * np.sqrt(chart.dts[idx])
    for j in range(m - 2, -1, -1):
        pos = np.searchsorted(idx, j, side="right")
        if pos >= idx.size:
            continue
        tips[pos:] = slit_inverse(tips[pos:], chart.drives[j], chart.dts[j])

    bad = ~np.isfinite(tips) | (tips.imag < -1e-9)
    flagged = int(np.count_nonzero(bad))
    if flagged:
        good = ~bad
        logger.warning("⚠️ inverse branch failed on trace steps, interpolating", flagged=flagged)
        if np.any(good):
            tips[bad] = np.interp(idx[bad], idx[good], tips[good].real) + 1j * np.interp(
                idx[bad], idx[good], tips[good].imag
            )
        else:
            tips[bad] = start
    tips = tips.real + 1j * np.maximum(tips.imag, 0.0)

    capacities = np.concatenate([[0.0], chart.capacities[idx]])
    return Trace(points=np.concatenate([[start], tips]), capacities=capacities, flagged_steps=flagged)


def zip_polyline(points, start: Optional[float] = None) -> LoewnerChart:
    """Conformal welding of a polyline rooted on the real line into vertical slits

    Each vertex, after the previous vertices have been unzipped, is the tip of a
    vertical slit: its real part is the driving value and (Im/2)^2 the capacity
    increment. Inverse of extract_trace on the same grid.
    """
    pts = np.asarray(points, dtype=complex)
    root = float(pts[0].real) if start is None else float(start)
    rest = pts[1:].copy()
    n = rest.size
    drives = np.empty(n)
    dts = np.empty(n)
    for k in range(n):
        p = rest[k]
        w = float(p.real)
        h = max(float(p.imag), 0.0)
        dt = 0.25 * h * h
        drives[k] = w
        dts[k] = dt
        if k + 1 < n:
            rest[k + 1:] = slit_forward(rest[k + 1:], w, dt)
    return LoewnerChart(drives=drives, dts=dts, start=root)
