# partition_mc.py - partition functions: closed forms for N <= 2, the cascade estimator and its diagnostics

import itertools
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from joblib import Parallel, delayed

from domain_algebra import (
    ComponentChart,
    DomainState,
    LinkPattern,
    chart_for,
    cross_ratio_points,
    initial_state,
    is_link_pattern,
    remove_link,
    split_by_chord,
)
from errors import ChartFailure, DomainError, PatternError, SpacingError
from loewner_core import Trace, chart_from_driving, flow_boundary
from schemas import LinkStatus, MartingaleDiagnostic, Numerics, PartitionEstimate
from sle_sampling import RngStream, frame_scale, sample_chord, sample_chordal_driving, sample_two_point_driving
from special_fns import KappaParams, g_limit, g_normalized, one_side_avoidance

logger = structlog.get_logger(__name__)

PatternLike = Union[LinkPattern, str, Sequence[Tuple[float, float]]]


def as_pattern(pattern: PatternLike) -> LinkPattern:
    if isinstance(pattern, LinkPattern):
        return pattern
    return LinkPattern(links=pattern)


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------

def h_one(params: KappaParams, a: float, b: float) -> float:
    """|a - b|^(-2b); with the coordinate -1/z at infinity, H(a, inf) = 1"""
    a, b = float(a), float(b)
    if a == b:
        raise PatternError("link endpoints coincide", (0, 1))
    if math.isinf(a) or math.isinf(b):
        return 1.0
    return abs(a - b) ** (-2.0 * params.b)


def h_pair(params: KappaParams, x_a: float, x_b: float, d_a: float, d_b: float) -> float:
    """Single-link value transported through a chart: (d_a d_b)^b H(x_a, x_b)"""
    return (d_a * d_b) ** params.b * h_one(params, x_a, x_b)


def tail_factor(params: KappaParams, x_a: float, x_b: float, drive: Optional[float]) -> float:
    """Expected effect of the unexplored chord tail from drive to infinity on one link"""
    if drive is None:
        return 1.0
    da, db = x_a - drive, x_b - drive
    if da * db <= 0:
        return 0.0
    near, far = sorted((abs(da), abs(db)))
    return g_normalized(params.kappa, near / far)


def h_half_plane(params: KappaParams, points: Sequence[float], pairs: Sequence[Tuple[int, int]]) -> float:
    """Closed form for one or two links of H given by indices into points"""
    points = np.asarray(points, dtype=float)
    if len(pairs) == 1:
        i, j = pairs[0]
        return h_one(params, points[i], points[j])
    if len(pairs) == 2:
        (i1, j1), (i2, j2) = pairs
        r = cross_ratio_points(points[i1], points[j1], points[i2], points[j2])
        if r <= 0:
            return 0.0
        return g_normalized(params.kappa, r) * h_one(params, points[i1], points[j1]) * h_one(params, points[i2], points[j2])
    raise DomainError("closed forms exist for at most two links", {"n_links": len(pairs)})


def h_two(params: KappaParams, pattern: PatternLike) -> float:
    """G(r) h(alpha_1) h(alpha_2) for nested or side-by-side links, 0 for crossing links

    G is divided by its limit G(1-) so H factorizes exactly when a link collapses;
    the raw limit exceeds 1 for 4 < kappa < 8 and would make the ratio H / (h h) no
    probability. asymptotics_check still reports the raw G(1-).
    """
    pattern = as_pattern(pattern)
    if pattern.n_links != 2:
        raise PatternError(f"h_two needs two links, got {pattern.n_links}")
    if is_link_pattern(pattern) == LinkStatus.CLP_ONLY:
        return 0.0
    return h_half_plane(params, pattern.points, [(0, 1), (2, 3)])


def h_component(
    params: KappaParams,
    chart: ComponentChart,
    pairs: Sequence[Tuple[int, int]],
    use_tail: bool = True,
) -> float:
    """Closed-form value of at most two links living in one component

    Charts cut out by a truncated chord are evaluated in the g_T frame with the
    tail factor of each link. Two links in such a chart have no closed
    form and raise DomainError.
    """
    if len(pairs) == 2 and use_tail and chart.has_tail:
        raise DomainError("no two-link closed form in a chart with a chord tail", {"tail_drive": chart.tail_drive})
    members = [m for pair in pairs for m in pair]
    x, d, drive = chart.weight_frame(members, use_tail)
    value = 1.0
    for k in range(len(pairs)):
        value *= h_pair(params, x[2 * k], x[2 * k + 1], d[2 * k], d[2 * k + 1])
        value *= tail_factor(params, x[2 * k], x[2 * k + 1], drive)
        if value == 0.0:
            return 0.0
    if len(pairs) == 2:
        r = cross_ratio_points(*x)
        if r <= 0:
            return 0.0
        value *= g_normalized(params.kappa, r)
    elif len(pairs) > 2:
        raise DomainError("closed forms exist for at most two links", {"n_links": len(pairs)})
    return float(value)


def h_slit(chart: ComponentChart, params: KappaParams, u_pt: int, v_pt: int, use_tail: bool = True) -> float:
    """(g'(u) g'(v))^b |g(u) - g(v)|^(-2b) through a component chart"""
    if u_pt not in chart.members or v_pt not in chart.members:
        return 0.0
    return h_component(params, chart, [(u_pt, v_pt)], use_tail)


# ---------------------------------------------------------------------------
# Cascade
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CascadeMember:
    stream_index: int
    weight: float
    rejected: bool = False
    bound: float = math.inf
    traces: Tuple[Trace, ...] = ()
    capacities: Tuple[float, ...] = ()
    closeness: Tuple[float, ...] = ()
    message: str = ""


def rooted_link(chart: ComponentChart, a_idx: int, b_idx: int) -> Tuple[int, int]:
    """Sample from a finite endpoint; the chordal law does not depend on direction

    Only the original point at infinity has an infinite image in any chart, so
    traces of a link always start at a_j unless a_j is infinity.
    """
    if math.isinf(chart.image(a_idx)):
        return b_idx, a_idx
    return a_idx, b_idx


def _chord_in(params, state: DomainState, component_id: str, ia: int, ib: int, numerics: Numerics, stream: RngStream):
    chart = chart_for(state, component_id)
    ia, ib = rooted_link(chart, ia, ib)
    x_a, x_b = chart.image(ia), chart.image(ib)
    others = [chart.image(m) for m in chart.members if m not in (ia, ib)]
    chord = sample_chord(params, x_a, x_b, numerics, stream, frame_scale(x_a, x_b, others))
    return chart, chord, (ia, ib)


def chord_trace(chart: ComponentChart, chord, root: float, max_points: int) -> Trace:
    """A sampled chord pushed back to original coordinates"""
    frame = chord.trace_frame(max_points)
    points = chart.to_original(frame.points)
    points[0] = root
    return Trace(points, frame.capacities, frame.flagged_steps)


def _cascade_member(
    params: KappaParams,
    pattern: LinkPattern,
    numerics: Numerics,
    seed: int,
    stream_index: int,
    closed_form_max: int = 2,
    sample_all: bool = False,
) -> CascadeMember:
    """One weighted draw of the cascade; chart failures mark the draw rejected"""
    stream = RngStream(seed=seed, stream_index=stream_index)
    bound = float(np.prod([h_one(params, a, b) for a, b in pattern.links]))
    state = initial_state(pattern, numerics)
    try:
        if sample_all:
            return _sample_all(params, pattern, numerics, stream, state, bound)
        counter = itertools.count()
        weight = _resolve(params, numerics, stream, counter, state, "0", list(range(pattern.n_links)), closed_form_max)
        return CascadeMember(stream_index, float(weight), bound=bound)
    except ChartFailure as exc:
        logger.warning("⚠️ cascade sample rejected", stream=stream_index, reason=exc.message)
        return CascadeMember(stream_index, 0.0, rejected=True, bound=bound, message=exc.message)


def _resolve(params, numerics, stream, counter, state, component_id, links, closed_form_max) -> float:
    chart = chart_for(state, component_id)
    pairs = [(2 * k, 2 * k + 1) for k in links]
    # the two-link form holds only without a chord tail
    if len(links) == 1 or (len(links) <= closed_form_max and not chart.has_tail):
        return h_component(params, chart, pairs)
    factor = h_component(params, chart, pairs[:1], use_tail=False)
    if factor == 0.0:
        return 0.0
    _, chord, endpoints = _chord_in(params, state, component_id, *pairs[0], numerics, stream.child(next(counter)))
    state = split_by_chord(state, component_id, chord, endpoints)

    groups: Dict[str, List[int]] = {}
    for k in links[1:]:
        comp = state.component_of(2 * k)
        if comp is None or (2 * k + 1) not in comp.members:
            return 0.0
        groups.setdefault(comp.component_id, []).append(k)
    value = factor
    for sub_id, sub_links in groups.items():
        value *= _resolve(params, numerics, stream, counter, state, sub_id, sub_links, closed_form_max)
        if value == 0.0:
            return 0.0
    return value


def _sample_all(params, pattern, numerics, stream, state, bound) -> CascadeMember:
    weight = 1.0
    traces: List[Trace] = []
    capacities: List[float] = []
    closeness: List[float] = []
    for k in range(pattern.n_links):
        comp = state.component_of(2 * k)
        if comp is None or (2 * k + 1) not in comp.members:
            return CascadeMember(stream.stream_index, 0.0, bound=bound)
        chart = chart_for(state, comp.component_id)
        weight *= h_component(params, chart, [(2 * k, 2 * k + 1)])
        if weight == 0.0:
            return CascadeMember(stream.stream_index, 0.0, bound=bound)
        chart, chord, endpoints = _chord_in(params, state, comp.component_id, 2 * k, 2 * k + 1, numerics, stream.child(k))
        trace = chord_trace(chart, chord, state.points[endpoints[0]], numerics.max_trace_points)
        traces.append(trace)
        capacities.append(chord.total_capacity)
        closeness.append(chord.closeness)
        if k + 1 < pattern.n_links:
            state = split_by_chord(state, comp.component_id, chord, endpoints, trace)
    return CascadeMember(
        stream.stream_index, float(weight), bound=bound, traces=tuple(traces),
        capacities=tuple(capacities), closeness=tuple(closeness),
    )


def run_cascade(
    params: KappaParams,
    pattern: LinkPattern,
    n_samples: int,
    numerics: Numerics,
    seed: int,
    closed_form_max: int = 2,
    sample_all: bool = False,
    n_jobs: Optional[int] = None,
) -> List[CascadeMember]:
    """Members in stream order, whatever the worker count"""
    n_jobs = numerics.n_jobs if n_jobs is None else n_jobs
    return Parallel(n_jobs=n_jobs)(
        delayed(_cascade_member)(params, pattern, numerics, seed, s, closed_form_max, sample_all)
        for s in range(n_samples)
    )


def estimate_H(
    params: KappaParams,
    pattern: PatternLike,
    n_samples: int,
    numerics: Optional[Numerics] = None,
    seed: int = 0,
    closed_form_max: int = 2,
    n_jobs: Optional[int] = None,
) -> PartitionEstimate:
    """Partition function of a link pattern in H

    One and two links are evaluated in closed form unless closed_form_max is
    lowered; larger patterns run the cascade: sample the first link's chord,
    split, recurse into every component. A single link is closed at once; two
    links only when closed_form_max allows it and their component has no chord tail.
    """
    pattern = as_pattern(pattern)
    numerics = numerics or Numerics()
    is_link_pattern(pattern)
    common = dict(kappa=params.kappa, links=list(pattern.links), dt=numerics.dt, t_max=numerics.t_max, seed=seed,
                  kappa_regime=params.regime)
    n = pattern.n_links

    if n <= min(2, closed_form_max):
        value = h_one(params, *pattern.links[0]) if n == 1 else h_two(params, pattern)
        return PartitionEstimate(value=value, std_error=0.0, n_samples=n_samples,
                                 n_zero_weight=n_samples if value == 0 else 0, max_weight=value, **common)

    members = run_cascade(params, pattern, n_samples, numerics, seed, max(1, closed_form_max), False, n_jobs)
    accepted = np.array([m.weight for m in members if not m.rejected], dtype=float)
    n_rejected = len(members) - accepted.size
    warnings: List[str] = []
    if accepted.size == 0:
        warnings.append("every sample was rejected by chart failures")
        logger.warning("⚠️ no accepted cascade samples", rejected=n_rejected)
        return PartitionEstimate(value=0.0, std_error=0.0, n_samples=n_samples, n_rejected=n_rejected,
                                 warnings=warnings, **common)

    value = float(np.mean(accepted))
    std_error = float(np.std(accepted, ddof=1) / math.sqrt(accepted.size)) if accepted.size > 1 else 0.0
    n_zero = int(np.count_nonzero(accepted == 0.0))
    total = float(np.sum(accepted))
    violations = 0
    if params.kappa <= 6.0:
        bounds = np.array([m.bound for m in members if not m.rejected])
        violations = int(np.count_nonzero(accepted > bounds * (1.0 + 1e-9)))
        if violations:
            warnings.append(f"{violations} weights exceed the product of single-link values")
            logger.warning("⚠️ finiteness bound violated", violations=violations)
    if n_zero == accepted.size:
        warnings.append("NONTRIVIALITY: every weight is zero; the link pattern is not realizable")
        logger.warning("⚠️ all cascade weights vanished", links=pattern.to_string())
    if n_rejected:
        warnings.append(f"{n_rejected} samples rejected by chart failures")

    logger.info("📈 cascade estimate", value=value, std_error=std_error, n=n_samples, zero=n_zero, rejected=n_rejected)
    return PartitionEstimate(
        value=value,
        std_error=std_error,
        n_samples=n_samples,
        n_zero_weight=n_zero,
        n_rejected=n_rejected,
        max_weight=float(accepted.max()),
        tail_ratio=float(accepted.max() / total) if total > 0 else 0.0,
        bound_violations=violations,
        warnings=warnings,
        **common,
    )


# ---------------------------------------------------------------------------
# Martingale diagnostic
# ---------------------------------------------------------------------------

def _configuration_h(params, points, pairs, numerics: Numerics, inner_samples: int, seed: int) -> float:
    if len(pairs) <= 2:
        return h_half_plane(params, points, pairs)
    links = [(points[i], points[j]) for i, j in pairs]
    return estimate_H(params, links, inner_samples, numerics, seed, n_jobs=1).value


def _martingale_values(params, u, j0, times, numerics, seed, stream_index, inner_samples):
    n = len(u) // 2
    ia, ib = 2 * (j0 - 1), 2 * (j0 - 1) + 1
    tracked = [i for i in range(2 * n) if i not in (ia, ib)]
    pairs = [(2 * k, 2 * k + 1) for k in range(n)]
    sample = sample_two_point_driving(
        params, u[ia], u[ib], [u[i] for i in tracked], max(times), numerics.dt,
        RngStream(seed=seed, stream_index=stream_index), numerics, record_times=times,
    )
    values, alive = [], []
    for t in times:
        snap = sample.snapshot_at(t)
        alive.append(snap is not None)
        snap = snap or sample.last
        points = np.empty(2 * n)
        points[ia], points[ib] = snap.w, snap.v
        points[tracked] = snap.g
        m = float(np.prod(snap.g_prime ** params.b)) / h_one(params, snap.w, snap.v)
        values.append(m * _configuration_h(params, points, pairs, numerics, inner_samples, seed))
    return values, alive


def martingale_diag(
    params: KappaParams,
    u: Sequence[float],
    j0: int,
    times: Sequence[float],
    n_samples: int,
    numerics: Optional[Numerics] = None,
    seed: int = 0,
    inner_samples: int = 50,
    n_jobs: Optional[int] = None,
) -> MartingaleDiagnostic:
    """Averages of M at t ^ tau; stopped samples contribute their last value before tau"""
    u = [float(x) for x in u]
    n = len(u) // 2
    if len(u) != 2 * n or n == 0:
        raise PatternError("u must list 2N points")
    pattern = LinkPattern(links=[(u[2 * k], u[2 * k + 1]) for k in range(n)])
    if is_link_pattern(pattern) != LinkStatus.LP:
        raise PatternError("martingale diagnostic needs a realizable pattern")
    if not (1 <= j0 <= n):
        raise PatternError(f"driven link {j0} out of range", (j0,))
    times = [float(t) for t in times]
    if any(b <= a for a, b in zip(times, times[1:])) or times[0] < 0:
        raise DomainError("times must be nonnegative and increasing", {"times": times})
    numerics = numerics or Numerics()
    if max(times) > 0:
        numerics = numerics.model_copy(update={"t_max": max(times)})
    pairs = [(2 * k, 2 * k + 1) for k in range(n)]
    ia, ib = 2 * (j0 - 1), 2 * (j0 - 1) + 1
    m0 = _configuration_h(params, u, pairs, numerics, inner_samples, seed) / h_one(params, u[ia], u[ib])

    if n == 1:
        return MartingaleDiagnostic(times=times, means=[1.0] * len(times), std_errors=[0.0] * len(times),
                                    n_alive=[n_samples] * len(times), m0=1.0, n_samples=n_samples)

    n_jobs = numerics.n_jobs if n_jobs is None else n_jobs
    results = Parallel(n_jobs=n_jobs)(
        delayed(_martingale_values)(params, u, j0, times, numerics, seed, s, inner_samples) for s in range(n_samples)
    )
    values = np.array([r[0] for r in results])
    alive = np.array([r[1] for r in results])
    means, errors = [], []
    for k in range(len(times)):
        col = values[:, k]
        if np.all(col == col[0]):
            means.append(float(col[0]))
            errors.append(0.0)
        else:
            means.append(float(np.mean(col)))
            errors.append(float(np.std(col, ddof=1) / math.sqrt(col.size)))
    n_alive = [int(c) for c in alive.sum(axis=0)]
    for t, count in zip(times, n_alive):
        if count == 0:
            logger.warning("⚠️ every sample stopped before requested time", t=t)
    logger.info("📉 martingale diagnostic", m0=m0, means=means, n_alive=n_alive)
    return MartingaleDiagnostic(times=times, means=means, std_errors=errors, n_alive=n_alive, m0=m0,
                                n_samples=n_samples)


# ---------------------------------------------------------------------------
# PDE, asymptotics, avoidance, convergence
# ---------------------------------------------------------------------------

def pde_residual(
    params: KappaParams,
    x: Sequence[float],
    r: int = 1,
    h_step: float = 1e-4,
    relative: bool = False,
) -> float:
    """(k/2) d_r^2 H + sum_{j != r} (2/x_j d_j H - 2b/x_j^2 H) by central differences, x_r moved to 0"""
    x = np.asarray(x, dtype=float)
    n = x.size // 2
    if x.size != 2 * n or n == 0 or n > 2:
        raise DomainError("pde_residual evaluates closed forms only (one or two links)", {"n_points": int(x.size)})
    if not np.all(np.isfinite(x)):
        raise DomainError("pde_residual needs finite points")
    if not (1 <= r <= x.size):
        raise PatternError(f"driven index {r} out of range", (r,))
    x = x - x[r - 1]
    gaps = np.abs(x[:, None] - x[None, :])[np.triu_indices(x.size, 1)]
    if np.min(gaps) <= 2.0 * h_step:
        raise SpacingError("finite-difference stencil collides with another marked point",
                           {"h_step": h_step, "min_gap": float(np.min(gaps))})
    pairs = [(2 * k, 2 * k + 1) for k in range(n)]

    def value(shift_index: int = -1, amount: float = 0.0) -> float:
        pts = x.copy()
        if shift_index >= 0:
            pts[shift_index] += amount
        return h_half_plane(params, pts, pairs)

    i = r - 1
    h0 = value()
    terms = [0.5 * params.kappa * (value(i, h_step) - 2.0 * h0 + value(i, -h_step)) / h_step ** 2]
    for j in range(x.size):
        if j == i:
            continue
        dj = (value(j, h_step) - value(j, -h_step)) / (2.0 * h_step)
        terms.append(2.0 / x[j] * dj)
        terms.append(-2.0 * params.b / x[j] ** 2 * h0)
    residual = float(math.fsum(terms))
    if relative:
        scale = math.fsum(abs(t) for t in terms)
        return residual / scale if scale > 0 else 0.0
    return residual


def asymptotics_check(
    params: KappaParams,
    pattern: PatternLike,
    j: int,
    separations: Sequence[float],
    n_samples: int,
    numerics: Optional[Numerics] = None,
    seed: int = 0,
) -> List[dict]:
    """eps^(2b) H(pattern with link j at separation eps) / H(pattern without link j)

    Link j shrinks symmetrically about its midpoint; every estimate uses the same
    seed. The limit is 1 with the normalized two-link factor; rows also carry the
    raw limit G(1-).
    """
    pattern = as_pattern(pattern)
    numerics = numerics or Numerics()
    a, b = pattern.link(j)
    if math.isinf(a) or math.isinf(b):
        raise DomainError("the shrinking link needs finite endpoints", {"link": j})
    centre = 0.5 * (a + b)
    base = estimate_H(params, remove_link(pattern, j), n_samples, numerics, seed)
    rows = []
    for eps in separations:
        row = {"separation": float(eps), "target": 1.0, "g_limit_raw": g_limit(params.kappa),
               "base_value": base.value, "skipped": False}
        if eps < 10.0 * numerics.tol_geom:
            logger.warning("⚠️ separation below resolution, skipped", separation=eps)
            row.update(skipped=True, ratio=math.nan, std_error=math.nan)
            rows.append(row)
            continue
        links = list(pattern.links)
        links[j - 1] = (centre - 0.5 * eps, centre + 0.5 * eps)
        est = estimate_H(params, links, n_samples, numerics, seed)
        ratio = eps ** (2.0 * params.b) * est.value / base.value if base.value > 0 else math.nan
        rel = 0.0
        if est.value > 0:
            rel += (est.std_error / est.value) ** 2
        if base.value > 0:
            rel += (base.std_error / base.value) ** 2
        row.update(ratio=ratio, std_error=abs(ratio) * math.sqrt(rel), value=est.value)
        rows.append(row)
    return rows


def _avoidance_outcome(params, u, v, numerics, seed, stream_index) -> float:
    driving = sample_chordal_driving(params, numerics.t_max, numerics.dt, RngStream(seed=seed, stream_index=stream_index))
    chart = chart_from_driving(driving)
    flow = flow_boundary(chart, [u, v], numerics.eps_swallow_factor)
    if np.any(flow.hit):
        return 0.0
    gone = flow.swallowed
    if gone.all():
        return 1.0 if abs(flow.swallowed_at[1] - flow.swallowed_at[0]) <= numerics.tol_swallow else 0.0
    if gone.any():
        return 0.0
    w = chart.tip_driving
    return one_side_avoidance(params.kappa, flow.g[0] - w, flow.g[1] - w)


def avoidance_check(
    params: KappaParams,
    u: float,
    v: float,
    n_samples: int,
    numerics: Optional[Numerics] = None,
    seed: int = 0,
    n_jobs: Optional[int] = None,
) -> dict:
    """Frequency of a 0 -> inf chord avoiding [u, v] against the incomplete-beta formula

    Points still alive at t_max contribute their exact conditional probability.
    """
    numerics = numerics or Numerics()
    exact = one_side_avoidance(params.kappa, u, v)
    n_jobs = numerics.n_jobs if n_jobs is None else n_jobs
    outcomes = np.array(Parallel(n_jobs=n_jobs)(
        delayed(_avoidance_outcome)(params, u, v, numerics, seed, s) for s in range(n_samples)
    ))
    mean = float(np.mean(outcomes))
    se = float(np.std(outcomes, ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    z = (mean - exact) / se if se > 0 else 0.0
    return {"u": u, "v": v, "frequency": mean, "std_error": se, "exact": exact, "z_score": z, "n_samples": n_samples}


def convergence_table(
    params: KappaParams,
    pattern: PatternLike,
    dts: Sequence[float],
    n_samples: int,
    numerics: Optional[Numerics] = None,
    seed: int = 0,
    closed_form_max: int = 1,
) -> List[dict]:
    """estimate_H under successive dt; a row is flagged when it moves by more than 3 combined std errors"""
    numerics = numerics or Numerics()
    rows = []
    previous = None
    for dt in dts:
        est = estimate_H(params, pattern, n_samples, numerics.model_copy(update={"dt": float(dt)}), seed, closed_form_max)
        row = {"dt": float(dt), "value": est.value, "std_error": est.std_error, "n_rejected": est.n_rejected,
               "bias_flag": False}
        if previous is not None:
            spread = math.hypot(est.std_error, previous.std_error)
            row["bias_flag"] = bool(abs(est.value - previous.value) > 3.0 * spread)
        rows.append(row)
        previous = est
    return rows
