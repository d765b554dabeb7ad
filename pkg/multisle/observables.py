# observables.py - observable registry for ensemble comparisons

from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd
import structlog

from domain_algebra import LinkPattern, chart_for, initial_state, link_root, remove_curves
from errors import ChartFailure
from loewner_core import Trace, interior_sides, zip_polyline
from partition_mc import h_slit
from schemas import Numerics
from sle_sampling import mobius_to_chord
from special_fns import KappaParams

logger = structlog.get_logger(__name__)

CAPACITY_RADIUS = 2.0


def interior_grid(pattern: LinkPattern, n_points: int = 3) -> np.ndarray:
    """Fixed interior test points above the marked points"""
    pts = pattern.points[np.isfinite(pattern.points)]
    centre = float(pts.mean()) if pts.size else 0.0
    span = float(np.ptp(pts)) if pts.size > 1 else 1.0
    span = span or 1.0
    offsets = np.linspace(-0.5, 0.5, n_points) if n_points > 1 else np.zeros(1)
    return centre + span * offsets + 0.5j * span


def curve_features(trace: Trace, a: float, b: float, grid: np.ndarray) -> Dict[str, np.ndarray]:
    """Right-passage indicators at the grid and a capacity proxy, both in the curve's own 0 -> inf frame

    The capacity proxy is the capacity at which the zipped curve first leaves the
    disk of radius 2.
    """
    to_std = mobius_to_chord(a, b).inverse()
    std = to_std.apply(trace.points)
    std = std[np.isfinite(std)]
    std[0] = 0.0
    chart = zip_polyline(std, start=0.0)
    sides, _ = interior_sides(chart, to_std.apply(grid))
    outside = np.flatnonzero(np.abs(std[1:]) > CAPACITY_RADIUS)
    capacity = float(chart.capacities[outside[0]]) if outside.size else chart.total_capacity
    return {"right": (sides > 0).astype(float), "capacity": capacity}


def link_h_values(params: KappaParams, pattern: LinkPattern, traces: Sequence[Trace], numerics: Numerics) -> np.ndarray:
    """h of each link's component given the other curves; nan when the chart cannot be built"""
    values = np.full(pattern.n_links, np.nan)
    for j in range(pattern.n_links):
        try:
            state = remove_curves(initial_state(pattern, numerics), pattern, traces, skip=j)
            root, target = link_root(pattern, j)
            comp = state.component_of(root)
            if comp is None or target not in comp.members:
                values[j] = 0.0
                continue
            values[j] = h_slit(chart_for(state, comp.component_id), params, root, target, use_tail=False)
        except ChartFailure as exc:
            logger.warning("⚠️ observable chart failed", link=j + 1, reason=exc.message)
    return values


def observable_names(pattern: LinkPattern, n_grid: int = 3):
    names = []
    for k in range(1, pattern.n_links + 1):
        names += [f"right_passage[{k}][{p}]" for p in range(n_grid)]
        names.append(f"capacity[{k}]")
    names += [f"h_link[{k}]" for k in range(1, pattern.n_links + 1)]
    return names


def evaluate(
    params: KappaParams,
    pattern: LinkPattern,
    traces: Sequence[Trace],
    numerics: Numerics,
    grid: Optional[np.ndarray] = None,
    cache: Optional[dict] = None,
) -> Dict[str, float]:
    """Observable vector of one configuration of curves

    cache maps id(trace) to (trace, features) so unchanged curves of a Gibbs
    chain are not zipped again.
    """
    grid = interior_grid(pattern) if grid is None else grid
    out: Dict[str, float] = {name: np.nan for name in observable_names(pattern, grid.size)}
    if len(traces) != pattern.n_links:
        return out
    for k, trace in enumerate(traces):
        hit = cache.get(id(trace)) if cache is not None else None
        if hit is not None and hit[0] is trace:
            feats = hit[1]
        else:
            root, target = link_root(pattern, k)
            feats = curve_features(trace, pattern.points[root], pattern.points[target], grid)
            if cache is not None:
                cache[id(trace)] = (trace, feats)
        for p, value in enumerate(feats["right"]):
            out[f"right_passage[{k + 1}][{p}]"] = float(value)
        out[f"capacity[{k + 1}]"] = feats["capacity"]
    for k, value in enumerate(link_h_values(params, pattern, traces, numerics)):
        out[f"h_link[{k + 1}]"] = float(value)
    return out


def evaluate_many(params, pattern, configurations, numerics, grid=None) -> pd.DataFrame:
    grid = interior_grid(pattern) if grid is None else grid
    cache: dict = {}
    rows = [evaluate(params, pattern, traces, numerics, grid, cache) for traces in configurations]
    return pd.DataFrame(rows, columns=observable_names(pattern, grid.size))
