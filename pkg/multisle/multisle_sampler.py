# multisle_sampler.py - weighted cascade ensembles, SIR resampling and the Gibbs chain

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog
from shapely.geometry import LineString

import observables
from domain_algebra import (
    LinkPattern,
    geodesic_trace,
    initial_state,
    is_link_pattern,
    link_root,
    remove_curves,
    tube_rectangles,
)
from errors import ChartFailure, GeometryError, NontrivialityError, PatternError
from exports import read_json, write_csv, write_json
from loewner_core import Trace
from partition_mc import _chord_in, chord_trace, run_cascade
from schemas import VERSION, ComparisonReport, LinkStatus, Numerics, ObservableComparison
from settings import settings
from sle_sampling import RngStream, rng_generator
from special_fns import KappaParams, kappa_params

logger = structlog.get_logger(__name__)

_SIR_KEY = 1 << 30
_CHOICE_SUB = 2


@dataclass(frozen=True, eq=False)
class WeightedMember:
    traces: Tuple[Trace, ...]
    weight: float
    rejected: bool = False
    stream_index: int = -1
    capacities: Tuple[float, ...] = ()
    closeness: Tuple[float, ...] = ()


@dataclass(frozen=True, eq=False)
class WeightedEnsemble:
    """Members with weights; kind is weighted, resampled or chain"""

    members: Tuple[WeightedMember, ...]
    params: KappaParams
    pattern: LinkPattern
    seed: int
    numerics: Numerics
    kind: str = "weighted"
    observables: Optional[pd.DataFrame] = None

    def __len__(self) -> int:
        return len(self.members)

    @property
    def weights(self) -> np.ndarray:
        return np.array([0.0 if m.rejected else m.weight for m in self.members], dtype=float)

    @property
    def n_rejected(self) -> int:
        return sum(1 for m in self.members if m.rejected)

    def effective_sample_size(self) -> float:
        return effective_sample_size(self.weights)


def effective_sample_size(weights: Sequence[float]) -> float:
    """(sum w)^2 / sum w^2"""
    w = np.asarray(weights, dtype=float)
    total = float(np.sum(w))
    squares = float(np.sum(w * w))
    return total * total / squares if squares > 0 else 0.0


def sample_cascade(
    params: KappaParams,
    pattern: LinkPattern,
    n: int,
    numerics: Optional[Numerics] = None,
    seed: int = 0,
    n_jobs: Optional[int] = None,
) -> WeightedEnsemble:
    """n weighted draws: each link sampled in its component after the earlier ones, weight = product of h-values"""
    numerics = numerics or Numerics()
    is_link_pattern(pattern)
    cascade = run_cascade(params, pattern, n, numerics, seed, sample_all=True, n_jobs=n_jobs)
    members = tuple(
        WeightedMember(c.traces, c.weight, c.rejected, c.stream_index, c.capacities, c.closeness) for c in cascade
    )
    ensemble = WeightedEnsemble(members, params, pattern, seed, numerics)
    logger.info(
        "🎲 cascade ensemble sampled",
        n=n,
        rejected=ensemble.n_rejected,
        zero=int(np.count_nonzero(ensemble.weights == 0)),
        ess=ensemble.effective_sample_size(),
    )
    return ensemble


def resample_sir(ensemble: WeightedEnsemble, m: int, seed: int) -> WeightedEnsemble:
    """m draws with replacement, probability proportional to weight; output weights are 1"""
    weights = ensemble.weights
    total = float(np.sum(weights))
    if not total > 0:
        raise NontrivialityError("total weight is zero; the link pattern is not realizable",
                                 {"links": ensemble.pattern.to_string()})
    gen = rng_generator(seed, 0, 0, (_SIR_KEY,))
    picks = gen.choice(len(weights), size=m, replace=True, p=weights / total)
    members = tuple(
        WeightedMember(ensemble.members[i].traces, 1.0, False, ensemble.members[i].stream_index,
                       ensemble.members[i].capacities, ensemble.members[i].closeness)
        for i in picks
    )
    logger.info("🔁 SIR resampling", m=m, distinct=int(np.unique(picks).size), ess=effective_sample_size(weights))
    return WeightedEnsemble(members, ensemble.params, ensemble.pattern, ensemble.seed, ensemble.numerics, "resampled")


# ---------------------------------------------------------------------------
# Gibbs chain
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GibbsState:
    traces: Tuple[Trace, ...]
    pattern: LinkPattern
    step_count: int = 0
    seed: int = 0
    stream_index: int = 0
    n_failures: int = 0
    last_link: int = -1


def gibbs_init(pattern: LinkPattern, seed: int = 0, stream_index: int = 0) -> GibbsState:
    """Every curve on its link's hyperbolic geodesic, inside the link's tube"""
    if is_link_pattern(pattern) != LinkStatus.LP:
        raise PatternError("the Gibbs chain needs a realizable link pattern")
    tubes = tube_rectangles(pattern)
    traces = []
    for k, tube in enumerate(tubes):
        root, target = link_root(pattern, k)
        trace = geodesic_trace(pattern.points[root], pattern.points[target])
        pts = trace.points[np.isfinite(trace.points)]
        visible = LineString(np.column_stack([pts.real, pts.imag])).intersection(tube.envelope)
        if not tube.buffer(1e-9 * max(1.0, tube.length)).covers(visible):
            raise GeometryError("initial curve leaves its tube", {"link": k + 1})
        traces.append(trace)
    logger.debug("🧵 Gibbs chain initialised on geodesics", n_links=pattern.n_links)
    return GibbsState(tuple(traces), pattern, 0, seed, stream_index)


def validate_state(pattern: LinkPattern, traces: Sequence[Trace], numerics: Optional[Numerics] = None) -> bool:
    """Every link's endpoints share a component of the complement of the other curves"""
    numerics = numerics or Numerics()
    if len(traces) != pattern.n_links:
        return False
    for j in range(pattern.n_links):
        try:
            state = remove_curves(initial_state(pattern, numerics), pattern, traces, skip=j)
        except ChartFailure:
            return False
        root, target = link_root(pattern, j)
        if not state.same_component(root, target):
            return False
    return True


def _resample_link(params, pattern, traces, j, numerics, stream) -> Trace:
    state = remove_curves(initial_state(pattern, numerics), pattern, traces, skip=j)
    root, target = link_root(pattern, j)
    comp = state.component_of(root)
    if comp is None or target not in comp.members:
        raise ChartFailure("link endpoints separated by the other curves", {"link": j + 1})
    chart, chord, endpoints = _chord_in(params, state, comp.component_id, root, target, numerics, stream)
    trace = chord_trace(chart, chord, pattern.points[root], numerics.max_trace_points)
    if chart.accuracy > settings.chart_accuracy_threshold:
        trace = trace.with_warning(f"chart accuracy {chart.accuracy:.3g}")
    return trace


def gibbs_step(
    params: KappaParams,
    pattern: LinkPattern,
    state: GibbsState,
    numerics: Optional[Numerics] = None,
    retry_budget: Optional[int] = None,
) -> GibbsState:
    """Pick j uniformly and resample curve j in the complement of the others

    Chart failures and proposals whose curves no longer leave every link's
    endpoints connected retry with a fresh j; the input state is never modified.
    """
    numerics = numerics or Numerics()
    budget = retry_budget or settings.retry_budget
    stream = RngStream(seed=state.seed, stream_index=state.stream_index, path=(state.step_count,))
    failures = 0
    for attempt in range(budget):
        sub = stream.child(attempt)
        j = int(sub.generator(_CHOICE_SUB).integers(pattern.n_links))
        try:
            trace = _resample_link(params, pattern, state.traces, j, numerics, sub)
        except ChartFailure as exc:
            failures += 1
            logger.warning("⚠️ gibbs step retry", step=state.step_count, link=j + 1, reason=exc.message)
            continue
        traces = list(state.traces)
        traces[j] = trace
        if not validate_state(pattern, traces, numerics):
            failures += 1
            logger.warning("⚠️ gibbs step retry", step=state.step_count, link=j + 1,
                           reason="proposal separates a link")
            continue
        return GibbsState(tuple(traces), pattern, state.step_count + 1, state.seed, state.stream_index,
                          state.n_failures + failures, j)
    raise ChartFailure("gibbs step exhausted its retry budget", {"step": state.step_count, "budget": budget})


@dataclass(frozen=True, eq=False)
class GibbsRun:
    final: GibbsState
    ensemble: WeightedEnsemble
    observables: pd.DataFrame
    n_failures: int
    autocorrelation_times: Dict[str, float] = field(default_factory=dict)


def gibbs_run(
    params: KappaParams,
    pattern: LinkPattern,
    init: Optional[GibbsState],
    n_steps: int,
    burn_in: int = 0,
    thin: int = 1,
    numerics: Optional[Numerics] = None,
    seed: int = 0,
    record: bool = True,
) -> GibbsRun:
    """Iterate gibbs_step; states after burn_in, every thin-th, are retained with their observables"""
    numerics = numerics or Numerics()
    state = init or gibbs_init(pattern, seed)
    grid = observables.interior_grid(pattern)
    cache: dict = {}
    retained: List[GibbsState] = []
    rows = []

    def keep(s: GibbsState) -> None:
        retained.append(s)
        if record:
            row = observables.evaluate(params, pattern, s.traces, numerics, grid, cache)
            row["step"] = s.step_count
            rows.append(row)
            live = {id(t) for t in s.traces}
            for key in [k for k in cache if k not in live]:
                del cache[key]

    if n_steps == 0:
        keep(state)
    for step in range(n_steps):
        state = gibbs_step(params, pattern, state, numerics)
        if step + 1 > burn_in and (step + 1 - burn_in) % thin == 0:
            keep(state)
        if (step + 1) % 100 == 0:
            logger.info("🔗 gibbs progress", step=step + 1, retained=len(retained), failures=state.n_failures)

    frame = pd.DataFrame(rows)
    members = tuple(WeightedMember(s.traces, 1.0, stream_index=s.step_count) for s in retained)
    table = frame.drop(columns=["step"]) if "step" in frame else frame
    ensemble = WeightedEnsemble(members, params, pattern, seed, numerics, "chain", table if record else None)
    taus = {c: integrated_autocorrelation_time(table[c].to_numpy()) for c in table.columns} if record else {}
    return GibbsRun(state, ensemble, frame, state.n_failures, taus)


# ---------------------------------------------------------------------------
# Chain diagnostics
# ---------------------------------------------------------------------------

def autocorrelation(x: Sequence[float], max_lag: Optional[int] = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    x = x[np.isfinite(x)]
    n = x.size
    max_lag = min(n - 1, max_lag if max_lag is not None else n // 2)
    if n < 2:
        return np.ones(1)
    d = x - x.mean()
    var = float(np.dot(d, d)) / n
    if var == 0:
        return np.concatenate([[1.0], np.zeros(max(0, max_lag))])
    return np.array([float(np.dot(d[: n - k], d[k:])) / (n * var) for k in range(max_lag + 1)])


def integrated_autocorrelation_time(x: Sequence[float]) -> float:
    """1 + 2 sum of autocorrelations up to the first non-positive lag"""
    rho = autocorrelation(x)
    tau = 1.0
    for value in rho[1:]:
        if value <= 0:
            break
        tau += 2.0 * value
    return tau


def batch_means_se(x: Sequence[float], n_batches: int = 20) -> float:
    x = np.asarray(x, dtype=float)
    x = x[np.isfinite(x)]
    size = x.size // n_batches
    if size < 1:
        return float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    means = x[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(np.std(means, ddof=1) / math.sqrt(n_batches))


# ---------------------------------------------------------------------------
# Comparison
# ---------------------------------------------------------------------------

def ensemble_observables(ensemble: WeightedEnsemble) -> pd.DataFrame:
    """Observable table with a weight column; zero-weight and rejected members dropped"""
    if ensemble.observables is not None:
        table = ensemble.observables.copy()
        table["weight"] = ensemble.weights[: len(table)]
        return table
    keep = [m for m in ensemble.members if not m.rejected and m.weight > 0]
    table = observables.evaluate_many(ensemble.params, ensemble.pattern, [m.traces for m in keep], ensemble.numerics)
    table["weight"] = [m.weight for m in keep]
    return table


def _summary(values: np.ndarray, weights: np.ndarray, kind: str) -> Tuple[float, float]:
    ok = np.isfinite(values) & (weights > 0)
    values, weights = values[ok], weights[ok]
    if values.size == 0:
        return math.nan, math.nan
    if kind == "weighted":
        total = float(np.sum(weights))
        mean = float(np.sum(weights * values) / total)
        se = float(math.sqrt(np.sum(weights ** 2 * (values - mean) ** 2)) / total)
        return mean, se
    mean = float(np.mean(values))
    if kind == "chain":
        return mean, batch_means_se(values)
    return mean, float(np.std(values, ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0


def compare_ensembles(
    e1: WeightedEnsemble,
    e2: WeightedEnsemble,
    names: Optional[Sequence[str]] = None,
    threshold: float = 3.0,
) -> ComparisonReport:
    """Per-observable means, standard errors and z-scores; passes when every |z| <= threshold"""
    if e1.pattern != e2.pattern or e1.params.kappa != e2.params.kappa:
        raise PatternError("ensembles belong to different patterns or kappa")
    t1 = ensemble_observables(e1)
    t2 = ensemble_observables(e2) if e2 is not e1 else t1
    names = list(names) if names is not None else [c for c in t1.columns if c != "weight"]
    rows = []
    for name in names:
        m1, s1 = _summary(t1[name].to_numpy(dtype=float), t1["weight"].to_numpy(dtype=float), e1.kind)
        m2, s2 = _summary(t2[name].to_numpy(dtype=float), t2["weight"].to_numpy(dtype=float), e2.kind)
        spread = math.hypot(s1, s2)
        if m1 == m2:
            z = 0.0
        elif spread > 0:
            z = (m1 - m2) / spread
        else:
            z = math.inf if np.isfinite(m1) and np.isfinite(m2) else math.nan
        rows.append(ObservableComparison(name=name, mean_1=m1, std_error_1=s1, mean_2=m2, std_error_2=s2, z_score=z))
    finite = [abs(r.z_score) for r in rows if not math.isnan(r.z_score)]
    passed = all(z <= threshold for z in finite)
    note = (f"{len(rows)} observables tested at |z| <= {threshold:g}; about "
            f"{len(rows) * 0.0027:.2f} false alarms expected under agreement")
    logger.info("⚖️ ensembles compared", passed=passed, max_abs_z=max(finite, default=0.0))
    return ComparisonReport(rows=rows, threshold=threshold, passed=passed, note=note)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def save_ensemble(ensemble: WeightedEnsemble, out_dir, config=None) -> Path:
    """manifest.json plus one CSV per member curve"""
    out_dir = Path(out_dir)
    records = []
    for i, member in enumerate(ensemble.members):
        files = []
        for k, trace in enumerate(member.traces):
            name = f"member_{i:05d}_curve_{k + 1}.csv"
            write_csv(trace.to_frame(), out_dir / name)
            files.append(name)
        records.append({
            "stream_index": member.stream_index,
            "weight": member.weight,
            "rejected": member.rejected,
            "capacities": list(member.capacities),
            "closeness": list(member.closeness),
            "files": files,
        })
    manifest = {
        "version": VERSION,
        "kind": ensemble.kind,
        "kappa": ensemble.params.kappa,
        "links": ensemble.pattern.to_string(),
        "seed": ensemble.seed,
        "numerics": ensemble.numerics.model_dump(mode="json"),
        "config": config.model_dump(mode="json") if config is not None else None,
        "members": records,
    }
    return write_json(manifest, out_dir / "manifest.json")


def load_ensemble(out_dir) -> WeightedEnsemble:
    out_dir = Path(out_dir)
    manifest = read_json(out_dir / "manifest.json")
    members = []
    for record in manifest["members"]:
        traces = tuple(Trace.from_frame(pd.read_csv(out_dir / name)) for name in record["files"])
        members.append(WeightedMember(
            traces, float(record["weight"]), bool(record["rejected"]), int(record["stream_index"]),
            tuple(record["capacities"]), tuple(record["closeness"]),
        ))
    return WeightedEnsemble(
        tuple(members),
        kappa_params(manifest["kappa"]),
        LinkPattern.from_string(manifest["links"]),
        int(manifest["seed"]),
        Numerics(**manifest["numerics"]),
        manifest["kind"],
    )


def replay_ensemble(out_dir, n_jobs: Optional[int] = None) -> WeightedEnsemble:
    """Regenerate a weighted cascade ensemble from its manifest alone"""
    manifest = read_json(Path(out_dir) / "manifest.json")
    return sample_cascade(
        kappa_params(manifest["kappa"]),
        LinkPattern.from_string(manifest["links"]),
        len(manifest["members"]),
        Numerics(**manifest["numerics"]),
        int(manifest["seed"]),
        n_jobs,
    )
