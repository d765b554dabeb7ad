# domain_algebra.py - link patterns, components of H minus removed curves, conformal charts of components

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, field_serializer, field_validator
from shapely.geometry import LineString, Point, Polygon
from shapely.geometry.polygon import orient
from shapely.ops import polygonize, unary_union

from errors import ChartFailure, GeometryError, PatternError
from loewner_core import (
    LoewnerChart,
    Trace,
    apply_chart,
    extract_trace,
    flow_boundary,
    invert_chart,
    zip_polyline,
)
from schemas import ComponentKind, LinkStatus, Numerics, format_endpoint, format_links, parse_endpoint, parse_links
from sle_sampling import ChordSample, MobiusMap, frame_scale, mobius_to_chord
from zipper import ZipperChart, zipper_uniformize

logger = structlog.get_logger(__name__)


# ---------------------------------------------------------------------------
# Link patterns
# ---------------------------------------------------------------------------

class LinkPattern(BaseModel):
    """N pairs of boundary points of H; inf is the boundary point at infinity"""

    model_config = ConfigDict(frozen=True)

    links: Tuple[Tuple[float, float], ...]
    domain_id: str = "H"

    @field_validator("links", mode="before")
    @classmethod
    def parse_link_field(cls, v):
        if isinstance(v, str):
            v = parse_links(v)
        return tuple((parse_endpoint(a), parse_endpoint(b)) for a, b in v)

    @field_serializer("links")
    def serialize_links(self, links):
        return [[format_endpoint(a), format_endpoint(b)] for a, b in links]

    @classmethod
    def from_string(cls, text: str) -> "LinkPattern":
        return cls(links=parse_links(text))

    def to_string(self) -> str:
        return format_links(self.links)

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def points(self) -> np.ndarray:
        """Marked points in link order: a_1, b_1, a_2, b_2, ..."""
        return np.array([x for link in self.links for x in link], dtype=float)

    def link(self, j: int) -> Tuple[float, float]:
        """1-based, as links are numbered"""
        _check_index(j, self.n_links)
        return self.links[j - 1]

    def mapped(self, scale: float = 1.0, shift: float = 0.0) -> "LinkPattern":
        """Image under z -> scale * z + shift (scale > 0)"""
        if scale <= 0:
            raise PatternError("affine image needs a positive scale")
        move = lambda x: x if math.isinf(x) else scale * x + shift
        return LinkPattern(links=tuple((move(a), move(b)) for a, b in self.links), domain_id=self.domain_id)


def _check_index(j: int, n: int) -> None:
    if not (1 <= j <= n):
        raise PatternError(f"link index {j} out of range 1..{n}", (j,))


def coincident_indices(pattern: LinkPattern) -> List[int]:
    pts = pattern.points
    bad = []
    for i in range(pts.size):
        if np.count_nonzero(pts == pts[i]) > 1:
            bad.append(i)
    return bad


def _circle_order(pts: np.ndarray) -> np.ndarray:
    """Position of each point on R closed through infinity"""
    return np.where(np.isinf(pts), np.inf, pts)


def pairing_noncrossing(pts: Sequence[float], pairs: Sequence[Tuple[int, int]]) -> bool:
    """A pairing of points on the circle R u {inf} is noncrossing iff no two chords interleave"""
    pos = _circle_order(np.asarray(pts, dtype=float))
    for k, (i, j) in enumerate(pairs):
        lo, hi = sorted((pos[i], pos[j]))
        for m, n in pairs[k + 1:]:
            inside_m = lo < pos[m] < hi
            inside_n = lo < pos[n] < hi
            if inside_m != inside_n:
                return False
    return True


def link_status(pattern: LinkPattern) -> LinkStatus:
    if coincident_indices(pattern):
        return LinkStatus.INVALID
    pairs = [(2 * k, 2 * k + 1) for k in range(pattern.n_links)]
    return LinkStatus.LP if pairing_noncrossing(pattern.points, pairs) else LinkStatus.CLP_ONLY


def is_link_pattern(pattern: LinkPattern) -> LinkStatus:
    """LP or CLP_ONLY; coincident points raise PatternError naming the indices"""
    bad = coincident_indices(pattern)
    if bad:
        raise PatternError("link pattern has coincident points", bad)
    return link_status(pattern)


def remove_link(pattern: LinkPattern, j: int) -> LinkPattern:
    _check_index(j, pattern.n_links)
    links = pattern.links[: j - 1] + pattern.links[j:]
    return LinkPattern(links=links, domain_id=pattern.domain_id)


def permute(pattern: LinkPattern, sigma: Sequence[int]) -> LinkPattern:
    """sigma(x)_i = x_{sigma^{-1}(i)}; sigma is 1-based, sigma[i-1] = sigma(i)"""
    sigma = list(sigma)
    n = pattern.n_links
    if sorted(sigma) != list(range(1, n + 1)):
        raise PatternError(f"not a permutation of 1..{n}: {sigma}", sigma)
    links = [None] * n
    for i, target in enumerate(sigma):
        links[target - 1] = pattern.links[i]
    return LinkPattern(links=tuple(links), domain_id=pattern.domain_id)


def compose_permutations(first: Sequence[int], second: Sequence[int]) -> List[int]:
    """(first second)(i) = first(second(i))"""
    if len(first) != len(second):
        raise PatternError("permutations of different sizes")
    return [first[s - 1] for s in second]


def cycle_to_end(j: int, n: int) -> List[int]:
    """The cycle sending j to n and shifting j+1..n down by one"""
    _check_index(j, n)
    sigma = list(range(1, n + 1))
    sigma[j - 1] = n
    for i in range(j + 1, n + 1):
        sigma[i - 1] = i - 1
    return sigma


def cross_ratio_points(a1: float, b1: float, a2: float, b2: float) -> float:
    """x/y after mapping a1 -> 0 and b1 -> inf, folded into (0, 1); negative for crossing links"""
    pts = np.array([a1, b1, a2, b2], dtype=float)
    if np.any(np.isinf(pts)):
        s = float(np.min(pts[np.isfinite(pts)])) - 1.0
        pts = np.where(np.isinf(pts), 0.0, -1.0 / (pts - s))
    a1, b1, a2, b2 = pts
    r = ((a2 - a1) * (b2 - b1)) / ((a2 - b1) * (b2 - a1))
    return 1.0 / r if r > 1.0 else float(r)


# ---------------------------------------------------------------------------
# Chart stages
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MobiusStage:
    mobius: MobiusMap

    def forward(self, z):
        return self.mobius.apply(z)

    def inverse(self, w):
        return self.mobius.inverse().apply(w)


@dataclass(frozen=True)
class LoewnerStage:
    chart: LoewnerChart

    def forward(self, z):
        return apply_chart(self.chart, z)

    def inverse(self, w):
        return invert_chart(self.chart, w)


@dataclass(frozen=True)
class SquareStage:
    """Quadrant on one side of the vertical ray from drive onto H: side * (z - drive)^2"""

    drive: float
    side: float

    def forward(self, z):
        d = np.asarray(z, dtype=complex) - self.drive
        return self.side * d * d

    def inverse(self, w):
        w = np.asarray(w, dtype=complex)
        if self.side > 0:
            return self.drive + np.sqrt(w)
        return self.drive - np.sqrt(-w)


@dataclass(frozen=True)
class ZipperStage:
    chart: ZipperChart

    def forward(self, z):
        return self.chart.forward(z)

    def inverse(self, w):
        return self.chart.inverse(w)


@dataclass(frozen=True, eq=False)
class ComponentChart:
    """Conformal map of a component onto H with images and |derivatives| of its marked points

    stages run from the ambient half-plane to the component's half-plane. When the
    component was cut out by a truncated chord the tail_* fields keep the marked
    points in the g_T frame, where the unexplored part of the chord starts at
    tail_drive; weights use that frame, geometry uses images.
    """

    members: Tuple[int, ...]
    images: np.ndarray
    derivatives: np.ndarray
    stages: Tuple[Any, ...] = ()
    accuracy: float = 0.0
    tail_drive: Optional[float] = None
    tail_images: Optional[np.ndarray] = None
    tail_derivatives: Optional[np.ndarray] = None
    warnings: Tuple[str, ...] = ()

    @classmethod
    def identity(cls, members: Sequence[int], points: Sequence[float]) -> "ComponentChart":
        points = np.asarray(points, dtype=float)
        return cls(members=tuple(members), images=points.copy(), derivatives=np.ones_like(points))

    @property
    def has_tail(self) -> bool:
        return self.tail_drive is not None

    def position(self, member: int) -> int:
        try:
            return self.members.index(member)
        except ValueError:
            raise PatternError(f"marked point {member} is not in this component", (member,)) from None

    def image(self, member: int) -> float:
        return float(self.images[self.position(member)])

    def derivative(self, member: int) -> float:
        return float(self.derivatives[self.position(member)])

    def weight_frame(self, members: Sequence[int], use_tail: bool = True):
        """(images, derivatives, tail_drive or None) of the given members"""
        idx = [self.position(m) for m in members]
        if use_tail and self.has_tail:
            return self.tail_images[idx], self.tail_derivatives[idx], self.tail_drive
        return self.images[idx], self.derivatives[idx], None

    def from_original(self, z):
        out = np.atleast_1d(np.asarray(z, dtype=complex))
        for stage in self.stages:
            out = np.atleast_1d(stage.forward(out))
        return out

    def to_original(self, w):
        out = np.atleast_1d(np.asarray(w, dtype=complex))
        for stage in reversed(self.stages):
            out = np.atleast_1d(stage.inverse(out))
        return out


# ---------------------------------------------------------------------------
# Domain state
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PocketSource:
    """Everything needed to build a pocket chart later"""

    parent: ComponentChart
    mobius: MobiusMap          # standard frame -> parent frame
    chord_chart: LoewnerChart  # the removed curve in the standard frame
    step: int                  # swallowing step of the pocket
    std_images: np.ndarray     # members in the standard frame
    std_derivatives: np.ndarray


@dataclass(frozen=True, eq=False)
class Component:
    component_id: str
    kind: ComponentKind
    members: Tuple[int, ...]
    chart: Optional[ComponentChart] = None
    swallowed_at: float = math.inf
    ambiguous: bool = False
    pocket: Optional[PocketSource] = None


@dataclass(frozen=True, eq=False)
class DomainState:
    """H minus removed curves: marked points partitioned into components, or consumed"""

    points: np.ndarray
    components: Tuple[Component, ...]
    removed: Tuple[Trace, ...] = ()
    consumed: Tuple[int, ...] = ()
    numerics: Numerics = field(default_factory=Numerics)
    _charts: Dict[str, ComponentChart] = field(default_factory=dict, compare=False, repr=False)

    def component(self, component_id: str) -> Component:
        for comp in self.components:
            if comp.component_id == component_id:
                return comp
        raise KeyError(component_id)

    def component_of(self, member: int) -> Optional[Component]:
        for comp in self.components:
            if member in comp.members:
                return comp
        return None

    def same_component(self, first: int, second: int) -> bool:
        comp = self.component_of(first)
        return comp is not None and second in comp.members


def initial_state(pattern, numerics: Optional[Numerics] = None) -> DomainState:
    """One root component holding every marked point, identity chart"""
    points = pattern.points if isinstance(pattern, LinkPattern) else np.asarray(pattern, dtype=float)
    members = tuple(range(points.size))
    root = Component("0", ComponentKind.ROOT, members, ComponentChart.identity(members, points))
    return DomainState(points=points, components=(root,), numerics=numerics or Numerics())


def components_of(pattern: LinkPattern) -> Dict[int, str]:
    """Link index (1-based) -> component id in the initial state"""
    state = initial_state(pattern)
    return {j: state.component_of(2 * (j - 1)).component_id for j in range(1, pattern.n_links + 1)}


def _group_swallowed(tau: np.ndarray, tol: float) -> Tuple[List[List[int]], List[bool]]:
    """Cluster indices by swallowing capacity; flags groups whose neighbour lies within 2*tol"""
    order = np.argsort(tau, kind="stable")
    groups: List[List[int]] = []
    for i in order:
        if groups and tau[i] - tau[groups[-1][-1]] <= tol:
            groups[-1].append(int(i))
        else:
            groups.append([int(i)])
    ambiguous = [False] * len(groups)
    for g in range(1, len(groups)):
        if tau[groups[g][0]] - tau[groups[g - 1][-1]] <= 2.0 * tol:
            ambiguous[g] = ambiguous[g - 1] = True
    return groups, ambiguous


def _split(
    state: DomainState,
    component_id: str,
    mobius: Optional[MobiusMap],
    chord_chart: LoewnerChart,
    endpoints: Sequence[int],
    trace: Optional[Trace],
    marked: Optional[Iterable[int]] = None,
) -> DomainState:
    numerics = state.numerics
    comp = state.component(component_id)
    parent = chart_for(state, component_id)
    others = [m for m in comp.members if m not in endpoints and (marked is None or m in marked)]
    hull = mobius is None
    to_std = MobiusMap.identity() if hull else mobius.inverse()

    jets = [to_std.boundary_jet(parent.image(m)) for m in others]
    y = np.array([j[0] for j in jets], dtype=float)
    d_std = np.array([parent.derivative(m) * j[1] for m, j in zip(others, jets)], dtype=float)
    flow = flow_boundary(chord_chart, y, numerics.eps_swallow_factor)
    start = chord_chart.start if not np.isnan(chord_chart.start) else 0.0
    side = np.sign(y - start)
    w_t = chord_chart.tip_driving if len(chord_chart) else start

    base = parent.stages if hull else parent.stages + (MobiusStage(to_std),)
    base = base + (LoewnerStage(chord_chart),)
    alive = ~flow.swallowed
    new_components: List[Component] = []
    keep = [c for c in state.components if c.component_id != component_id]

    if hull:
        sel = np.flatnonzero(alive)
        if sel.size:
            g = flow.g[sel]
            gp = d_std[sel] * flow.g_prime[sel]
            chart = ComponentChart(tuple(others[i] for i in sel), g, gp, base, parent.accuracy)
            new_components.append(Component(f"{component_id}.H", ComponentKind.HULL, chart.members, chart))
    else:
        for sgn, kind, tag in ((-1.0, ComponentKind.LEFT, "L"), (1.0, ComponentKind.RIGHT, "R")):
            sel = np.flatnonzero(alive & (side == sgn))
            if not sel.size:
                continue
            g = flow.g[sel]
            gp = d_std[sel] * flow.g_prime[sel]
            d = g - w_t
            chart = ComponentChart(
                members=tuple(others[i] for i in sel),
                images=sgn * d * d,
                derivatives=gp * 2.0 * np.abs(d),
                stages=base + (SquareStage(w_t, sgn),),
                accuracy=parent.accuracy,
                tail_drive=w_t,
                tail_images=g,
                tail_derivatives=gp,
            )
            new_components.append(Component(f"{component_id}.{tag}", kind, chart.members, chart))

    consumed = tuple(others[i] for i in np.flatnonzero(flow.hit))
    enclosed = np.flatnonzero(flow.swallowed & ~flow.hit)
    n_pocket = 0
    for sgn in (-1.0, 1.0):
        idx = enclosed[side[enclosed] == sgn]
        if not idx.size:
            continue
        groups, ambiguous = _group_swallowed(flow.swallowed_at[idx], numerics.tol_swallow)
        for group, amb in zip(groups, ambiguous):
            sel = idx[group]
            source = PocketSource(
                parent=parent,
                mobius=to_std.inverse(),
                chord_chart=chord_chart,
                step=int(np.max(flow.swallow_step[sel])),
                std_images=y[sel],
                std_derivatives=d_std[sel],
            )
            members = tuple(others[i] for i in sel)
            new_components.append(
                Component(
                    f"{component_id}.P{n_pocket}",
                    ComponentKind.POCKET,
                    members,
                    None,
                    float(np.min(flow.swallowed_at[sel])),
                    amb,
                    source,
                )
            )
            n_pocket += 1
            if amb:
                logger.warning("⚠️ pocket classification ambiguous", component=component_id, members=list(members))

    removed = state.removed + ((trace,) if trace is not None else ())
    logger.debug(
        "✂️ component split",
        component=component_id,
        survivors=int(alive.sum()),
        pockets=n_pocket,
        consumed=len(consumed),
    )
    return DomainState(
        points=state.points,
        components=tuple(keep + new_components),
        removed=removed,
        consumed=state.consumed + consumed,
        numerics=numerics,
    )


def split_by_chord(
    state: DomainState,
    component_id: str,
    chord: ChordSample,
    endpoints: Tuple[int, int],
    trace: Optional[Trace] = None,
) -> DomainState:
    """Remove a chord sampled between two members of a component"""
    return _split(state, component_id, chord.mobius, chord.chart, endpoints, trace)


def component_split(
    state: DomainState,
    trace: Trace,
    marked: Optional[Iterable[int]] = None,
    endpoints: Tuple[Optional[int], Optional[int]] = (None, None),
    component_id: Optional[str] = None,
) -> DomainState:
    """Remove a curve given as a polyline in original coordinates

    endpoints names the members the curve joins; with no target the curve is
    treated as a hull growing from its first point (e.g. a slit) and the survivors
    stay in a single component. The polyline is zipped in the component's chart.
    """
    source, target = endpoints
    if component_id is None:
        comp = state.component_of(source) if source is not None else state.components[0]
        if comp is None:
            raise PatternError("curve starts at a consumed point", (source,))
        component_id = comp.component_id
    chart = chart_for(state, component_id)
    frame = chart.from_original(trace.points)
    frame = frame[np.isfinite(frame)]
    x_a = chart.image(source) if source is not None else float(frame[0].real)
    frame[0] = x_a

    if target is None:
        chord_chart = zip_polyline(frame, start=x_a)
        return _split(state, component_id, None, chord_chart, (source,), trace, marked)

    x_b = chart.image(target)
    others = [chart.image(m) for m in chart.members if m not in (source, target)]
    mobius = mobius_to_chord(x_a, x_b, frame_scale(x_a, x_b, others))
    std = mobius.inverse().apply(frame)
    std = std[np.isfinite(std)]
    std[0] = 0.0
    chord_chart = zip_polyline(std, start=0.0)
    return _split(state, component_id, mobius, chord_chart, (source, target), trace, marked)


# ---------------------------------------------------------------------------
# Pocket charts
# ---------------------------------------------------------------------------

def _pocket_polygon(source: PocketSource, numerics: Numerics) -> np.ndarray:
    """Boundary of the pocket face in the standard frame, base edge on R first"""
    chart = source.chord_chart.truncate(source.step + 1)
    stride = max(1, int(math.ceil(len(chart) / numerics.max_trace_points)))
    pts = extract_trace(chart, stride).points
    drop = 2.5 * math.sqrt(float(np.max(chart.dts))) if len(chart) else 0.0
    ys = source.std_images
    lo = min(float(pts.real.min()), float(ys.min())) - 1.0
    hi = max(float(pts.real.max()), float(ys.max())) + 1.0

    lines = [LineString([(lo, 0.0), (hi, 0.0)])]
    if pts.size >= 2:
        lines.append(LineString(np.column_stack([pts.real, pts.imag])))
    low = np.flatnonzero((pts.imag > 0) & (pts.imag <= drop))
    for k in np.union1d(low, [pts.size - 1]):
        p = pts[int(k)]
        if p.imag > 0:
            lines.append(LineString([(p.real, p.imag), (p.real, 0.0)]))
    faces = list(polygonize(unary_union(lines)))

    lift = 1e-3 * drop if drop > 0 else 1e-9
    face = None
    for candidate in faces:
        if candidate.contains(Point(float(ys[0]), lift)):
            face = candidate
            break
    if face is None:
        raise ChartFailure("no pocket face contains the swallowed points", {"n_faces": len(faces)})
    for y in ys[1:]:
        if not face.contains(Point(float(y), lift)):
            raise ChartFailure("swallowed points fall in different faces", {"points": ys.tolist()})

    ring = orient(Polygon(face.exterior), sign=1.0).exterior
    verts = np.array([complex(x, yv) for x, yv in list(ring.coords)[:-1]])
    real = np.abs(verts.imag) <= 1e-12
    n = verts.size
    for s in range(n):
        if not real[s] or real[s - 1]:
            continue
        e = s
        while real[(e + 1) % n] and (e + 1) % n != s:
            e = (e + 1) % n
        x0, x1 = verts[s].real, verts[e].real
        if x0 < ys.min() and ys.max() < x1:
            rest = [verts[(e + k) % n] for k in range(n) if (e + k) % n != s and not _in_run(s, e, (e + k) % n, n)]
            return np.array([verts[s], verts[e]] + rest[1:])
    raise ChartFailure("pocket face has no real base edge around its points", {"points": ys.tolist()})


def _in_run(s: int, e: int, k: int, n: int) -> bool:
    """k strictly inside the cyclic run s..e"""
    length = (e - s) % n
    offset = (k - s) % n
    return 0 < offset < length


def _build_pocket_chart(comp: Component, numerics: Numerics) -> ComponentChart:
    source = comp.pocket
    try:
        boundary = _pocket_polygon(source, numerics)
        zc = zipper_uniformize(
            boundary, source.std_images.astype(complex), n_points=numerics.zipper_points, tol_geom=numerics.tol_geom
        )
    except GeometryError as exc:
        raise ChartFailure(f"pocket chart failed: {exc.message}", exc.details) from exc
    except ValueError as exc:
        raise ChartFailure(f"pocket polygon failed: {exc}") from exc
    stages = source.parent.stages + (MobiusStage(source.mobius.inverse()), ZipperStage(zc))
    return ComponentChart(
        members=comp.members,
        images=zc.images.copy(),
        derivatives=source.std_derivatives * zc.derivatives,
        stages=stages,
        accuracy=max(source.parent.accuracy, zc.accuracy),
    )


def chart_for(state: DomainState, component_id: str) -> ComponentChart:
    """The component's chart; pocket charts are built by the zipper on first use and cached"""
    comp = state.component(component_id)
    if comp.chart is not None:
        return comp.chart
    cached = state._charts.get(component_id)
    if cached is not None:
        return cached
    chart = _build_pocket_chart(comp, state.numerics)
    if chart.accuracy > state.numerics.tol_geom:
        logger.warning("⚠️ pocket chart accuracy above tolerance", component=component_id, accuracy=chart.accuracy)
    state._charts[component_id] = chart
    return chart


def cross_ratio(chart: ComponentChart, first: Tuple[int, int], second: Tuple[int, int]) -> float:
    """Cross ratio of two links of a component, in (0, 1); PatternError if they cross"""
    x = [chart.image(m) for m in (*first, *second)]
    r = cross_ratio_points(*x)
    if r < 0:
        raise PatternError("links cross in this component", (*first, *second))
    return r


# ---------------------------------------------------------------------------
# Reports and tubes
# ---------------------------------------------------------------------------

def component_report(state: DomainState) -> Dict[str, Any]:
    components = []
    for comp in state.components:
        entry = {
            "id": comp.component_id,
            "kind": comp.kind.value,
            "members": list(comp.members),
            "points": [format_endpoint(float(state.points[m])) for m in comp.members],
            "swallowed_at": format_endpoint(comp.swallowed_at),
            "ambiguous": comp.ambiguous,
        }
        chart = comp.chart or state._charts.get(comp.component_id)
        entry["chart_accuracy"] = None if chart is None else chart.accuracy
        components.append(entry)
    return {
        "n_points": int(state.points.size),
        "n_removed": len(state.removed),
        "consumed": list(state.consumed),
        "components": components,
    }


def geodesic_trace(a: float, b: float, n_points: int = 200, reach: float = 1e4) -> Trace:
    """Hyperbolic geodesic from a to b: the vertical ray of the 0 -> inf frame, pushed forward"""
    if math.isinf(a):
        a, b = b, a
    mobius = mobius_to_chord(a, b)
    heights = np.concatenate([[0.0], np.geomspace(1e-3, reach, n_points - 1)])
    return Trace(points=mobius.apply(1j * heights), capacities=0.25 * heights * heights)


def tube_rectangles(pattern: LinkPattern, width: float = 0.25) -> List[Polygon]:
    """Disjoint neighbourhoods of the link geodesics, clipped to a bounded window

    Noncrossing links have disjoint geodesics; the buffer width shrinks until the
    tubes are pairwise disjoint.
    """
    if is_link_pattern(pattern) != LinkStatus.LP:
        raise PatternError("tubes need a realizable link pattern")
    finite = pattern.points[np.isfinite(pattern.points)]
    span = float(np.ptp(finite)) if finite.size > 1 else 1.0
    window = Polygon.from_bounds(finite.min() - 2 * span, 0.0, finite.max() + 2 * span, 3 * span)
    curves = []
    for a, b in pattern.links:
        pts = geodesic_trace(a, b, 400, reach=1e3).points
        pts = pts[np.isfinite(pts)]
        curves.append(LineString(np.column_stack([pts.real, pts.imag])).intersection(window))
    spread = width * span
    for _ in range(30):
        tubes = [c.buffer(spread).intersection(window) for c in curves]
        if all(not tubes[i].intersects(tubes[j]) for i in range(len(tubes)) for j in range(i + 1, len(tubes))):
            return tubes
        spread *= 0.5
    raise GeometryError("could not separate link tubes", {"width": spread})


def link_root(pattern: LinkPattern, k: int) -> Tuple[int, int]:
    """(root, target) member indices of link k (0-based); curves start at a_k unless it is infinity"""
    a_idx, b_idx = 2 * k, 2 * k + 1
    if math.isinf(pattern.points[a_idx]):
        return b_idx, a_idx
    return a_idx, b_idx


def remove_curves(state: DomainState, pattern: LinkPattern, traces: Sequence[Trace], skip: Optional[int] = None) -> DomainState:
    """Remove every trace except link skip; a curve whose endpoints are already separated raises ChartFailure"""
    for k, trace in enumerate(traces):
        if k == skip:
            continue
        root, target = link_root(pattern, k)
        comp = state.component_of(root)
        if comp is None or target not in comp.members:
            raise ChartFailure("curve endpoints lie in different components", {"link": k + 1})
        state = component_split(state, trace, endpoints=(root, target), component_id=comp.component_id)
    return state
