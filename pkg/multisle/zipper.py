# zipper.py - geodesic zipper uniformization of polygonal Jordan domains

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import structlog
from shapely.geometry import LinearRing, Point

from errors import GeometryError
from loewner_core import upper_root

logger = structlog.get_logger(__name__)

# vertices whose image is this close to R are shifted to 0 instead of unzipped
_FLAT = 1e-13


def _arc_constants(a: complex) -> Tuple[float, float]:
    """(1/c, d) for the circle through 0 and a orthogonal to R; 1/c = 0 for a vertical arc"""
    mod2 = a.real * a.real + a.imag * a.imag
    inv_c = a.real / mod2
    if abs(a.real) <= 1e-15 * abs(a):
        inv_c = 0.0
    return inv_c, mod2 / a.imag


def _clamp(z):
    """Round-off below R goes back onto R, so real points keep their side"""
    return np.where(z.imag < 0, z.real + 0j, z + 0j)


def _stage(z, a: complex):
    """Unzip the arc from 0 to a: circle to vertical slit, then sqrt(z^2 + d^2)"""
    z = _clamp(np.asarray(z, dtype=complex))
    if a.imag == 0.0:
        return z - a.real
    inv_c, d = _arc_constants(a)
    t = z / (1.0 - z * inv_c)
    return upper_root(t * t + d * d, t)


def _stage_real(x, a: complex):
    """(image, derivative) on R; the point 0 counts as the left side of the arc"""
    if a.imag == 0.0:
        return x - a.real, np.ones_like(x)
    inv_c, d = _arc_constants(a)
    denom = 1.0 - x * inv_c
    t = x / denom
    root = np.sqrt(t * t + d * d)
    sign = np.where(t > 0, 1.0, -1.0)
    return sign * root, np.abs(t) / (root * denom * denom)


def _stage_inverse(w, a: complex):
    if a.imag == 0.0:
        return w + a.real
    inv_c, d = _arc_constants(a)
    t = upper_root(w * w - d * d, w)
    return t / (1.0 + t * inv_c)


def _stage_at_infinity(a: complex) -> float:
    """Image of the boundary point at infinity"""
    if a.imag == 0.0:
        return np.inf
    inv_c, d = _arc_constants(a)
    if inv_c == 0.0:
        return np.inf
    return float(-np.sign(inv_c) * np.sqrt(1.0 / (inv_c * inv_c) + d * d))


@dataclass(frozen=True)
class ZipperMap:
    """Conformal map from a polygon onto H, stored as the list of its stages

    The first stage sends the base edge [p, q] onto the negative real axis with p
    going to infinity and q to 0. Each arc stage unzips one more boundary vertex.
    The closing stages send the image w0 of p back to infinity, open the remaining
    sector of angle pi - theta onto H and normalize so that q lands on 0 and the
    last vertex on 1: the base edge covers R_-, the rest of the boundary R_+.
    """

    p: complex
    q: complex
    arcs: np.ndarray
    w0: float
    theta: float
    scale: float = 1.0

    @property
    def alpha(self) -> float:
        return np.pi / (np.pi - self.theta)

    def first(self, z):
        return 1j * np.sqrt((z - self.q) / (z - self.p))

    def first_base(self, x):
        """Base-edge points land on the negative real axis"""
        x = np.asarray(x, dtype=complex)
        u = ((x - self.q) / (x - self.p)).real
        root = np.sqrt(np.maximum(-u, 0.0))
        du = np.abs(self.q - self.p) / np.abs(x - self.p) ** 2
        return -root, du / (2.0 * root)

    def unfold(self, z):
        """Send w0 to infinity; the unzipped boundary stays on R_-"""
        if np.isfinite(self.w0):
            z = z / (1.0 - z / self.w0)
        return z

    def finish(self, z):
        z = self.unfold(z)
        return 1.0 + np.exp(self.alpha * np.log(z * np.exp(-1j * self.theta) / self.scale))

    def finish_real(self, x):
        deriv = np.ones_like(x)
        if np.isfinite(self.w0):
            denom = 1.0 - x / self.w0
            x = x / denom
            deriv = deriv / (denom * denom)
        ratio = np.abs(x) / self.scale
        return 1.0 - ratio ** self.alpha, deriv * self.alpha * ratio ** (self.alpha - 1.0) / self.scale

    def forward(self, z):
        """Map points of the closed polygon into the closed upper half-plane"""
        scalar = np.ndim(z) == 0
        w = self.first(np.atleast_1d(np.asarray(z, dtype=complex)))
        for a in self.arcs:
            w = _stage(w, a)
        w = self.finish(w)
        return complex(w[0]) if scalar else w

    def inverse(self, w):
        """Map points of the closed upper half-plane back into the polygon"""
        scalar = np.ndim(w) == 0
        z = _clamp(np.atleast_1d(np.asarray(w, dtype=complex)) - 1.0)
        z = self.scale * np.exp(np.log(z) / self.alpha) * np.exp(1j * self.theta)
        if np.isfinite(self.w0):
            z = z / (1.0 + z / self.w0)
        for a in self.arcs[::-1]:
            z = _stage_inverse(z, a)
        u = -z * z
        z = (self.q - u * self.p) / (1.0 - u)
        return complex(z[0]) if scalar else z

    def base_jet(self, x) -> Tuple[np.ndarray, np.ndarray]:
        """Images and positive boundary derivatives of points inside the base edge"""
        w, deriv = self.first_base(np.atleast_1d(x))
        for a in self.arcs:
            w, factor = _stage_real(w, a)
            deriv = deriv * factor
        w, factor = self.finish_real(w)
        return w, deriv * factor


@dataclass(frozen=True)
class ZipperChart:
    """A zipper map together with the marked points it was built for"""

    mapping: Optional[ZipperMap]
    marked: np.ndarray
    images: np.ndarray
    derivatives: np.ndarray
    accuracy: float
    n_vertices: int

    def forward(self, z):
        return z if self.mapping is None else self.mapping.forward(z)

    def inverse(self, w):
        return w if self.mapping is None else self.mapping.inverse(w)


def identity_chart(marked: Sequence[float]) -> ZipperChart:
    marked = np.real(np.asarray(marked, dtype=complex))
    return ZipperChart(None, marked, marked.copy(), np.ones_like(marked), 0.0, 0)


def densify_path(path: np.ndarray, spacing: float) -> np.ndarray:
    """Subdivide an open polyline so no edge is longer than spacing; endpoints kept"""
    out = [path[:1]]
    for start, end in zip(path[:-1], path[1:]):
        pieces = max(1, int(np.ceil(abs(end - start) / spacing)))
        out.append(start + (end - start) * (np.arange(1, pieces + 1) / pieces))
    return np.concatenate(out)


def _insert_vertex(chain: np.ndarray, pt: complex) -> np.ndarray:
    """Put pt on the nearest non-base edge of the closed chain (or snap to a vertex)"""
    nxt = np.roll(chain, -1)
    e = nxt - chain
    s = np.clip(((pt - chain) * np.conj(e)).real / np.maximum(np.abs(e) ** 2, 1e-300), 0.0, 1.0)
    dist = np.abs(chain + s * e - pt)
    dist[0] = np.inf
    k = int(np.argmin(dist))
    if s[k] <= 1e-12:
        chain = chain.copy()
        chain[k] = pt
        return chain
    if s[k] >= 1.0 - 1e-12:
        chain = chain.copy()
        chain[(k + 1) % chain.size] = pt
        return chain
    return np.insert(chain, k + 1, pt)


def _on_base_edge(pt: complex, p: complex, q: complex, tol: float) -> bool:
    e = q - p
    s = ((pt - p) * np.conj(e)).real / abs(e) ** 2
    return 0.0 < s < 1.0 and abs(p + s * e - pt) <= tol


def zipper_uniformize(
    boundary: Optional[Sequence[complex]],
    marked: Sequence[complex],
    n_points: int = 600,
    tol_geom: float = 1e-3,
) -> ZipperChart:
    """Uniformize a polygonal Jordan domain onto H with the geodesic zipper

    boundary lists the polygon vertices and its first edge is the base edge. The
    ring is reoriented counterclockwise if needed, keeping the base edge. Marked
    points inside the base edge receive images and boundary derivatives, other
    marked points receive images only (derivative nan); the base edge start p
    itself goes to infinity. boundary=None means the domain already is H.
    """
    if boundary is None:
        return identity_chart(marked)

    verts = np.asarray(boundary, dtype=complex)
    if verts.size >= 2 and verts[0] == verts[-1]:
        verts = verts[:-1]
    if verts.size < 3:
        raise GeometryError("a polygon needs at least three vertices", {"n_vertices": int(verts.size)})

    ring = LinearRing(np.column_stack([verts.real, verts.imag]))
    if not ring.is_simple:
        raise GeometryError("boundary polyline is not simple", {"n_vertices": int(verts.size)})
    if not ring.is_ccw:
        verts = np.concatenate([verts[1::-1], verts[:1:-1]])

    diameter = float(2.0 * np.max(np.abs(verts - verts.mean())))
    tol = tol_geom * diameter
    marked = np.atleast_1d(np.asarray(marked, dtype=complex))
    for k, pt in enumerate(marked):
        distance = ring.distance(Point(pt.real, pt.imag))
        if distance > tol:
            raise GeometryError(
                "marked point is not on the boundary",
                {"index": k, "point": [pt.real, pt.imag], "distance": distance},
            )

    p, q = complex(verts[0]), complex(verts[1])
    on_base = np.array([_on_base_edge(pt, p, q, tol) for pt in marked], dtype=bool)
    at_p = np.abs(marked - p) <= tol

    # densify everything except the base edge, then place the other marked points as vertices
    path = np.concatenate([verts[1:], verts[:1]])
    spacing = np.sum(np.abs(np.diff(path))) / n_points
    chain = np.concatenate([verts[:1], densify_path(path, spacing)[:-1]])
    off = ~on_base & ~at_p
    for pt in marked[off]:
        chain = _insert_vertex(chain, pt)
    positions = np.array([int(np.argmin(np.abs(chain - pt))) for pt in marked[off]], dtype=int)

    mapping = ZipperMap(p=p, q=q, arcs=np.zeros(0, dtype=complex), w0=np.inf, theta=0.0)
    rest = mapping.first(chain[2:])
    mids = mapping.first(0.5 * (chain[1:] + np.roll(chain, -1)[1:]))
    base_img, base_der = mapping.first_base(marked[on_base]) if on_base.any() else (np.zeros(0), np.zeros(0))
    off_img = np.where(positions == 1, 0.0, np.nan)
    off_done = positions == 1
    q_img = np.zeros(1)
    w0 = np.inf

    arcs = np.empty(rest.size, dtype=complex)
    for k in range(rest.size):
        a = complex(rest[k])
        if a.imag <= _FLAT * (1.0 + abs(a)):
            a = complex(a.real, 0.0)
        arcs[k] = a
        rest[k + 1:] = _stage(rest[k + 1:], a)
        mids = _stage(mids, a)
        base_img, factor = _stage_real(base_img, a)
        base_der = base_der * factor
        if off_done.any():
            off_img[off_done] = _stage_real(off_img[off_done], a)[0]
        w0 = _stage_at_infinity(a) if np.isinf(w0) else float(_stage_real(np.array([w0]), a)[0][0])
        q_img = _stage_real(q_img, a)[0]
        landed = positions == k + 2
        off_img[landed] = 0.0
        off_done |= landed

    # the last edge runs from 0 (image of the last vertex) to w0
    mapping = ZipperMap(p=p, q=q, arcs=arcs, w0=w0, theta=0.0)
    last_mid = complex(mapping.unfold(mids[-1]))
    theta = float(np.angle(last_mid))
    if not (0.0 < theta < np.pi):
        raise GeometryError("last edge left the upper half-plane while unzipping", {"theta": theta})
    x_q = float(mapping.unfold(q_img)[0])
    if not (np.isfinite(x_q) and x_q < 0.0):
        raise GeometryError("base edge end did not stay on the negative axis", {"x_q": x_q})

    mapping = ZipperMap(p=p, q=q, arcs=arcs, w0=w0, theta=theta, scale=-x_q)
    images = np.full(marked.size, np.nan)
    derivatives = np.full(marked.size, np.nan)
    if on_base.any():
        base_img, factor = mapping.finish_real(base_img)
        images[on_base] = base_img
        derivatives[on_base] = base_der * factor
    if off.any():
        images[off] = mapping.finish_real(off_img)[0]
    images[at_p] = np.inf

    # unzipped edge midpoints should sit on R before the sector is opened
    unzipped = mapping.unfold(mids[:-1])
    if unzipped.size:
        accuracy = float(np.max(np.abs(unzipped.imag)) / max(float(np.max(np.abs(unzipped))), 1e-300))
    else:
        accuracy = 0.0
    finite = ~at_p
    if not np.all(np.isfinite(images[finite])) or np.any(~(derivatives[on_base] > 0)):
        raise GeometryError("zipper produced non-finite images", {"accuracy": accuracy})

    logger.debug("🧭 zipper chart built", n_vertices=int(chain.size), accuracy=accuracy, marked=int(marked.size))
    return ZipperChart(mapping, marked, images, derivatives, accuracy, int(chain.size))
