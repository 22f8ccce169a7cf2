"""Polygonal domains and corner-graded P1 triangulations.

A graded mesh is produced in two steps: every triangle of a fixed coarse
triangulation is split uniformly into ``k**2`` congruent children, then the
vertices inside the grading disc of each corner are pulled towards the corner
by the radial map ``r -> R * (r / R) ** (1 / mu)``.  Connectivity is never
changed, so meshes on consecutive levels with ``k`` doubled are nested along
the boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, InvalidAngleError, MeshQualityError

# constants used to certify the grading inequalities
C1 = 0.05
C2 = 20.0
MIN_ANGLE_DEG = 20.0

_GEOM_TOL = 1e-12


@dataclass(frozen=True)
class CornerSpec:
    """A corner of the polygon together with its grading data."""

    position: tuple[float, float]
    interior_angle: float
    grading: float = 1.0
    radius: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.interior_angle < 2 * math.pi:
            raise InvalidAngleError(f"interior angle {self.interior_angle} outside (0, 2pi)")
        if not 0.0 < self.grading <= 1.0:
            raise ConfigurationError(f"grading parameter {self.grading} outside (0, 1]")
        if self.radius <= 0.0:
            raise ConfigurationError(f"grading radius must be positive, got {self.radius}")

    @property
    def lam(self) -> float:
        """Singular exponent pi / omega."""
        return math.pi / self.interior_angle


def _interior_angles(pts: np.ndarray) -> np.ndarray:
    nxt = np.roll(pts, -1, axis=0) - pts
    prv = np.roll(pts, 1, axis=0) - pts
    cross = nxt[:, 0] * prv[:, 1] - nxt[:, 1] * prv[:, 0]
    dot = (nxt * prv).sum(axis=1)
    return np.mod(np.arctan2(cross, dot), 2 * math.pi)


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def _point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from point ``p`` to the segments ``a[i]--b[i]``."""
    ab = b - a
    t = ((p - a) * ab).sum(axis=-1) / np.maximum((ab * ab).sum(axis=-1), 1e-300)
    t = np.clip(t, 0.0, 1.0)
    closest = a + t[..., None] * ab
    return np.linalg.norm(p - closest, axis=-1)


class PolygonalDomain:
    """Simple counter-clockwise polygon with corner metadata.

    ``coarse_vertices``/``coarse_triangles`` describe the base triangulation
    that is subdivided by :func:`generate_graded_mesh`; ``coarse_length`` is the
    length that one subdivision step divides (mesh parameter ``h = L / k``).
    """

    def __init__(self, corners: Sequence[CornerSpec], coarse_vertices=None,
                 coarse_triangles=None, coarse_length: float | None = None):
        self.corners = tuple(corners)
        if len(self.corners) < 3:
            raise ConfigurationError("a polygon needs at least three corners")
        pts = self.vertices
        area2 = np.sum(pts[:, 0] * np.roll(pts[:, 1], -1) - np.roll(pts[:, 0], -1) * pts[:, 1])
        if area2 <= 0:
            raise ConfigurationError("polygon corners must be listed counter-clockwise")
        n = len(pts)
        for i in range(n):
            for j in range(i + 1, n):
                if abs(i - j) in (1, n - 1):
                    continue
                if _segments_intersect(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]):
                    raise ConfigurationError("polygon is not simple")
        angles = _interior_angles(pts)
        for c, a in zip(self.corners, angles):
            if abs(c.interior_angle - a) > 1e-12:
                raise ConfigurationError(
                    f"corner {c.position}: declared angle {c.interior_angle} != geometric {a}")

        if coarse_vertices is None:
            coarse_vertices = pts.copy()
            coarse_triangles = np.array([[0, i, i + 1] for i in range(1, n - 1)])
        self.coarse_vertices = np.asarray(coarse_vertices, dtype=float)
        self.coarse_triangles = np.asarray(coarse_triangles, dtype=np.int64)
        v = self.coarse_vertices[self.coarse_triangles]
        signed = ((v[:, 1, 0] - v[:, 0, 0]) * (v[:, 2, 1] - v[:, 0, 1])
                  - (v[:, 1, 1] - v[:, 0, 1]) * (v[:, 2, 0] - v[:, 0, 0]))
        if np.any(signed <= 0):
            raise ConfigurationError("coarse triangulation has inverted or degenerate triangles")
        if abs(signed.sum() - area2) > 1e-10 * area2:
            raise ConfigurationError("coarse triangulation does not cover the polygon")
        if coarse_length is None:
            e = np.linalg.norm(v - np.roll(v, -1, axis=1), axis=2)
            coarse_length = float(e.max())
        self.coarse_length = float(coarse_length)

    @property
    def vertices(self) -> np.ndarray:
        return np.array([c.position for c in self.corners], dtype=float)

    @property
    def m(self) -> int:
        return len(self.corners)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([c.lam for c in self.corners])

    @property
    def side_lengths(self) -> np.ndarray:
        pts = self.vertices
        return np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)

    @property
    def perimeter(self) -> float:
        return float(self.side_lengths.sum())

    @property
    def area(self) -> float:
        pts = self.vertices
        return 0.5 * float(np.sum(pts[:, 0] * np.roll(pts[:, 1], -1) - np.roll(pts[:, 0], -1) * pts[:, 1]))

    def with_grading(self, mu, radius) -> "PolygonalDomain":
        """Copy with per-corner grading data replaced (scalars act on corner 0)."""
        mu_v, r_v = _resolve_grading(self, mu, radius)
        corners = [CornerSpec(c.position, c.interior_angle, float(a), float(b))
                   for c, a, b in zip(self.corners, mu_v, r_v)]
        return PolygonalDomain(corners, self.coarse_vertices, self.coarse_triangles, self.coarse_length)


def build_sector_domain(omega: float, mu: float = 1.0, radius: float = 0.5) -> PolygonalDomain:
    """The domain ``(-1, 1)^2`` intersected with the sector of opening ``omega``.

    Corner 0 is the origin, which carries the opening angle ``omega`` and the
    grading ``(mu, radius)``; all other corners are ungraded.
    """
    if not 0.0 < omega < 2 * math.pi:
        raise InvalidAngleError(f"omega = {omega} must lie in (0, 2pi)")

    c, s = math.cos(omega), math.sin(omega)
    t = 1.0 / max(abs(c), abs(s))
    ray_end = (t * c, t * s)
    # square corners and the unit lattice points on the square boundary,
    # sorted by polar angle; these become the fan vertices of the coarse mesh
    candidates = [(1.0, 1.0), (0.0, 1.0), (-1.0, 1.0), (-1.0, 0.0),
                  (-1.0, -1.0), (0.0, -1.0), (1.0, -1.0)]
    ang = lambda p: math.atan2(p[1], p[0]) % (2 * math.pi)
    inner = [p for p in candidates if ang(p) < omega - 1e-12]
    inner.sort(key=ang)
    ray_end = tuple(round(v, 15) if abs(v - round(v)) < 1e-14 else v for v in ray_end)
    if inner and np.hypot(inner[-1][0] - ray_end[0], inner[-1][1] - ray_end[1]) < 1e-12:
        inner.pop()
    boundary = np.array([(0.0, 0.0), (1.0, 0.0)] + inner + [ray_end])

    quarter = omega / (0.5 * math.pi)
    if abs(quarter - round(quarter)) < 1e-12:
        # unit cells split by the diagonal that avoids the origin; the
        # diagonal through the origin loses too much angle under grading
        coarse_vertices, coarse_triangles = _quadrant_cells(int(round(quarter)))
    else:
        coarse_vertices = boundary
        coarse_triangles = np.array([[0, i, i + 1] for i in range(1, len(boundary) - 1)])

    # corners are the boundary points where the boundary actually turns
    angles = _interior_angles(boundary)
    keep = [i for i in range(len(boundary)) if abs(angles[i] - math.pi) > 1e-12 or i == 0]
    pts = boundary[keep]
    angles = _interior_angles(pts)
    angles[0] = omega

    sides = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
    if not 0.0 < radius < min(sides[0], sides[-1]):
        raise ConfigurationError(f"grading radius {radius} incompatible with the sector domain")
    corners = [CornerSpec((float(pts[0, 0]), float(pts[0, 1])), omega, mu, radius)]
    for j in range(1, len(pts)):
        dist_other = np.linalg.norm(np.delete(pts, j, axis=0) - pts[j], axis=1)
        r_j = min(radius, 0.5 * min(sides[j - 1], sides[j]), 0.5 * dist_other.min(),
                  np.linalg.norm(pts[j]) - radius)
        corners.append(CornerSpec((float(pts[j, 0]), float(pts[j, 1])), float(angles[j]), 1.0, r_j))
    return PolygonalDomain(corners, coarse_vertices, coarse_triangles, coarse_length=1.0)


def _quadrant_cells(n: int):
    axes = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0), (1.0, 0.0)]
    verts = {(0.0, 0.0): 0}
    tris = []

    def vid(p):
        return verts.setdefault(p, len(verts))

    for q in range(n):
        a, b = axes[q], axes[q + 1]
        ab = (a[0] + b[0], a[1] + b[1])
        o, ia, iab, ib = vid((0.0, 0.0)), vid(a), vid(ab), vid(b)
        tris += [(o, ia, ib), (ia, iab, ib)]
    return np.array(list(verts), dtype=float), np.array(tris, dtype=np.int64)


def _resolve_grading(domain: PolygonalDomain, mu, radius):
    mu_v = np.array([c.grading for c in domain.corners], dtype=float)
    r_v = np.array([c.radius for c in domain.corners], dtype=float)
    if mu is not None:
        if np.ndim(mu) == 0:
            mu_v[0] = float(mu)
        else:
            mu_v = np.asarray(mu, dtype=float).copy()
    if radius is not None:
        if np.ndim(radius) == 0:
            r_v[0] = float(radius)
        else:
            r_v = np.asarray(radius, dtype=float).copy()
    if mu_v.shape != (domain.m,) or r_v.shape != (domain.m,):
        raise ConfigurationError("grading vectors must have one entry per corner")
    if np.any(mu_v <= 0) or np.any(mu_v > 1):
        raise ConfigurationError("grading parameters must lie in (0, 1]")
    if np.any(r_v <= 0):
        raise ConfigurationError("grading radii must be positive")
    return mu_v, r_v


def _check_discs(domain: PolygonalDomain, mu_v, r_v):
    pts = domain.vertices
    m = domain.m
    for i in range(m):
        for j in range(i + 1, m):
            if np.linalg.norm(pts[i] - pts[j]) < r_v[i] + r_v[j] - _GEOM_TOL:
                raise ConfigurationError(f"grading discs of corners {i} and {j} overlap")
    sides_a, sides_b = pts, np.roll(pts, -1, axis=0)
    for j in range(m):
        if mu_v[j] == 1.0:
            continue
        d = _point_segment_distance(pts[j], sides_a, sides_b)
        d[[j, (j - 1) % m]] = np.inf  # adjacent sides pass through the corner
        if d.min() < r_v[j] - _GEOM_TOL:
            raise ConfigurationError(f"grading disc of corner {j} reaches a non-adjacent side")


def _subdivide(vertices: np.ndarray, triangles: np.ndarray, k: int):
    """Split every triangle into k*k congruent children (conforming)."""
    ij = [(i, j) for j in range(k + 1) for i in range(k + 1 - j)]
    index = {p: n for n, p in enumerate(ij)}
    up = [(index[(i, j)], index[(i + 1, j)], index[(i, j + 1)])
          for j in range(k) for i in range(k - j)]
    down = [(index[(i + 1, j)], index[(i + 1, j + 1)], index[(i, j + 1)])
            for j in range(k - 1) for i in range(k - 1 - j)]
    local = np.array(up + down, dtype=np.int64)
    bary = np.array(ij, dtype=float) / k

    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    pts = (a[:, None, :] + bary[None, :, 0, None] * (b - a)[:, None, :]
           + bary[None, :, 1, None] * (c - a)[:, None, :])
    pts = pts.reshape(-1, 2)
    npl = len(ij)
    tris = (local[None, :, :] + npl * np.arange(len(triangles))[:, None, None]).reshape(-1, 3)

    # merge duplicated points on shared coarse edges
    scale = max(1.0, float(np.abs(vertices).max()))
    key = np.round(pts / scale * 1e10).astype(np.int64)
    _, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    return pts[first], inverse[tris]


def _grading_map(points: np.ndarray, center: np.ndarray, mu: float, radius: float) -> np.ndarray:
    d = points - center
    r = np.hypot(d[:, 0], d[:, 1])
    inside = (r < radius) & (r > 0)
    scale = np.ones_like(r)
    scale[inside] = (r[inside] / radius) ** (1.0 / mu - 1.0)
    return center + d * scale[:, None]


def triangle_angles(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """All interior angles (radians), shape (ntri, 3)."""
    p = vertices[triangles]
    out = np.empty((len(triangles), 3))
    for i in range(3):
        u = p[:, (i + 1) % 3] - p[:, i]
        v = p[:, (i + 2) % 3] - p[:, i]
        cosang = (u * v).sum(1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        out[:, i] = np.arccos(np.clip(cosang, -1.0, 1.0))
    return out


class GradedMesh:
    """Conforming P1 triangulation with an ordered boundary segmentation.

    ``boundary_edges`` has rows ``(v0, v1, triangle, tag)`` in counter-clockwise
    order starting at corner 0; ``tag`` is ``j + 1`` when the edge lies within
    arclength ``R_j`` of corner ``j`` and ``0`` otherwise.
    """

    def __init__(self, vertices, triangles, boundary_edges, h: float,
                 domain: PolygonalDomain | None = None, mu=None, radius=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        self.boundary_edges = np.ascontiguousarray(boundary_edges, dtype=np.int64)
        self.h = float(h)
        self.domain = domain
        m = domain.m if domain is not None else 0
        self.mu = np.ones(m) if mu is None else np.asarray(mu, dtype=float)
        self.radius = np.zeros(m) if radius is None else np.asarray(radius, dtype=float)
        for arr in (self.vertices, self.triangles, self.boundary_edges, self.mu, self.radius):
            arr.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.boundary_edges)

    @cached_property
    def corners(self) -> np.ndarray:
        if self.domain is None:
            return np.zeros((0, 2))
        return self.domain.vertices

    @cached_property
    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))

    @cached_property
    def diameters(self) -> np.ndarray:
        """h_T: longest edge of each triangle."""
        p = self.vertices[self.triangles]
        return np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2).max(axis=1)

    @cached_property
    def corner_distances(self) -> np.ndarray:
        """r_{T,j}: distance from triangle T to corner j, shape (ntri, m)."""
        p = self.vertices[self.triangles]
        out = np.empty((self.n_triangles, len(self.corners)))
        for j, c in enumerate(self.corners):
            d = np.stack([_point_segment_distance(c, p[:, i], p[:, (i + 1) % 3]) for i in range(3)])
            out[:, j] = d.min(axis=0)
        return out

    @cached_property
    def edge_points(self) -> tuple[np.ndarray, np.ndarray]:
        be = self.boundary_edges
        return self.vertices[be[:, 0]], self.vertices[be[:, 1]]

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        a, b = self.edge_points
        return np.linalg.norm(b - a, axis=1)

    @cached_property
    def edge_midpoints(self) -> np.ndarray:
        a, b = self.edge_points
        return 0.5 * (a + b)

    @cached_property
    def edge_normals(self) -> np.ndarray:
        """Outward unit normals (boundary runs counter-clockwise)."""
        a, b = self.edge_points
        t = (b - a) / self.edge_lengths[:, None]
        return np.column_stack([t[:, 1], -t[:, 0]])

    @cached_property
    def edge_arclength(self) -> np.ndarray:
        """Arclength coordinate of each edge start, measured from corner 0."""
        return np.concatenate([[0.0], np.cumsum(self.edge_lengths)[:-1]])

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        return self.boundary_edges[:, 0].copy()

    @property
    def edge_tags(self) -> np.ndarray:
        return self.boundary_edges[:, 3]

    def min_angle(self) -> float:
        return float(np.degrees(triangle_angles(self.vertices, self.triangles).min()))


def _boundary_loop(triangles: np.ndarray, vertices: np.ndarray, start_vertex: int):
    local = np.array([[0, 1], [1, 2], [2, 0]])
    e = triangles[:, local].reshape(-1, 2)
    owner = np.repeat(np.arange(len(triangles)), 3)
    key = np.sort(e, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.reshape(-1)
    if np.any(counts > 2):
        raise MeshQualityError("non-manifold edge in triangulation")
    bmask = counts[inv] == 1
    be, bt = e[bmask], owner[bmask]
    nxt = {int(a): (int(b), int(t)) for (a, b), t in zip(be, bt)}
    if len(nxt) != len(be):
        raise MeshQualityError("boundary is not a single simple loop")
    loop = []
    v = start_vertex
    for _ in range(len(be)):
        w, t = nxt[v]
        loop.append((v, w, t))
        v = w
    if v != start_vertex or len(loop) != len(be):
        raise MeshQualityError("boundary is not a single closed loop")
    return np.array(loop, dtype=np.int64)


def _edge_tags(vertices, loop, domain: PolygonalDomain, radius):
    """Tag j+1 if both endpoints lie within arclength R_j of corner j."""
    corners = domain.vertices
    lengths = np.linalg.norm(vertices[loop[:, 1]] - vertices[loop[:, 0]], axis=1)
    s = np.concatenate([[0.0], np.cumsum(lengths)])
    perim = s[-1]
    s0, s1 = s[:-1], s[1:]
    # arclength position of each corner = position of its mesh vertex
    corner_s = np.empty(len(corners))
    starts = vertices[loop[:, 0]]
    for j, c in enumerate(corners):
        k = np.argmin(np.linalg.norm(starts - c, axis=1))
        corner_s[j] = s0[k]
    tags = np.zeros(len(loop), dtype=np.int64)
    for j in range(len(corners)):
        d0 = np.abs(s0 - corner_s[j])
        d0 = np.minimum(d0, perim - d0)
        d1 = np.abs(s1 - corner_s[j])
        d1 = np.minimum(d1, perim - d1)
        inside = (d0 <= radius[j] + 1e-12) & (d1 <= radius[j] + 1e-12) & (tags == 0)
        tags[inside] = j + 1
    return tags


def generate_graded_mesh(domain: PolygonalDomain, h: float, mu=None, R=None,
                         min_angle: float = MIN_ANGLE_DEG) -> GradedMesh:
    """Uniformly refined, radially graded triangulation of ``domain``.

    ``mu``/``R`` may be scalars (applied to corner 0) or per-corner vectors;
    ``None`` keeps the values stored on the domain.
    """
    if not 0.0 < h < 1.0:
        raise ConfigurationError(f"mesh parameter h = {h} must lie in (0, 1)")
    mu_v, r_v = _resolve_grading(domain, mu, R)
    _check_discs(domain, mu_v, r_v)

    k = max(1, math.ceil(domain.coarse_length / h - 1e-9))
    verts, tris = _subdivide(domain.coarse_vertices, domain.coarse_triangles, k)
    for j, c in enumerate(domain.vertices):
        if mu_v[j] < 1.0:
            verts = _grading_map(verts, c, mu_v[j], r_v[j])

    if np.any(np.isclose(
            0.5 * np.abs((verts[tris[:, 1], 0] - verts[tris[:, 0], 0]) * (verts[tris[:, 2], 1] - verts[tris[:, 0], 1])
                         - (verts[tris[:, 1], 1] - verts[tris[:, 0], 1]) * (verts[tris[:, 2], 0] - verts[tris[:, 0], 0])),
            0.0, atol=1e-300)):
        raise MeshQualityError("degenerate triangle after grading")
    worst = float(np.degrees(triangle_angles(verts, tris).min()))
    if worst < min_angle:
        raise MeshQualityError(f"minimum angle {worst:.2f} deg below threshold {min_angle} deg")

    start = int(np.argmin(np.linalg.norm(verts - domain.vertices[0], axis=1)))
    loop = _boundary_loop(tris, verts, start)
    tags = _edge_tags(verts, loop, domain, r_v)
    boundary = np.column_stack([loop, tags])
    graded = domain.with_grading(mu_v, r_v)
    return GradedMesh(verts, tris, boundary, domain.coarse_length / k, graded, mu_v, r_v)


@dataclass
class ValidationReport:
    """Outcome of the grading certificate.

    ``ratios`` maps each regime (``corner``, ``graded``, ``uniform``) to the
    (min, max) of the scaled mesh size over the triangles in that regime.
    """

    passed: bool
    worst_triangle: int
    worst_ratio: float
    worst_regime: str
    ratios: dict
    n_failures: int

    def __bool__(self):
        return self.passed


def validate_grading(mesh: GradedMesh, mu=None, R=None, c1: float = C1, c2: float = C2) -> ValidationReport:
    """Scan every triangle against the three mesh-size inequalities.

    A triangle inside the grading disc of corner ``j`` (``r_{T,j} <= R_j``) is
    checked against that corner's corner/graded bounds; triangles outside all
    discs are checked against the quasi-uniform bound ``c1 h <= h_T <= c2 h``.
    """
    m = len(mesh.corners)
    mu_v, r_v = mesh.mu.copy(), mesh.radius.copy()
    if mu is not None:
        if np.ndim(mu) == 0:
            mu_v[0] = float(mu)
        else:
            mu_v = np.asarray(mu, dtype=float)
    if R is not None:
        if np.ndim(R) == 0:
            r_v[0] = float(R)
        else:
            r_v = np.asarray(R, dtype=float)

    h = mesh.h
    hT = mesh.diameters
    rT = mesh.corner_distances
    scaled = hT / h
    regime = np.full(mesh.n_triangles, 2)
    for j in range(m):
        at_corner = rT[:, j] <= _GEOM_TOL
        near = (rT[:, j] > _GEOM_TOL) & (rT[:, j] <= r_v[j])
        scaled = np.where(at_corner, hT / h ** (1.0 / mu_v[j]), scaled)
        scaled = np.where(near, hT / (h * np.maximum(rT[:, j], _GEOM_TOL) ** (1.0 - mu_v[j])), scaled)
        regime = np.where(at_corner, 0, np.where(near, 1, regime))

    names = ("corner", "graded", "uniform")
    ratios = {}
    for code, name in enumerate(names):
        sel = scaled[regime == code]
        ratios[name] = (float(sel.min()), float(sel.max())) if sel.size else (math.nan, math.nan)

    # violation measured multiplicatively: > 1 means outside [c1, c2]
    violation = np.maximum(scaled / c2, c1 / scaled)
    worst = int(np.argmax(violation))
    fails = int(np.count_nonzero(violation > 1.0))
    return ValidationReport(fails == 0, worst, float(scaled[worst]), names[regime[worst]], ratios, fails)


def save_mesh(mesh: GradedMesh, path) -> None:
    """Write the plain-text mesh format."""
    with open(path, "w") as fh:
        fh.write(f"vertices {mesh.n_vertices} triangles {mesh.n_triangles} bedges {mesh.n_edges}\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"{a} {b} {c}\n")
        for v0, v1, t, tag in mesh.boundary_edges:
            fh.write(f"{v0} {v1} {t} {tag}\n")


def load_mesh(path, h: float | None = None) -> GradedMesh:
    """Read the plain-text mesh format (geometry only, no domain metadata)."""
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) != 6 or head[0::2] != ["vertices", "triangles", "bedges"]:
            raise ConfigurationError(f"{path}: malformed mesh header")
        nv, nt, nb = int(head[1]), int(head[3]), int(head[5])
        rows = [fh.readline().split() for _ in range(nv + nt + nb)]
    verts = np.array(rows[:nv], dtype=float)
    tris = np.array(rows[nv:nv + nt], dtype=np.int64).reshape(-1, 3)
    bedges = np.array(rows[nv + nt:], dtype=np.int64).reshape(-1, 4)
    if h is None:
        p = verts[tris]
        h = float(np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2).max())
    return GradedMesh(verts, tris, bedges, h)
