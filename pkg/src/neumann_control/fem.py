"""P1 finite element assembly, quadrature-based loads, solves and error norms."""
from __future__ import annotations

import warnings
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import AssemblyError, EvaluationError, SolverBreakdownError
from .mesh import GradedMesh
from .quadrature import QuadratureRule, gauss_rule, split_triangle_rule, triangle_rule

# quadrature choices: volume terms, smooth boundary data, error evaluation
VOLUME_DEGREE = 4
BOUNDARY_POINTS = 3
ERROR_POINTS = 7
ERROR_DEGREE = 8


class NegativeWeightWarning(UserWarning):
    pass


class FeFunction:
    """Continuous piecewise linear function given by its nodal values."""

    def __init__(self, mesh: GradedMesh, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (mesh.n_vertices,):
            raise ValueError(f"expected {mesh.n_vertices} nodal values, got shape {values.shape}")
        self.mesh = mesh
        self.values = values

    @classmethod
    def interpolate(cls, mesh: GradedMesh, func: Callable) -> "FeFunction":
        return cls(mesh, func(mesh.vertices))

    def at_quadrature(self, rule: QuadratureRule) -> np.ndarray:
        """Values at the quadrature points of every triangle, (ntri, nq)."""
        return self.values[self.mesh.triangles] @ rule.points.T

    def boundary_values(self, edges: np.ndarray, t: np.ndarray) -> np.ndarray:
        be = self.mesh.boundary_edges[edges]
        return (1.0 - t) * self.values[be[:, 0]] + t * self.values[be[:, 1]]

    def kinks(self) -> dict:
        return {}

    def __call__(self, points) -> np.ndarray:
        """Barycentric evaluation at arbitrary points inside the mesh."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        tri, bary = locate(self.mesh, points)
        return (self.values[self.mesh.triangles[tri]] * bary).sum(axis=1)


def locate(mesh: GradedMesh, points: np.ndarray, tol: float = 1e-12):
    """Containing triangle and barycentric coordinates for each point."""
    p = mesh.vertices[mesh.triangles]
    a = p[:, 0]
    e1, e2 = p[:, 1] - a, p[:, 2] - a
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    tri = np.empty(len(points), dtype=np.int64)
    bary = np.empty((len(points), 3))
    for n, x in enumerate(points):
        d = x - a
        l1 = (d[:, 0] * e2[:, 1] - d[:, 1] * e2[:, 0]) / det
        l2 = (e1[:, 0] * d[:, 1] - e1[:, 1] * d[:, 0]) / det
        l0 = 1.0 - l1 - l2
        worst = np.minimum(np.minimum(l0, l1), l2)
        k = int(np.argmax(worst))
        if worst[k] < -tol * 1e3:
            raise EvaluationError(f"point {x} lies outside the mesh")
        tri[n] = k
        bary[n] = (l0[k], l1[k], l2[k])
    return tri, bary


def quadrature_points(mesh: GradedMesh, rule: QuadratureRule) -> np.ndarray:
    """Physical quadrature points, shape (ntri, nq, 2)."""
    return np.einsum("qk,tkd->tqd", rule.points, mesh.vertices[mesh.triangles])


def _gradients(mesh: GradedMesh):
    """Barycentric gradients (ntri, 3, 2) and areas."""
    p = mesh.vertices[mesh.triangles]
    area = mesh.areas
    if np.any(area <= 0.0) or not np.all(np.isfinite(area)):
        raise AssemblyError("degenerate or inverted triangle")
    # grad(lambda_i) = rot90(p_{i+2} - p_{i+1}) / (2 area)
    g = np.empty((mesh.n_triangles, 3, 2))
    for i in range(3):
        e = p[:, (i + 2) % 3] - p[:, (i + 1) % 3]
        g[:, i, 0] = -e[:, 1]
        g[:, i, 1] = e[:, 0]
    return g / (2.0 * area[:, None, None]), area


def _scatter(mesh: GradedMesh, local: np.ndarray) -> sp.csr_matrix:
    tris = mesh.triangles
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    n = mesh.n_vertices
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def assemble_stiffness(mesh: GradedMesh) -> sp.csr_matrix:
    """Exact P1 stiffness matrix of a(y, v) = int grad y . grad v."""
    g, area = _gradients(mesh)
    local = np.einsum("tid,tjd->tij", g, g) * area[:, None, None]
    return _scatter(mesh, local)


def assemble_weighted_mass(mesh: GradedMesh, weight=None, rule: QuadratureRule | None = None,
                           signed: bool = False) -> sp.csr_matrix:
    """Matrix of int weight * phi_i * phi_j.

    ``weight`` is ``None`` (constant one), a callable on physical points of
    shape (N, 2), or an array of values at the quadrature points (ntri, nq).
    Negative weights warn unless ``signed`` says they are expected.
    """
    rule = rule or triangle_rule(VOLUME_DEGREE)
    area = mesh.areas
    if np.any(area <= 0.0):
        raise AssemblyError("degenerate or inverted triangle")
    if weight is None:
        w = np.ones((mesh.n_triangles, len(rule.weights)))
    elif callable(weight):
        x = quadrature_points(mesh, rule)
        w = np.asarray(weight(x.reshape(-1, 2)), dtype=float).reshape(x.shape[:2])
    else:
        w = np.broadcast_to(np.asarray(weight, dtype=float), (mesh.n_triangles, len(rule.weights)))
    if not np.all(np.isfinite(w)):
        raise EvaluationError("non-finite weight at a quadrature point")
    if not signed and np.any(w < 0.0):
        warnings.warn("negative mass weight; the system may lose definiteness", NegativeWeightWarning)
    phi = rule.points  # (nq, 3): P1 basis values are the barycentric coordinates
    local = np.einsum("tq,q,qi,qj->tij", w, rule.weights, phi, phi) * area[:, None, None]
    return _scatter(mesh, local)


def assemble_mass(mesh: GradedMesh) -> sp.csr_matrix:
    return assemble_weighted_mass(mesh, None)


def assemble_boundary_mass(mesh: GradedMesh) -> sp.csr_matrix:
    """P1 mass matrix on the boundary, (|E|/6) [[2, 1], [1, 2]] per edge."""
    be = mesh.boundary_edges
    L = mesh.edge_lengths
    rows = np.concatenate([be[:, 0], be[:, 0], be[:, 1], be[:, 1]])
    cols = np.concatenate([be[:, 0], be[:, 1], be[:, 0], be[:, 1]])
    vals = np.concatenate([L / 3.0, L / 6.0, L / 6.0, L / 3.0])
    n = mesh.n_vertices
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def boundary_control_matrix(mesh: GradedMesh) -> sp.csr_matrix:
    """B with (B u)_i = int_Gamma u phi_i for edgewise constant u."""
    be = mesh.boundary_edges
    half = 0.5 * mesh.edge_lengths
    e = np.arange(mesh.n_edges)
    rows = np.concatenate([be[:, 0], be[:, 1]])
    cols = np.concatenate([e, e])
    return sp.csr_matrix((np.concatenate([half, half]), (rows, cols)),
                         shape=(mesh.n_vertices, mesh.n_edges))


def integrate_volume_load(mesh: GradedMesh, f: Callable, rule: QuadratureRule | None = None) -> np.ndarray:
    """Vector of int f phi_i."""
    rule = rule or triangle_rule(VOLUME_DEGREE)
    x = quadrature_points(mesh, rule)
    vals = np.asarray(f(x.reshape(-1, 2)), dtype=float).reshape(x.shape[:2])
    if not np.all(np.isfinite(vals)):
        raise EvaluationError("volume load is not finite at a quadrature point")
    local = np.einsum("tq,q,qi->ti", vals, rule.weights, rule.points) * mesh.areas[:, None]
    return np.bincount(mesh.triangles.ravel(), weights=local.ravel(), minlength=mesh.n_vertices)


def edge_segments(mesh: GradedMesh, kinks: dict | None = None, corner_split: int = 0):
    """Split boundary edges into sub-segments.

    Returns ``(edge, t0, t1)`` arrays.  ``kinks`` maps edge index to interior
    parameters in (0, 1).  With ``corner_split > 0``, edges touching a corner
    whose singular exponent is below one are split geometrically towards it.
    """
    cuts = {int(e): list(np.asarray(t, dtype=float).ravel()) for e, t in (kinks or {}).items()}
    if corner_split and mesh.domain is not None:
        lam = mesh.domain.lambdas
        a, b = mesh.edge_points
        geo = [0.5 ** k for k in range(1, corner_split + 1)]
        for j, c in enumerate(mesh.corners):
            if lam[j] >= 1.0:
                continue
            for e in np.flatnonzero(np.linalg.norm(a - c, axis=1) < 1e-14):
                cuts.setdefault(int(e), []).extend(geo)
            for e in np.flatnonzero(np.linalg.norm(b - c, axis=1) < 1e-14):
                cuts.setdefault(int(e), []).extend(1.0 - g for g in geo)
    edges, t0, t1 = [np.arange(mesh.n_edges)], [np.zeros(mesh.n_edges)], [np.ones(mesh.n_edges)]
    if cuts:
        keep = np.ones(mesh.n_edges, dtype=bool)
        for e, ts in cuts.items():
            ts = np.unique(np.clip([t for t in ts if 0.0 < t < 1.0], 0.0, 1.0))
            if ts.size == 0:
                continue
            keep[e] = False
            knots = np.concatenate([[0.0], ts, [1.0]])
            edges.append(np.full(len(knots) - 1, e))
            t0.append(knots[:-1])
            t1.append(knots[1:])
        edges[0], t0[0], t1[0] = edges[0][keep], t0[0][keep], t1[0][keep]
    return np.concatenate(edges), np.concatenate(t0), np.concatenate(t1)


def _segment_quadrature(mesh, segs, rule):
    edges, t0, t1 = segs
    t = t0[:, None] + (t1 - t0)[:, None] * rule.points[None, :]
    a, b = mesh.edge_points
    x = a[edges][:, None, :] + t[..., None] * (b - a)[edges][:, None, :]
    w = ((t1 - t0) * mesh.edge_lengths[edges])[:, None] * rule.weights[None, :]
    return edges, t, x, w


def integrate_boundary_load(mesh: GradedMesh, g, kinks: dict | None = None,
                            npoints: int = BOUNDARY_POINTS) -> np.ndarray:
    """Vector of int_Gamma g phi_i.

    ``g`` is either an edgewise constant control (anything with an ``values``
    array of length ``n_edges``), integrated exactly, or a callable
    ``g(x, n)`` of boundary points and outward normals, integrated by Gauss
    quadrature on each (kink-split) edge segment.
    """
    be = mesh.boundary_edges
    if hasattr(g, "values") and not callable(g):
        vals = np.asarray(g.values, dtype=float)
        return boundary_control_matrix(mesh) @ vals
    rule = gauss_rule(npoints)
    edges, t, x, w = _segment_quadrature(mesh, edge_segments(mesh, kinks), rule)
    normals = np.broadcast_to(mesh.edge_normals[edges][:, None, :], x.shape)
    vals = np.asarray(g(x.reshape(-1, 2), normals.reshape(-1, 2)), dtype=float).reshape(t.shape)
    if not np.all(np.isfinite(vals)):
        raise EvaluationError("boundary data is not finite at a quadrature point")
    c0 = (vals * w * (1.0 - t)).sum(axis=1)
    c1 = (vals * w * t).sum(axis=1)
    n = mesh.n_vertices
    return (np.bincount(be[edges, 0], weights=c0, minlength=n)
            + np.bincount(be[edges, 1], weights=c1, minlength=n))


class SpdFactor:
    """Sparse factorization of a symmetric positive definite matrix."""

    def __init__(self, A, rel_pivot_tol: float = 1e-12):
        A = sp.csc_matrix(A)
        if A.shape[0] != A.shape[1]:
            raise SolverBreakdownError("matrix is not square")
        self.A = A
        try:
            self.lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                                options={"SymmetricMode": True})
        except RuntimeError as exc:
            raise SolverBreakdownError(f"factorization failed: {exc}") from exc
        piv = self.lu.U.diagonal()
        scale = np.abs(piv).max() if piv.size else 1.0
        if np.any(piv <= rel_pivot_tol * scale):
            raise SolverBreakdownError("matrix is singular or indefinite (non-positive pivot)")

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        x = self.lu.solve(np.asarray(rhs, dtype=float))
        if not np.all(np.isfinite(x)):
            raise SolverBreakdownError("non-finite solution")
        return x


def solve_spd(A, b: np.ndarray, check: bool = True) -> np.ndarray:
    """Direct solve of an SPD system with a residual check."""
    x = SpdFactor(A).solve(b)
    if check:
        r = np.linalg.norm(A @ x - b)
        nb = np.linalg.norm(b)
        if r > 1e-10 * max(nb, 1e-300) and r > 1e-14:
            raise SolverBreakdownError(f"residual {r:.3e} too large relative to |b| = {nb:.3e}")
    return x


def domain_error_rule(mesh: GradedMesh):
    """Per-triangle error quadrature: corner-touching triangles are split once."""
    return triangle_rule(ERROR_DEGREE), split_triangle_rule(triangle_rule(ERROR_DEGREE), 1)


def l2_error(mesh: GradedMesh, approx, exact: Callable, region: str = "domain",
             exact_kinks: dict | None = None) -> float:
    """L2 norm of ``approx - exact`` over the domain or the boundary.

    On the boundary ``approx`` may be a :class:`FeFunction` (trace), an
    edgewise constant or a postprocessed control; edges are split at the
    kinks of both functions and near singular corners, then integrated with
    a 7-point Gauss rule per segment.
    """
    if region == "domain":
        if not isinstance(approx, FeFunction):
            raise TypeError("domain errors need a FeFunction")
        base, fine = domain_error_rule(mesh)
        singular = np.zeros(mesh.n_triangles, dtype=bool)
        if mesh.domain is not None:
            lam = mesh.domain.lambdas
            rT = mesh.corner_distances
            for j in range(len(lam)):
                if lam[j] < 1.0:
                    singular |= rT[:, j] <= 1e-14
        total = 0.0
        for rule, mask in ((base, ~singular), (fine, singular)):
            if not mask.any():
                continue
            tris = mesh.triangles[mask]
            x = np.einsum("qk,tkd->tqd", rule.points, mesh.vertices[tris])
            uh = approx.values[tris] @ rule.points.T
            ue = np.asarray(exact(x.reshape(-1, 2)), dtype=float).reshape(uh.shape)
            total += float((((uh - ue) ** 2) @ rule.weights * mesh.areas[mask]).sum())
        return float(np.sqrt(total))
    if region != "boundary":
        raise ValueError(f"unknown region {region!r}")
    kinks = {}
    for source in (approx.kinks(), exact_kinks or {}):
        for e, ts in source.items():
            kinks.setdefault(int(e), []).extend(np.ravel(ts))
    rule = gauss_rule(ERROR_POINTS)
    edges, t, x, w = _segment_quadrature(mesh, edge_segments(mesh, kinks, corner_split=8), rule)
    nseg, nq = t.shape
    ah = approx.boundary_values(np.repeat(edges, nq), t.ravel()).reshape(t.shape)
    ue = np.asarray(exact(x.reshape(-1, 2)), dtype=float).reshape(t.shape)
    return float(np.sqrt(((ah - ue) ** 2 * w).sum()))
