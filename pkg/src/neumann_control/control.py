"""The edgewise constant control space and its operators."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ClassificationError, InvalidBoundsError
from .fem import FeFunction, edge_segments, _segment_quadrature
from .mesh import GradedMesh
from .quadrature import gauss_rule

# sentinel magnitude meaning "no bound"
INFINITE_BOUND = 1e30


def check_bounds(ua: float, ub: float) -> None:
    if not ua <= ub:
        raise InvalidBoundsError(f"lower bound {ua} exceeds upper bound {ub}")


def clamp(value, ua: float, ub: float):
    """Pointwise projection onto [ua, ub]; callables are wrapped lazily."""
    check_bounds(ua, ub)
    if callable(value):
        return lambda *args: np.clip(value(*args), ua, ub)
    if np.ndim(value) == 0:
        return float(min(ub, max(ua, value)))
    return np.clip(value, ua, ub)


class BoundaryControl:
    """One value per boundary edge (piecewise constant on the segmentation)."""

    def __init__(self, mesh: GradedMesh, values):
        values = np.array(values, dtype=float).reshape(-1) if np.ndim(values) else np.full(mesh.n_edges, float(values))
        if values.shape != (mesh.n_edges,):
            raise ValueError(f"expected {mesh.n_edges} edge values, got {values.shape}")
        self.mesh = mesh
        self.values = values

    def boundary_values(self, edges: np.ndarray, t: np.ndarray) -> np.ndarray:
        return self.values[edges]

    def kinks(self) -> dict:
        return {}

    def norm(self) -> float:
        return float(np.sqrt((self.mesh.edge_lengths * self.values ** 2).sum()))

    def inner(self, other: "BoundaryControl") -> float:
        return float((self.mesh.edge_lengths * self.values * other.values).sum())

    def is_admissible(self, ua: float, ub: float, tol: float = 0.0) -> bool:
        return bool(np.all(self.values >= ua - tol) and np.all(self.values <= ub + tol))

    def __add__(self, other):
        return BoundaryControl(self.mesh, self.values + _vals(other))

    def __sub__(self, other):
        return BoundaryControl(self.mesh, self.values - _vals(other))

    def __mul__(self, c: float):
        return BoundaryControl(self.mesh, self.values * c)

    __rmul__ = __mul__

    def __repr__(self):
        return f"BoundaryControl(n_edges={self.mesh.n_edges})"

    def to_text(self) -> str:
        return "".join(f"{i} {v:.17g}\n" for i, v in enumerate(self.values))

    @classmethod
    def from_text(cls, mesh: GradedMesh, text: str) -> "BoundaryControl":
        vals = np.zeros(mesh.n_edges)
        for line in text.strip().splitlines():
            i, v = line.split()
            vals[int(i)] = float(v)
        return cls(mesh, vals)


def _vals(x):
    return x.values if isinstance(x, BoundaryControl) else np.asarray(x, dtype=float)


class PostprocessedControl:
    """clamp(-p_h / nu) on the boundary, stored unclamped for kink recovery."""

    def __init__(self, mesh: GradedMesh, nodal, ua: float, ub: float):
        check_bounds(ua, ub)
        self.mesh = mesh
        self.nodal = np.asarray(nodal, dtype=float)
        self.ua, self.ub = float(ua), float(ub)

    def _ends(self, edges):
        be = self.mesh.boundary_edges[edges]
        return self.nodal[be[:, 0]], self.nodal[be[:, 1]]

    def boundary_values(self, edges: np.ndarray, t: np.ndarray) -> np.ndarray:
        w0, w1 = self._ends(edges)
        return np.clip((1.0 - t) * w0 + t * w1, self.ua, self.ub)

    def kinks(self) -> dict:
        """Parameters where the linear trace crosses a bound, per edge."""
        w0, w1 = self._ends(np.arange(self.mesh.n_edges))
        out = {}
        for bound in (self.ua, self.ub):
            d0, d1 = w0 - bound, w1 - bound
            cross = np.flatnonzero(d0 * d1 < 0)
            t = d0[cross] / (d0[cross] - d1[cross])
            for e, te in zip(cross, t):
                out.setdefault(int(e), []).append(float(te))
        return out

    def __call__(self, points):
        raise TypeError("evaluate a postprocessed control through boundary_values")


@dataclass
class EdgeClassification:
    """K1 (mixed active/inactive) versus K2 edges, with anchors on K1."""

    labels: np.ndarray          # True for K1
    anchors: dict               # edge -> point with ubar == bound
    anchor_values: dict         # edge -> ubar(anchor)

    @property
    def k1(self) -> np.ndarray:
        return np.flatnonzero(self.labels)

    @property
    def k2(self) -> np.ndarray:
        return np.flatnonzero(~self.labels)

    def measure_k1(self, mesh: GradedMesh) -> float:
        return float(mesh.edge_lengths[self.labels].sum())


def l2_project_Qh(mesh: GradedMesh, f, kinks: dict | None = None, npoints: int = 7) -> BoundaryControl:
    """Edge averages (1/|E|) int_E f.

    ``f`` is a callable of boundary points, a :class:`FeFunction` (whose trace
    is linear per edge, so the average is the midpoint value) or any object
    with ``boundary_values``.
    """
    if isinstance(f, FeFunction):
        be = mesh.boundary_edges
        return BoundaryControl(mesh, 0.5 * (f.values[be[:, 0]] + f.values[be[:, 1]]))
    rule = gauss_rule(npoints)
    if hasattr(f, "kinks") and kinks is None:
        kinks = f.kinks()
    edges, t, x, w = _segment_quadrature(mesh, edge_segments(mesh, kinks), rule)
    if hasattr(f, "boundary_values"):
        vals = f.boundary_values(np.repeat(edges, t.shape[1]), t.ravel()).reshape(t.shape)
    else:
        vals = np.asarray(f(x.reshape(-1, 2)), dtype=float).reshape(t.shape)
    integral = np.bincount(edges, weights=(vals * w).sum(axis=1), minlength=mesh.n_edges)
    return BoundaryControl(mesh, integral / mesh.edge_lengths)


def midpoint_interpolate_Rh(mesh: GradedMesh, f: Callable) -> BoundaryControl:
    """Value of ``f`` at each edge midpoint."""
    if isinstance(f, FeFunction):
        return l2_project_Qh(mesh, f)
    return BoundaryControl(mesh, np.asarray(f(mesh.edge_midpoints), dtype=float))


def _state(v, ua, ub, atol):
    return np.where(v >= ub - atol, 1, np.where(v <= ua + atol, -1, 0))


def bound_transitions(mesh: GradedMesh, func: Callable, ua: float, ub: float,
                      samples: int = 64, atol: float = 1e-12, iterations: int = 60) -> dict:
    """Locate where ``func`` switches between below/inside/above [ua, ub].

    Each edge is sampled at ``samples`` equispaced parameters; every change of
    state between neighbouring samples is refined by bisection.  Returns
    ``edge -> list of (t, t_active)`` with ``t_active`` the bracket end lying
    on the active side.
    """
    a, b = mesh.edge_points
    ts = np.linspace(0.0, 1.0, samples)
    x = a[:, None, :] + ts[None, :, None] * (b - a)[:, None, :]
    vals = np.asarray(func(x.reshape(-1, 2)), dtype=float).reshape(mesh.n_edges, samples)
    st = _state(vals, ua, ub, atol)
    e_idx, s_idx = np.nonzero(st[:, 1:] != st[:, :-1])
    if e_idx.size == 0:
        return {}
    lo = ts[s_idx].copy()
    hi = ts[s_idx + 1].copy()
    s_lo = st[e_idx, s_idx]
    ea, eb = a[e_idx], b[e_idx]
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        xm = ea + mid[:, None] * (eb - ea)
        sm = _state(np.asarray(func(xm), dtype=float), ua, ub, atol)
        same = sm == s_lo
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    active_end = np.where(s_lo != 0, lo, hi)
    out = {}
    for e, tl, th, ta in zip(e_idx, lo, hi, active_end):
        out.setdefault(int(e), []).append((0.5 * (tl + th), float(ta)))
    return out


def classify_edges(mesh: GradedMesh, ubar: Callable, ua: float, ub: float,
                   samples: int = 64) -> EdgeClassification:
    """Split edges into K1 (active and inactive points) and K2 (the rest).

    The anchor of a K1 edge is the active-side end of the bisection bracket of
    the transition closest to the edge midpoint, so ``ubar(anchor)`` equals a
    bound.  Tangential touches without a sampled state change end up in K2.
    """
    check_bounds(ua, ub)
    trans = bound_transitions(mesh, ubar, ua, ub, samples)
    labels = np.zeros(mesh.n_edges, dtype=bool)
    anchors, values = {}, {}
    a, b = mesh.edge_points
    for e, items in trans.items():
        # a change between the two active states (-1 <-> +1) cannot happen
        # for a continuous ubar without passing through inactive points
        labels[e] = True
        t_act = min(items, key=lambda it: abs(it[0] - 0.5))[1]
        xk = a[e] + t_act * (b[e] - a[e])
        anchors[e] = xk
        values[e] = float(np.asarray(ubar(xk[None, :])).ravel()[0])
    return EdgeClassification(labels, anchors, values)


def modified_interpolate_Rhu(mesh: GradedMesh, ubar: Callable, cls: EdgeClassification) -> BoundaryControl:
    """Midpoint values on K2 edges, anchor values on K1 edges."""
    vals = np.asarray(ubar(mesh.edge_midpoints), dtype=float).copy()
    for e in cls.k1:
        if int(e) not in cls.anchors:
            raise ClassificationError(f"K1 edge {e} has no anchor point")
        vals[e] = float(np.asarray(ubar(cls.anchors[int(e)][None, :])).ravel()[0])
    return BoundaryControl(mesh, vals)


def postprocess(p_h: FeFunction, nu: float, ua: float, ub: float) -> PostprocessedControl:
    """The projection clamp(-p_h / nu) of the discrete adjoint trace."""
    if nu <= 0:
        raise ValueError("nu must be positive")
    return PostprocessedControl(p_h.mesh, -p_h.values / nu, ua, ub)


def clamp_kinks(mesh: GradedMesh, func: Callable, ua: float, ub: float, samples: int = 64) -> dict:
    """Edge parameters where clamp(func) has a kink (func crosses a bound)."""
    return {e: [t for t, _ in items]
            for e, items in bound_transitions(mesh, func, ua, ub, samples).items()}
