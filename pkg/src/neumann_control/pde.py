"""Discrete state, linearized state and adjoint equations; reduced derivatives.

All equations share the weak form a(y, v) + int d(x, y) v = ... with P1
elements; the nonlinearity and every volume integral are evaluated with the
same degree-4 rule, so the discrete gradient and Hessian are the exact
derivatives of the discrete cost.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .control import BoundaryControl, check_bounds
from .errors import ConfigurationError, NewtonConvergenceError, NewtonDivergenceError
from .fem import (
    VOLUME_DEGREE,
    FeFunction,
    SpdFactor,
    assemble_mass,
    assemble_stiffness,
    assemble_weighted_mass,
    boundary_control_matrix,
    integrate_boundary_load,
    integrate_volume_load,
    quadrature_points,
)
from .mesh import GradedMesh
from .quadrature import triangle_rule

log = logging.getLogger(__name__)


@dataclass
class ProblemSpec:
    """Data of the control problem.

    ``d``, ``d_y``, ``d_yy`` and ``y_d``/``f`` take points of shape (N, 2)
    (and state values of shape (N,)); the boundary data ``g1`` (Neumann offset)
    and ``g2`` (boundary cost density) take points and outward normals.
    ``boundary_kinks(mesh)`` may return the edge parameters where g1/g2 are
    not smooth.
    """

    d: Callable
    d_y: Callable
    d_yy: Callable
    y_d: Callable
    nu: float = 1.0
    ua: float = -1e30
    ub: float = 1e30
    f: Optional[Callable] = None
    g1: Optional[Callable] = None
    g2: Optional[Callable] = None
    boundary_kinks: Optional[Callable] = None
    name: str = ""

    def __post_init__(self):
        if not self.nu > 0:
            raise ConfigurationError(f"nu must be positive, got {self.nu}")
        check_bounds(self.ua, self.ub)

    def check_monotone(self, points: np.ndarray, states: np.ndarray) -> bool:
        return bool(np.all(self.d_y(points, states) >= 0.0))

    def fd_mismatch(self, points: np.ndarray, states: np.ndarray, eps: float = 1e-5) -> float:
        """Largest gap between d_y and a central difference of d."""
        fd = (self.d(points, states + eps) - self.d(points, states - eps)) / (2 * eps)
        return float(np.abs(fd - self.d_y(points, states)).max())


@dataclass
class NewtonConfig:
    tol: float = 1e-11
    max_iter: int = 30
    initial: str = "zero"

    def __post_init__(self):
        if not self.tol > 0:
            raise ConfigurationError("Newton tolerance must be positive")


@dataclass
class NewtonResult:
    y: FeFunction
    history: list = field(default_factory=list)
    factor: Optional[SpdFactor] = None  # Jacobian of the last Newton step

    @property
    def iterations(self) -> int:
        return len(self.history) - 1


def _ctrl_values(mesh, u) -> np.ndarray:
    if isinstance(u, BoundaryControl):
        return u.values
    if np.ndim(u) == 0:
        return np.full(mesh.n_edges, float(u))
    return np.asarray(u, dtype=float)


class DiscreteProblem:
    """Assembled operators of (spec, mesh), reused by all solves."""

    def __init__(self, spec: ProblemSpec, mesh: GradedMesh):
        self.spec = spec
        self.mesh = mesh
        self.rule = triangle_rule(VOLUME_DEGREE)
        self.xq = quadrature_points(mesh, self.rule).reshape(-1, 2)
        self.nq = len(self.rule.weights)
        # quadrature weight times area, (ntri, nq)
        self.wq = mesh.areas[:, None] * self.rule.weights[None, :]
        self.A = assemble_stiffness(mesh)
        self.M = assemble_mass(mesh)
        self.B = boundary_control_matrix(mesh)
        self.edge_lengths = mesh.edge_lengths
        kinks = spec.boundary_kinks(mesh) if spec.boundary_kinks is not None else None
        n = mesh.n_vertices
        self.f_load = integrate_volume_load(mesh, spec.f, self.rule) if spec.f is not None else np.zeros(n)
        self.g1_load = integrate_boundary_load(mesh, spec.g1, kinks) if spec.g1 is not None else np.zeros(n)
        self.g2_load = integrate_boundary_load(mesh, spec.g2, kinks) if spec.g2 is not None else np.zeros(n)
        self.yd_q = np.asarray(spec.y_d(self.xq), dtype=float).reshape(mesh.n_triangles, self.nq)
        self.yd_load = self._load_from_q(self.yd_q)

    # -- quadrature helpers -------------------------------------------------
    def _at_q(self, y: np.ndarray) -> np.ndarray:
        return y[self.mesh.triangles] @ self.rule.points.T

    def _load_from_q(self, vals_q: np.ndarray) -> np.ndarray:
        local = (vals_q * self.wq) @ self.rule.points
        return np.bincount(self.mesh.triangles.ravel(), weights=local.ravel(), minlength=self.mesh.n_vertices)

    def _weighted_mass(self, w_q: np.ndarray, signed: bool = False) -> sp.csr_matrix:
        return assemble_weighted_mass(self.mesh, w_q, self.rule, signed)

    # -- state ----------------------------------------------------------------
    def state_rhs(self, u) -> np.ndarray:
        return self.B @ _ctrl_values(self.mesh, u) + self.g1_load + self.f_load

    def residual(self, y: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        yq = self._at_q(y)
        dq = self.spec.d(self.xq, yq.ravel()).reshape(yq.shape)
        return self.A @ y + self._load_from_q(dq) - rhs

    def jacobian(self, y: np.ndarray) -> sp.csr_matrix:
        yq = self._at_q(y)
        w = self.spec.d_y(self.xq, yq.ravel()).reshape(yq.shape)
        return (self.A + self._weighted_mass(w)).tocsr()

    def solve_state(self, u, cfg: NewtonConfig | None = None, y0=None) -> NewtonResult:
        """Newton's method for the discrete semilinear state equation."""
        cfg = cfg or NewtonConfig()
        rhs = self.state_rhs(u)
        y = np.zeros(self.mesh.n_vertices) if y0 is None else np.array(
            y0.values if isinstance(y0, FeFunction) else y0, dtype=float)
        history = []
        factor = None
        for it in range(cfg.max_iter + 1):
            r = self.residual(y, rhs)
            rn = float(np.linalg.norm(r))
            history.append(rn)
            if not np.isfinite(rn):
                raise NewtonDivergenceError("non-finite Newton residual", history)
            if rn <= cfg.tol:
                break
            if it == cfg.max_iter:
                raise NewtonConvergenceError(
                    f"Newton did not converge in {cfg.max_iter} iterations (|R| = {rn:.3e})", history)
            factor = SpdFactor(self.jacobian(y))
            y = y - factor.solve(r)
        log.debug("newton residuals %s", history)
        return NewtonResult(FeFunction(self.mesh, y), history, None)

    def linearized_factor(self, y: FeFunction) -> SpdFactor:
        return SpdFactor(self.jacobian(y.values))

    def solve_linearized_state(self, y: FeFunction, v, factor: SpdFactor | None = None) -> FeFunction:
        """a(z, .) + int d_y(x, y) z . = int_Gamma v ."""
        factor = factor or self.linearized_factor(y)
        if callable(v):
            rhs = integrate_boundary_load(self.mesh, lambda x, n: v(x))
        else:
            rhs = self.B @ _ctrl_values(self.mesh, v)
        return FeFunction(self.mesh, factor.solve(rhs))

    def adjoint_rhs(self, y: FeFunction) -> np.ndarray:
        return self.M @ y.values - self.yd_load + self.g2_load

    def solve_adjoint(self, y: FeFunction, factor: SpdFactor | None = None) -> FeFunction:
        """a(p, .) + int d_y(x, y) p . = int (y - y_d) . + int_Gamma g2 ."""
        factor = factor or self.linearized_factor(y)
        return FeFunction(self.mesh, factor.solve(self.adjoint_rhs(y)))

    # -- reduced functional -----------------------------------------------------
    def cost(self, u, y: FeFunction | None = None, cfg: NewtonConfig | None = None) -> float:
        uv = _ctrl_values(self.mesh, u)
        if y is None:
            y = self.solve_state(uv, cfg).y
        diff = self._at_q(y.values) - self.yd_q
        track = 0.5 * float((diff ** 2 * self.wq).sum())
        reg = 0.5 * self.spec.nu * float((self.edge_lengths * uv ** 2).sum())
        return track + reg + float(self.g2_load @ y.values)

    def gradient_vector(self, u, p: FeFunction) -> np.ndarray:
        """Euclidean gradient of the reduced cost w.r.t. the edge values."""
        uv = _ctrl_values(self.mesh, u)
        return self.spec.nu * self.edge_lengths * uv + self.B.T @ p.values

    def reduced_gradient(self, u, cfg: NewtonConfig | None = None) -> BoundaryControl:
        """U_h representative nu u + Q_h p of the derivative."""
        y = self.solve_state(u, cfg).y
        p = self.solve_adjoint(y)
        return BoundaryControl(self.mesh, self.gradient_vector(u, p) / self.edge_lengths)

    def curvature_weight(self, y: FeFunction, p: FeFunction) -> np.ndarray:
        """Quadrature values of 1 - p d_yy(x, y), the Hessian volume weight."""
        yq = self._at_q(y.values)
        pq = self._at_q(p.values)
        return 1.0 - pq * self.spec.d_yy(self.xq, yq.ravel()).reshape(yq.shape)

    def hessian_operator(self, y: FeFunction, p: FeFunction, factor: SpdFactor | None = None) -> "ReducedHessian":
        factor = factor or self.linearized_factor(y)
        C = self._weighted_mass(self.curvature_weight(y, p), signed=True)
        return ReducedHessian(factor, C, self.B, self.spec.nu * self.edge_lengths)

    def apply_reduced_hessian(self, u, v1, v2, cfg: NewtonConfig | None = None) -> float:
        y = self.solve_state(u, cfg).y
        p = self.solve_adjoint(y)
        H = self.hessian_operator(y, p)
        return H.bilinear(_ctrl_values(self.mesh, v1), _ctrl_values(self.mesh, v2))


class ReducedHessian:
    """Matrix-free Hessian of the reduced cost on edge vectors.

    ``H v = B^T K^{-1} C K^{-1} B v + nu |E| v`` with ``K`` the linearized state
    operator and ``C`` the mass matrix weighted by ``1 - p d_yy``.
    """

    def __init__(self, factor: SpdFactor, C, B, reg_diag: np.ndarray):
        self.factor = factor
        self.C = C
        self.B = B
        self.reg_diag = reg_diag
        self.n = len(reg_diag)
        self.n_applications = 0

    def sensitivity(self, v: np.ndarray) -> np.ndarray:
        return self.factor.solve(self.B @ v)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        self.n_applications += 1
        z = self.sensitivity(v)
        return self.B.T @ self.factor.solve(self.C @ z) + self.reg_diag * v

    __call__ = matvec

    def bilinear(self, v1: np.ndarray, v2: np.ndarray) -> float:
        z1 = self.sensitivity(v1)
        z2 = self.sensitivity(v2)
        return float(z1 @ (self.C @ z2) + (self.reg_diag * v1 * v2).sum())

    def dense(self) -> np.ndarray:
        """Column-by-column assembly (small meshes only)."""
        cols = [self.matvec(e) for e in np.eye(self.n)]
        return np.column_stack(cols)


# -- functional interface -----------------------------------------------------
def solve_state(spec: ProblemSpec, mesh: GradedMesh, u, cfg: NewtonConfig | None = None, y0=None) -> FeFunction:
    return DiscreteProblem(spec, mesh).solve_state(u, cfg, y0).y


def solve_linearized_state(spec: ProblemSpec, mesh: GradedMesh, y_h: FeFunction, v) -> FeFunction:
    return DiscreteProblem(spec, mesh).solve_linearized_state(y_h, v)


def solve_adjoint(spec: ProblemSpec, mesh: GradedMesh, y_h: FeFunction) -> FeFunction:
    return DiscreteProblem(spec, mesh).solve_adjoint(y_h)


def reduced_gradient(spec: ProblemSpec, mesh: GradedMesh, u, cfg: NewtonConfig | None = None) -> BoundaryControl:
    return DiscreteProblem(spec, mesh).reduced_gradient(u, cfg)


def apply_reduced_hessian(spec: ProblemSpec, mesh: GradedMesh, u, v1, v2,
                          cfg: NewtonConfig | None = None) -> float:
    return DiscreteProblem(spec, mesh).apply_reduced_hessian(u, v1, v2, cfg)


def reduced_cost(spec: ProblemSpec, mesh: GradedMesh, u, cfg: NewtonConfig | None = None) -> float:
    return DiscreteProblem(spec, mesh).cost(u, cfg=cfg)
