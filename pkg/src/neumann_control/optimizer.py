"""SQP for the fully discrete problem with a primal-dual active set inner solver."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .control import BoundaryControl, check_bounds
from .errors import ConfigurationError, IndefiniteHessianError, PdasCyclingError, SqpConvergenceError
from .fem import FeFunction
from .mesh import GradedMesh
from .pde import DiscreteProblem, NewtonConfig, ProblemSpec

log = logging.getLogger(__name__)


@dataclass
class SqpConfig:
    max_outer: int = 25
    tol: float = 1e-10
    pdas_max_iter: int = 50
    cg_tol: float = 1e-10
    cg_max_iter: int = 200
    newton: NewtonConfig = field(default_factory=NewtonConfig)

    def __post_init__(self):
        if self.tol <= 0 or self.cg_tol <= 0:
            raise ConfigurationError("tolerances must be positive")


@dataclass
class QuadraticModel:
    """q(w) = g.(w - c) + 1/2 (w - c).H(w - c) over edge vectors.

    ``gradient`` and ``hessian`` are Euclidean (coefficient) objects; the U_h
    representative of the model gradient is ``(H(w - c) + g) / |E|``.
    """

    center: np.ndarray
    gradient: np.ndarray
    hessian: Callable
    edge_lengths: np.ndarray
    nu: float

    def rep_gradient(self, w: np.ndarray) -> np.ndarray:
        return (self.hessian(w - self.center) + self.gradient) / self.edge_lengths

    def value(self, w: np.ndarray) -> float:
        d = w - self.center
        return float(self.gradient @ d + 0.5 * d @ self.hessian(d))


@dataclass
class PdasResult:
    u: np.ndarray
    iterations: int
    active_history: list
    converged: bool
    cg_iterations: int = 0

    @property
    def active(self) -> np.ndarray:
        return self.active_history[-1]


def pcg(matvec: Callable, b: np.ndarray, precond: np.ndarray, tol: float, maxiter: int):
    """Preconditioned CG with a negative-curvature check.

    Returns (x, iterations); ``precond`` is the inverse diagonal.
    """
    x = np.zeros_like(b)
    r = b.copy()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return x, 0
    z = precond * r
    d = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        Ad = matvec(d)
        curv = d @ Ad
        if curv <= 0.0:
            raise IndefiniteHessianError(f"non-positive curvature {curv:.3e} in reduced Hessian")
        alpha = rz / curv
        x += alpha * d
        r -= alpha * Ad
        if np.linalg.norm(r) <= tol * bnorm:
            return x, it
        z = precond * r
        rz_new = r @ z
        d = z + (rz_new / rz) * d
        rz = rz_new
    return x, maxiter


def _active_state(w, G, c, ua, ub):
    trial = w - G / c
    return np.where(trial > ub, 1, np.where(trial < ua, -1, 0)).astype(np.int8)


def pdas_solve_subproblem(model: QuadraticModel, ua: float, ub: float, start,
                          active: Optional[np.ndarray] = None, max_iter: int = 50,
                          cg_tol: float = 1e-10, cg_max_iter: int = 200) -> PdasResult:
    """Primal-dual active set method for min q(w) s.t. ua <= w <= ub.

    Active sets follow ``A+ = {w - G/nu > ub}``, ``A- = {w - G/nu < ua}`` with
    ``G`` the U_h representative of the model gradient; on the inactive set the
    reduced system is solved by Jacobi-preconditioned CG.  Bounds at or beyond
    ``1e30`` in magnitude are never active.
    """
    check_bounds(ua, ub)
    w = np.clip(np.asarray(getattr(start, "values", start), dtype=float), ua, ub)
    n = len(w)
    if ua == ub:
        return PdasResult(np.full(n, ua), 0, [np.ones(n, dtype=np.int8)], True)
    c = model.nu
    precond = 1.0 / (model.nu * model.edge_lengths)
    state = active if active is not None else _active_state(w, model.rep_gradient(w), c, ua, ub)
    state = np.asarray(state, dtype=np.int8).copy()
    history = [state.copy()]
    total_cg = 0
    for it in range(1, max_iter + 1):
        w = w.copy()
        w[state == 1] = ub
        w[state == -1] = ua
        free = np.flatnonzero(state == 0)
        if free.size:
            delta = w - model.center
            delta[free] = 0.0
            rhs = -(model.gradient + model.hessian(delta))[free]

            def restricted(v, free=free):
                full = np.zeros(n)
                full[free] = v
                return model.hessian(full)[free]

            sol, k = pcg(restricted, rhs, precond[free], cg_tol, cg_max_iter)
            total_cg += k
            w[free] = model.center[free] + sol
        G = model.rep_gradient(w)
        new_state = _active_state(w, G, c, ua, ub)
        history.append(new_state.copy())
        if np.array_equal(new_state, state):
            return PdasResult(w, it, history, True, total_cg)
        state = new_state
    raise PdasCyclingError(f"PDAS reached {max_iter} iterations without a fixed point",
                           best=w, history=history)


@dataclass
class OptimalTriple:
    u: BoundaryControl
    y: FeFunction
    p: FeFunction
    log: list = field(default_factory=list)

    @property
    def outer_iterations(self) -> int:
        return len(self.log)

    def log_jsonl(self) -> str:
        return "".join(json.dumps(entry) + "\n" for entry in self.log)


def _l2_gamma(lengths: np.ndarray, v: np.ndarray) -> float:
    return float(np.sqrt((lengths * v * v).sum()))


def sqp_solve(spec: ProblemSpec, mesh: GradedMesh, cfg: SqpConfig | None = None, u0=None,
              problem: DiscreteProblem | None = None, y0: FeFunction | None = None) -> OptimalTriple:
    """SQP on the reduced discrete problem.

    Each outer step builds the quadratic model from the reduced gradient and
    the full reduced Hessian at the current control, solves it with PDAS
    (warm-started from the previous active set) and stops once the control
    update is below ``cfg.tol`` in L2(Gamma).
    """
    cfg = cfg or SqpConfig()
    dp = problem or DiscreteProblem(spec, mesh)
    lengths = mesh.edge_lengths
    if u0 is None:
        u = np.zeros(mesh.n_edges)
    else:
        u = np.asarray(getattr(u0, "values", u0), dtype=float)
        if u.ndim == 0:
            u = np.full(mesh.n_edges, float(u))
    u = np.clip(u, spec.ua, spec.ub)
    y_guess = None if y0 is None else y0.values
    active = None
    entries = []
    for k in range(1, cfg.max_outer + 1):
        y = dp.solve_state(u, cfg.newton, y_guess).y
        K = dp.linearized_factor(y)
        p = dp.solve_adjoint(y, K)
        H = dp.hessian_operator(y, p, K)
        model = QuadraticModel(u, dp.gradient_vector(u, p), H, lengths, spec.nu)
        try:
            res = pdas_solve_subproblem(model, spec.ua, spec.ub, u, active,
                                        cfg.pdas_max_iter, cfg.cg_tol, cfg.cg_max_iter)
        except PdasCyclingError as exc:
            raise PdasCyclingError(f"outer iteration {k}: {exc}", exc.best, exc.history) from exc
        except IndefiniteHessianError as exc:
            raise IndefiniteHessianError(f"outer iteration {k}: {exc}") from exc
        step = _l2_gamma(lengths, res.u - u)
        entry = {
            "outer_iter": k,
            "residual": step,
            "J_h": dp.cost(u, y),
            "active_lower": int(np.count_nonzero(res.active == -1)),
            "active_upper": int(np.count_nonzero(res.active == 1)),
            "pdas_iters": res.iterations,
        }
        entries.append(entry)
        log.debug(json.dumps(entry))
        u, active, y_guess = res.u, res.active, y.values
        if step <= cfg.tol:
            break
    else:
        raise SqpConvergenceError(f"SQP did not converge in {cfg.max_outer} outer iterations", entries)
    y = dp.solve_state(u, cfg.newton, y_guess).y
    p = dp.solve_adjoint(y)
    return OptimalTriple(BoundaryControl(mesh, u), y, p, entries)


@dataclass
class OptimalityReport:
    passed: bool
    inactive: float
    lower: float
    upper: float
    worst_edge: int

    @property
    def max_violation(self) -> float:
        return max(self.inactive, self.lower, self.upper)


def check_discrete_optimality(spec: ProblemSpec, mesh: GradedMesh, triple: OptimalTriple,
                              tol: float = 1e-8) -> OptimalityReport:
    """Edgewise sign test of the discrete variational inequality.

    With ``I_E = int_E (p_h + nu u_h)``: inactive edges need ``|I_E| <= tol |E|``,
    edges at the lower bound ``I_E >= -tol |E|`` and at the upper bound
    ``I_E <= tol |E|``.  Violations are reported per unit length.
    """
    u = triple.u.values
    be = mesh.boundary_edges
    q = 0.5 * (triple.p.values[be[:, 0]] + triple.p.values[be[:, 1]]) + spec.nu * u
    at_lo = np.abs(u - spec.ua) <= 1e-12 * max(1.0, abs(spec.ua))
    at_hi = np.abs(u - spec.ub) <= 1e-12 * max(1.0, abs(spec.ub))
    inner = ~(at_lo | at_hi)
    viol = np.zeros(len(u))
    viol[inner] = np.abs(q[inner])
    viol[at_lo] = np.maximum(0.0, -q[at_lo])
    viol[at_hi] = np.maximum(0.0, q[at_hi])
    worst = int(np.argmax(viol)) if len(u) else -1
    vmax = lambda m: float(viol[m].max()) if m.any() else 0.0
    report = OptimalityReport(bool(viol.max() <= tol), vmax(inner), vmax(at_lo), vmax(at_hi), worst)
    return report


def projected_gradient_reference(problem: DiscreteProblem, u0=None, max_iter: int = 100_000,
                                 tol: float = 1e-13, newton: NewtonConfig | None = None) -> np.ndarray:
    """Reference optimizer independent of the Hessian and of PDAS.

    Iterates ``u <- clamp(u - G(u) / L)`` with ``G`` the U_h gradient
    representative and ``L`` a power-iteration estimate of its Lipschitz
    constant obtained from finite differences of ``G``.
    """
    spec, mesh = problem.spec, problem.mesh
    newton = newton or NewtonConfig(tol=1e-13)
    lengths = mesh.edge_lengths

    def grad(u):
        y = problem.solve_state(u, newton).y
        p = problem.solve_adjoint(y)
        return problem.gradient_vector(u, p) / lengths

    u = np.zeros(mesh.n_edges) if u0 is None else np.clip(np.asarray(u0, dtype=float), spec.ua, spec.ub)
    g0 = grad(u)
    rng = np.random.default_rng(0)
    v = rng.standard_normal(mesh.n_edges)
    L = spec.nu
    eps = 1e-4
    for _ in range(30):
        v /= _l2_gamma(lengths, v)
        Gv = (grad(u + eps * v) - g0) / eps
        L = float((lengths * v * Gv).sum())
        v = Gv
    step = 1.0 / (1.05 * L)
    for _ in range(max_iter):
        u_new = np.clip(u - step * grad(u), spec.ua, spec.ub)
        if _l2_gamma(lengths, u_new - u) <= tol:
            return u_new
        u = u_new
    return u
