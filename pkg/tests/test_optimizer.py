import json
import math

import numpy as np
import pytest

from neumann_control.control import BoundaryControl, midpoint_interpolate_Rh
from neumann_control.errors import (
    ConfigurationError,
    IndefiniteHessianError,
    PdasCyclingError,
    SqpConvergenceError,
)
from neumann_control.fem import FeFunction
from neumann_control.optimizer import (
    OptimalTriple,
    QuadraticModel,
    SqpConfig,
    check_discrete_optimality,
    pdas_solve_subproblem,
    projected_gradient_reference,
    sqp_solve,
)
from neumann_control.pde import DiscreteProblem, NewtonConfig, ProblemSpec


def l2g(mesh, v):
    return math.sqrt((mesh.edge_lengths * v * v).sum())


def first_model(spec, mesh, u=None):
    dp = DiscreteProblem(spec, mesh)
    u = np.zeros(mesh.n_edges) if u is None else u
    y = dp.solve_state(u).y
    p = dp.solve_adjoint(y)
    return QuadraticModel(u, dp.gradient_vector(u, p), dp.hessian_operator(y, p), mesh.edge_lengths, spec.nu)


def dense_projected_gradient(model, ua, ub, iters=100_000, tol=1e-15):
    """Projected gradient in the U_h metric on an explicitly assembled model."""
    H = np.column_stack([model.hessian(e) for e in np.eye(len(model.center))])
    D = model.edge_lengths
    S = H / np.sqrt(D)[:, None] / np.sqrt(D)[None, :]
    L = np.linalg.eigvalsh(0.5 * (S + S.T)).max()
    w = np.clip(model.center, ua, ub)
    for _ in range(iters):
        G = (H @ (w - model.center) + model.gradient) / D
        nxt = np.clip(w - G / L, ua, ub)
        if np.abs(nxt - w).max() <= tol:
            return nxt
        w = nxt
    return w


def test_config_validation():
    with pytest.raises(ConfigurationError):
        SqpConfig(tol=0.0)
    with pytest.raises(ConfigurationError):
        SqpConfig(cg_tol=-1.0)


def test_unbounded_subproblem_matches_dense_solve(bench, coarse_mesh):
    model = first_model(bench.spec, coarse_mesh)
    res = pdas_solve_subproblem(model, -1e30, 1e30, model.center, cg_tol=1e-14)
    H = np.column_stack([model.hessian(e) for e in np.eye(coarse_mesh.n_edges)])
    direct = model.center - np.linalg.solve(H, model.gradient)
    assert np.abs(res.u - direct).max() <= 1e-9
    assert not res.active.any()


def test_equal_bounds_return_constant(bench, coarse_mesh):
    model = first_model(bench.spec, coarse_mesh)
    res = pdas_solve_subproblem(model, 0.25, 0.25, model.center)
    np.testing.assert_array_equal(res.u, 0.25)
    assert res.iterations == 0 and res.active.all()


def test_benchmark_subproblem_against_projected_gradient(bench, coarse_mesh):
    model = first_model(bench.spec, coarse_mesh)
    res = pdas_solve_subproblem(model, -0.8, 0.8, model.center, cg_tol=1e-14)
    changes = sum(not np.array_equal(a, b) for a, b in zip(res.active_history[:-1], res.active_history[1:]))
    assert res.converged and changes <= 6
    ref = dense_projected_gradient(model, -0.8, 0.8)
    assert np.abs(res.u - ref).max() <= 1e-7
    # no active set is visited twice before the fixed point
    seen = [h.tobytes() for h in res.active_history[:-1]]
    assert len(seen) == len(set(seen))
    # complementarity of the returned point
    G = model.rep_gradient(res.u)
    free = res.active == 0
    assert np.abs(G[free]).max() <= 1e-8
    assert np.all(G[res.active == 1] <= 1e-12) and np.all(G[res.active == -1] >= -1e-12)


def test_pdas_cap_raises_with_best_iterate(bench, coarse_mesh):
    # this subproblem needs two active-set updates
    model = first_model(bench.spec, coarse_mesh)
    with pytest.raises(PdasCyclingError) as info:
        pdas_solve_subproblem(model, -0.8, 0.8, model.center, max_iter=1)
    assert info.value.best.shape == (coarse_mesh.n_edges,)
    assert len(info.value.history) == 2


def test_negative_curvature_detected(coarse_mesh):
    n = coarse_mesh.n_edges
    model = QuadraticModel(np.zeros(n), np.ones(n), lambda v: -v, coarse_mesh.edge_lengths, 1.0)
    with pytest.raises(IndefiniteHessianError):
        pdas_solve_subproblem(model, -1.0, 1.0, np.zeros(n), active=np.zeros(n, dtype=np.int8))


def test_linear_problem_one_step(coarse_mesh):
    spec = ProblemSpec(d=lambda x, y: y, d_y=lambda x, y: np.ones_like(y), d_yy=lambda x, y: np.zeros_like(y),
                       y_d=lambda x: 2.0 + x[:, 0], ua=-0.5, ub=0.5)
    tr = sqp_solve(spec, coarse_mesh)
    assert tr.outer_iterations <= 2
    assert tr.log[-1]["residual"] <= 1e-9
    assert check_discrete_optimality(spec, coarse_mesh, tr).passed


def test_benchmark_cold_and_warm_start(bench, coarse_mesh):
    cold = sqp_solve(bench.spec, coarse_mesh)
    assert cold.outer_iterations <= 8
    assert cold.log[-1]["residual"] < 1e-10
    assert cold.u.is_admissible(-0.8, 0.8)
    assert check_discrete_optimality(bench.spec, coarse_mesh, cold, 1e-8).passed
    warm = sqp_solve(bench.spec, coarse_mesh, u0=midpoint_interpolate_Rh(coarse_mesh, bench.ubar))
    assert warm.outer_iterations <= 3
    assert l2g(coarse_mesh, warm.u.values - cold.u.values) <= 1e-8
    again = sqp_solve(bench.spec, coarse_mesh, u0=cold.u)
    assert l2g(coarse_mesh, again.u.values - cold.u.values) <= 1e-10
    # cost decrease over the final iterates
    J = [e["J_h"] for e in cold.log][-3:]
    assert all(b <= a + 1e-12 for a, b in zip(J[:-1], J[1:]))


def test_log_is_json_lines(bench, tiny_mesh):
    tr = sqp_solve(bench.spec, tiny_mesh)
    lines = tr.log_jsonl().splitlines()
    assert len(lines) == tr.outer_iterations
    keys = {"outer_iter", "residual", "J_h", "active_lower", "active_upper", "pdas_iters"}
    for k, line in enumerate(lines, 1):
        rec = json.loads(line)
        assert set(rec) == keys and rec["outer_iter"] == k


def test_outer_cap(bench, coarse_mesh):
    with pytest.raises(SqpConvergenceError) as info:
        sqp_solve(bench.spec, coarse_mesh, SqpConfig(max_outer=1))
    assert len(info.value.log) == 1


def test_infeasible_start_is_clamped(bench, tiny_mesh):
    tr = sqp_solve(bench.spec, tiny_mesh, u0=BoundaryControl(tiny_mesh, 5.0))
    assert tr.u.is_admissible(-0.8, 0.8)


def test_matches_projected_gradient_reference(bench, tiny_mesh):
    assert tiny_mesh.n_edges <= 40
    tr = sqp_solve(bench.spec, tiny_mesh)
    ref = projected_gradient_reference(DiscreteProblem(bench.spec, tiny_mesh), newton=NewtonConfig(tol=1e-13))
    assert l2g(tiny_mesh, tr.u.values - ref) <= 1e-6


def _triple(mesh, u, pval):
    n = mesh.n_vertices
    return OptimalTriple(BoundaryControl(mesh, u), FeFunction(mesh, np.zeros(n)), FeFunction(mesh, np.full(n, pval)))


def test_optimality_report_cases(tiny_mesh):
    spec = ProblemSpec(d=lambda x, y: y, d_y=lambda x, y: np.ones_like(y), d_yy=lambda x, y: np.zeros_like(y),
                       y_d=lambda x: np.zeros(len(x)), ua=-0.8, ub=0.8)
    n = tiny_mesh.n_edges
    # interior value with I_E = 0
    assert check_discrete_optimality(spec, tiny_mesh, _triple(tiny_mesh, np.full(n, 0.3), -0.3)).passed
    # lower bound with I_E > 0
    rep = check_discrete_optimality(spec, tiny_mesh, _triple(tiny_mesh, np.full(n, -0.8), 1.5))
    assert rep.passed and rep.lower == 0.0
    # interior value with I_E = 0.1 |E|
    rep = check_discrete_optimality(spec, tiny_mesh, _triple(tiny_mesh, np.full(n, 0.3), -0.2), tol=1e-8)
    assert not rep.passed
    assert rep.inactive == pytest.approx(0.1, abs=1e-12)
    # upper bound with the wrong multiplier sign
    rep = check_discrete_optimality(spec, tiny_mesh, _triple(tiny_mesh, np.full(n, 0.8), 0.0))
    assert not rep.passed and rep.upper == pytest.approx(0.8)


def test_sqp_keeps_pdas_failure_payload(bench, coarse_mesh):
    with pytest.raises(PdasCyclingError) as info:
        sqp_solve(bench.spec, coarse_mesh, SqpConfig(pdas_max_iter=1))
    assert str(info.value).startswith("outer iteration 1")
    assert info.value.best is not None and info.value.history
