import math
import warnings
from math import factorial

import numpy as np
import pytest
import scipy.sparse as sp

from neumann_control.control import BoundaryControl
from neumann_control.errors import AssemblyError, EvaluationError, SolverBreakdownError
from neumann_control.fem import (
    FeFunction,
    NegativeWeightWarning,
    assemble_boundary_mass,
    assemble_mass,
    assemble_stiffness,
    assemble_weighted_mass,
    integrate_boundary_load,
    integrate_volume_load,
    l2_error,
    solve_spd,
)
from neumann_control.mesh import GradedMesh
from neumann_control.quadrature import gauss_rule, split_triangle_rule, triangle_rule


def reference_triangle():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    return GradedMesh(verts, [[0, 1, 2]], [[0, 1, 0, 0], [1, 2, 0, 0], [2, 0, 0, 0]], 1.0)


def unit_square():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    tris = [[0, 1, 2], [0, 2, 3]]
    bedges = [[0, 1, 0, 0], [1, 2, 0, 0], [2, 3, 1, 0], [3, 0, 1, 0]]
    return GradedMesh(verts, tris, bedges, 1.0)


def _monomial_exact(a, b):
    return factorial(a) * factorial(b) / factorial(a + b + 2)


@pytest.mark.parametrize("degree", [4, 6, 8])
def test_triangle_rule_exactness(degree):
    rule = triangle_rule(degree)
    x, y = rule.points[:, 1], rule.points[:, 2]
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-15)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            approx = 0.5 * (rule.weights * x ** a * y ** b).sum()
            assert approx == pytest.approx(_monomial_exact(a, b), abs=1e-14)


def test_split_rule_keeps_exactness():
    rule = split_triangle_rule(triangle_rule(4), 2)
    x, y = rule.points[:, 1], rule.points[:, 2]
    assert len(rule.weights) == 16 * 6
    for a in range(5):
        for b in range(5 - a):
            assert 0.5 * (rule.weights * x ** a * y ** b).sum() == pytest.approx(_monomial_exact(a, b), abs=1e-14)


@pytest.mark.parametrize("n", [1, 3, 7])
def test_gauss_rule_exactness(n):
    rule = gauss_rule(n)
    for k in range(2 * n):
        assert (rule.weights * rule.points ** k).sum() == pytest.approx(1 / (k + 1), abs=1e-14)


def test_reference_element_matrices():
    mesh = reference_triangle()
    K = assemble_stiffness(mesh).toarray()
    np.testing.assert_allclose(K, [[1, -.5, -.5], [-.5, .5, 0], [-.5, 0, .5]], atol=1e-15)
    M = assemble_mass(mesh).toarray()
    np.testing.assert_allclose(M, (0.5 / 12) * np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]), atol=1e-15)


def test_two_triangle_assembly_matches_hand_sum():
    K = assemble_stiffness(unit_square()).toarray()
    # element (0,1,2): right angle at 1; element (0,2,3): right angle at 3
    e1 = np.array([[.5, -.5, 0], [-.5, 1, -.5], [0, -.5, .5]])
    e2 = np.array([[.5, 0, -.5], [0, .5, -.5], [-.5, -.5, 1]])
    expected = np.zeros((4, 4))
    expected[np.ix_([0, 1, 2], [0, 1, 2])] += e1
    expected[np.ix_([0, 2, 3], [0, 2, 3])] += e2
    np.testing.assert_allclose(K, expected, atol=1e-15)


def test_row_sums_and_symmetry(coarse_mesh, rng):
    A = assemble_stiffness(coarse_mesh)
    assert abs(A @ np.ones(coarse_mesh.n_vertices)).max() <= 1e-12
    w = 1.0 + rng.random((coarse_mesh.n_triangles, 6))
    for mat in (A, assemble_mass(coarse_mesh), assemble_weighted_mass(coarse_mesh, w),
                assemble_boundary_mass(coarse_mesh)):
        diff = abs(mat - mat.T).max()
        assert diff <= 1e-13 * abs(mat).max()


def test_weighted_mass_special_weights(coarse_mesh):
    M = assemble_mass(coarse_mesh)
    Z = assemble_weighted_mass(coarse_mesh, lambda x: np.zeros(len(x)))
    assert abs(Z).max() == 0.0
    yh = np.ones(coarse_mesh.n_vertices)
    w = 3.0 * FeFunction(coarse_mesh, yh).at_quadrature(triangle_rule(4)) ** 2 + 1.0
    assert abs(assemble_weighted_mass(coarse_mesh, w) - 4.0 * M).max() <= 1e-15


def test_negative_weight_warns(coarse_mesh):
    with pytest.warns(NegativeWeightWarning):
        assemble_weighted_mass(coarse_mesh, lambda x: -np.ones(len(x)))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assemble_weighted_mass(coarse_mesh, lambda x: -np.ones(len(x)), signed=True)


def test_degenerate_triangle_rejected():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    mesh = GradedMesh(verts, [[0, 1, 2]], [[0, 1, 0, 0]], 1.0)
    with pytest.raises(AssemblyError):
        assemble_mass(mesh)


def test_boundary_mass():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    mesh = GradedMesh(verts, [[0, 1, 2]], [[0, 1, 0, 0]], 1.0)
    np.testing.assert_allclose(assemble_boundary_mass(mesh).toarray()[:2, :2], [[1 / 3, 1 / 6], [1 / 6, 1 / 3]])


def test_boundary_mass_total_is_perimeter(coarse_mesh):
    assert assemble_boundary_mass(coarse_mesh).sum() == pytest.approx(8.0, abs=1e-12)


def test_volume_loads(coarse_mesh):
    assert integrate_volume_load(coarse_mesh, lambda x: np.ones(len(x))).sum() == pytest.approx(3.0, abs=1e-12)
    assert not integrate_volume_load(coarse_mesh, lambda x: np.zeros(len(x))).any()
    with pytest.raises(EvaluationError):
        integrate_volume_load(coarse_mesh, lambda x: np.full(len(x), np.nan))


def test_volume_load_degree_self_comparison():
    verts = np.array([[0.6, 0.2], [0.9, 0.3], [0.7, 0.55]])
    mesh = GradedMesh(verts, [[0, 1, 2]], [[0, 1, 0, 0]], 0.3)

    def f(x):
        r = np.hypot(x[:, 0], x[:, 1])
        phi = np.mod(np.arctan2(x[:, 1], x[:, 0]), 2 * np.pi)
        return r ** (2 / 3) * np.cos(2 / 3 * phi)

    lo = integrate_volume_load(mesh, f, triangle_rule(4))
    hi = integrate_volume_load(mesh, f, triangle_rule(8))
    assert np.abs(lo - hi).max() / np.abs(hi).max() < 1e-6


def test_boundary_loads(coarse_mesh):
    one = integrate_boundary_load(coarse_mesh, lambda x, n: np.ones(len(x)))
    assert one.sum() == pytest.approx(8.0, abs=1e-12)
    vals = np.zeros(coarse_mesh.n_edges)
    e = int(np.argmin(np.abs(coarse_mesh.edge_lengths - 0.5)))
    vals[e] = 2.0
    load = integrate_boundary_load(coarse_mesh, BoundaryControl(coarse_mesh, vals))
    v0, v1 = coarse_mesh.boundary_edges[e, :2]
    L = coarse_mesh.edge_lengths[e]
    assert load[v0] == pytest.approx(L) and load[v1] == pytest.approx(L)
    assert np.count_nonzero(load) == 2


def test_linear_boundary_load_exact(coarse_mesh):
    # g = x + 2y is linear on every edge; exact load via the boundary mass
    g = lambda x, n: x[:, 0] + 2 * x[:, 1]
    exact = assemble_boundary_mass(coarse_mesh) @ (coarse_mesh.vertices[:, 0] + 2 * coarse_mesh.vertices[:, 1])
    np.testing.assert_allclose(integrate_boundary_load(coarse_mesh, g), exact, atol=1e-14)


def test_solve_spd_cases(coarse_mesh, rng):
    M = assemble_mass(coarse_mesh)
    x = solve_spd(M, M @ np.ones(coarse_mesh.n_vertices))
    assert np.abs(x - 1).max() <= 1e-10
    with pytest.raises(SolverBreakdownError):
        solve_spd(assemble_stiffness(coarse_mesh), np.zeros(coarse_mesh.n_vertices))
    B = sp.random(50, 50, density=0.1, random_state=3)
    A = (B @ B.T + 50 * sp.eye(50)).tocsr()
    xs = rng.standard_normal(50)
    assert np.abs(solve_spd(A, A @ xs) - xs).max() <= 1e-9


def test_patch_test_two_triangles():
    mesh = unit_square()
    grad = np.array([0.7, -1.3])
    w = 0.2 + mesh.vertices @ grad
    A = assemble_stiffness(mesh)
    flux = np.zeros(4)
    for L, n, (v0, v1) in zip(mesh.edge_lengths, mesh.edge_normals, mesh.boundary_edges[:, :2]):
        flux[[v0, v1]] += 0.5 * L * (grad @ n)
    np.testing.assert_allclose(A @ w, flux, atol=1e-12)


def test_galerkin_orthogonality(coarse_mesh, rng):
    f = lambda x: np.sin(3 * x[:, 0]) * np.cos(x[:, 1])
    S = assemble_stiffness(coarse_mesh) + assemble_mass(coarse_mesh)
    F = integrate_volume_load(coarse_mesh, f)
    phi = solve_spd(S, F)
    for _ in range(20):
        v = rng.standard_normal(coarse_mesh.n_vertices)
        assert v @ (S @ phi) == pytest.approx(v @ F, abs=1e-10)


def test_fe_function_evaluation(coarse_mesh):
    lin = lambda x: 1.0 - 2.0 * x[:, 0] + 0.5 * x[:, 1]
    fh = FeFunction.interpolate(coarse_mesh, lin)
    pts = np.array([[0.3, 0.7], [-0.4, -0.9], [0.95, 0.01]])
    np.testing.assert_allclose(fh(pts), lin(pts), atol=1e-13)
    with pytest.raises(EvaluationError):
        fh(np.array([[0.5, -0.5]]))
    with pytest.raises(ValueError):
        FeFunction(coarse_mesh, np.zeros(3))


def test_l2_error_basics(coarse_mesh):
    smooth = lambda x: np.sin(x[:, 0]) + x[:, 1] ** 2
    fh = FeFunction.interpolate(coarse_mesh, smooth)
    # the exact function taken as the interpolant itself
    assert l2_error(coarse_mesh, fh, fh) <= 1e-13
    assert l2_error(coarse_mesh, fh, fh, region="boundary") <= 1e-13
    ones = FeFunction(coarse_mesh, np.ones(coarse_mesh.n_vertices))
    assert l2_error(coarse_mesh, ones, lambda x: np.zeros(len(x))) == pytest.approx(math.sqrt(3), abs=1e-12)
    assert l2_error(coarse_mesh, ones, lambda x: np.zeros(len(x)), "boundary") == pytest.approx(math.sqrt(8), abs=1e-12)
    with pytest.raises(ValueError):
        l2_error(coarse_mesh, ones, smooth, region="volume")
