"""The sector benchmark with known solution and the convergence-study driver."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .control import (
    classify_edges,
    clamp_kinks,
    modified_interpolate_Rhu,
    postprocess,
)
from .errors import ConfigurationError, EocDomainError, InvalidAngleError, NeumannControlError
from .fem import l2_error
from .mesh import GradedMesh, build_sector_domain, generate_graded_mesh, validate_grading
from .optimizer import SqpConfig, check_discrete_optimality, sqp_solve
from .pde import ProblemSpec

log = logging.getLogger(__name__)

UA, UB = -0.8, 0.8


def polar(points: np.ndarray, omega: float):
    """Radius and angle in (-(2pi - omega)/2, (omega + 2pi)/2]."""
    x, y = points[:, 0], points[:, 1]
    r = np.hypot(x, y)
    phi = np.mod(np.arctan2(y, x), 2 * np.pi)
    phi = np.where(phi > 0.5 * (omega + 2 * np.pi), phi - 2 * np.pi, phi)
    return r, phi


@dataclass
class BenchmarkProblem:
    """-Lap y + y + y^3 = f with the singular solution r^lam cos(lam phi)."""

    omega: float
    spec: ProblemSpec = field(repr=False)

    @property
    def lam(self) -> float:
        return math.pi / self.omega

    def ybar(self, points) -> np.ndarray:
        r, phi = polar(np.atleast_2d(points), self.omega)
        return r ** self.lam * np.cos(self.lam * phi)

    def grad_ybar(self, points) -> np.ndarray:
        r, phi = polar(np.atleast_2d(points), self.omega)
        lam = self.lam
        with np.errstate(divide="ignore", invalid="ignore"):
            s = lam * r ** (lam - 1.0)
        return np.column_stack([s * np.cos((lam - 1.0) * phi), -s * np.sin((lam - 1.0) * phi)])

    def dn_ybar(self, points, normals) -> np.ndarray:
        return (self.grad_ybar(points) * normals).sum(axis=1)

    def pbar(self, points) -> np.ndarray:
        return -self.ybar(points)

    def ubar(self, points) -> np.ndarray:
        return np.clip(self.ybar(points), self.spec.ua, self.spec.ub)

    def ubar_kinks(self, mesh: GradedMesh) -> dict:
        return clamp_kinks(mesh, self.ybar, self.spec.ua, self.spec.ub)


def build_benchmark(omega: float) -> BenchmarkProblem:
    if not 0.0 < omega < 2 * math.pi:
        raise InvalidAngleError(f"omega must lie in (0, 2pi), got {omega}")
    holder = {}

    def yb(x):
        return holder["p"].ybar(x)

    def f(x):
        v = yb(x)
        return v + v ** 3

    def y_d(x):
        v = yb(x)
        return 2.0 * v + 3.0 * v ** 3

    def g1(x, n):
        return holder["p"].dn_ybar(x, n) - np.clip(yb(x), UA, UB)

    def g2(x, n):
        return -holder["p"].dn_ybar(x, n)

    spec = ProblemSpec(
        d=lambda x, y: y + y ** 3,
        d_y=lambda x, y: 1.0 + 3.0 * y ** 2,
        d_yy=lambda x, y: 6.0 * y,
        y_d=y_d, nu=1.0, ua=UA, ub=UB, f=f, g1=g1, g2=g2,
        boundary_kinks=lambda mesh: clamp_kinks(mesh, yb, UA, UB),
        name=f"sector benchmark omega={omega:.6f}",
    )
    prob = BenchmarkProblem(omega, spec)
    holder["p"] = prob
    return prob


def compute_eoc(errors, h_ratio: float = 2.0) -> list[float]:
    e = np.asarray(errors, dtype=float)
    if np.any(~(e > 0)):
        raise EocDomainError("EOC needs strictly positive errors")
    if not h_ratio > 1:
        raise ConfigurationError("h_ratio must exceed 1")
    return list(np.log(e[:-1] / e[1:]) / math.log(h_ratio))


COLUMNS = ["level", "h", "ndof_domain", "nedges_boundary", "err_u", "eoc_u", "err_y", "eoc_y",
           "err_p", "eoc_p", "err_superclose", "eoc_superclose", "meas_K1"]
ERROR_KEYS = ["err_u", "err_y", "err_p", "err_superclose"]


@dataclass
class LevelDiagnostics:
    optimality: float
    optimality_passed: bool
    grading_passed: bool
    grading_ratio: float
    outer_iterations: int
    seconds: float
    superclose_k2: float = 0.0  # supercloseness error restricted to K2 edges


@dataclass
class ConvergenceReport:
    """Rows ordered by decreasing h; ``eoc_*`` on row k refers to rows k, k+1."""

    omega: float
    mu: float
    rows: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    error: str | None = None

    def column(self, key: str) -> np.ndarray:
        return np.array([np.nan if r[key] is None else r[key] for r in self.rows], dtype=float)

    def fill_eoc(self) -> None:
        for key in ERROR_KEYS:
            eoc_key = "eoc_" + key[4:]
            vals = [r[key] for r in self.rows]
            for r in self.rows:
                r[eoc_key] = None
            for k in range(len(vals) - 1):
                a, b = vals[k], vals[k + 1]
                ratio = self.rows[k]["h"] / self.rows[k + 1]["h"]
                if a > 0 and b > 0:
                    self.rows[k][eoc_key] = float(compute_eoc([a, b], ratio)[0])
        self.rows = [{c: r[c] for c in COLUMNS} for r in self.rows]


def prolong_control(coarse: GradedMesh, values: np.ndarray, fine: GradedMesh) -> np.ndarray:
    """Edgewise constant transfer by boundary arclength from corner 0."""
    starts = coarse.edge_arclength
    s = fine.edge_arclength + 0.5 * fine.edge_lengths
    s *= coarse.edge_lengths.sum() / fine.edge_lengths.sum()
    idx = np.clip(np.searchsorted(starts, s, side="right") - 1, 0, coarse.n_edges - 1)
    return values[idx]


def solve_level(bench: BenchmarkProblem, mesh: GradedMesh, cfg: SqpConfig, u0=None):
    t0 = time.perf_counter()
    spec = bench.spec
    triple = sqp_solve(spec, mesh, cfg, u0)
    opt = check_discrete_optimality(spec, mesh, triple, tol=1e-8)
    cert = validate_grading(mesh)
    ut = postprocess(triple.p, spec.nu, spec.ua, spec.ub)
    kinks = bench.ubar_kinks(mesh)
    cls = classify_edges(mesh, bench.ybar, spec.ua, spec.ub)
    rhu = modified_interpolate_Rhu(mesh, bench.ubar, cls)
    row = {
        "level": 0,
        "h": mesh.h,
        "ndof_domain": mesh.n_vertices,
        "nedges_boundary": mesh.n_edges,
        "err_u": l2_error(mesh, ut, bench.ubar, "boundary", kinks),
        "err_y": l2_error(mesh, triple.y, bench.ybar, "domain"),
        "err_p": l2_error(mesh, triple.p, bench.pbar, "boundary"),
        "err_superclose": (triple.u - rhu).norm(),
        "meas_K1": cls.measure_k1(mesh),
    }
    diff = triple.u - rhu
    k2 = float(np.sqrt((mesh.edge_lengths * diff.values ** 2)[~cls.labels].sum()))
    diag = LevelDiagnostics(opt.max_violation, opt.passed, cert.passed, cert.worst_ratio,
                            triple.outer_iterations, time.perf_counter() - t0, k2)
    return row, diag, triple


def run_convergence_study(omega: float = 1.5 * math.pi, mu: float = 0.5, levels: int = 7,
                          h0: float = 1.0 / 3.0, radius: float = 0.5, cfg: SqpConfig | None = None,
                          cold_start: bool = False) -> ConvergenceReport:
    """Solve on h_k = h0 2^-k, k < levels, and tabulate errors and EOCs.

    A failing level stops the study; the partial report is attached to the
    raised error as ``exc.report``.
    """
    if levels < 2:
        raise ConfigurationError("a convergence study needs at least two levels")
    cfg = cfg or SqpConfig()
    bench = build_benchmark(omega)
    domain = build_sector_domain(omega, mu, radius)
    report = ConvergenceReport(omega, mu)
    prev_mesh = prev_u = None
    for k in range(levels):
        h = h0 * 2.0 ** (-k)
        try:
            mesh = generate_graded_mesh(domain, h)
            u0 = None if cold_start or prev_mesh is None else prolong_control(prev_mesh, prev_u, mesh)
            row, diag, triple = solve_level(bench, mesh, cfg, u0)
        except NeumannControlError as exc:
            report.error = f"level {k} (h={h:.6g}): {exc}"
            report.fill_eoc()
            exc.report = report
            raise
        row["level"] = k
        report.rows.append(row)
        report.diagnostics.append(diag)
        log.info("level %d h=%.4g dofs=%d err_u=%.3e (%.1fs)", k, h, mesh.n_vertices, row["err_u"], diag.seconds)
        prev_mesh, prev_u = mesh, triple.u.values
    report.fill_eoc()
    return report
