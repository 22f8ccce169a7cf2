"""Command line entry point ``neumann-control``."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .benchmark import build_benchmark, run_convergence_study
from .errors import (
    ConfigurationError,
    IndefiniteHessianError,
    InvalidAngleError,
    InvalidBoundsError,
    MeshQualityError,
    NewtonConvergenceError,
    PdasCyclingError,
    SqpConvergenceError,
)
from .mesh import build_sector_domain, generate_graded_mesh, save_mesh, validate_grading
from .optimizer import check_discrete_optimality, sqp_solve
from .pde import ProblemSpec
from .report import emit_report

EXIT_OK, EXIT_NONCONVERGENCE, EXIT_CONFIG = 0, 2, 3
NONCONVERGENCE = (NewtonConvergenceError, SqpConvergenceError, PdasCyclingError, IndefiniteHessianError)
INVALID = (ConfigurationError, InvalidAngleError, InvalidBoundsError, MeshQualityError)

log = logging.getLogger("neumann_control")


def _nonlinearity(name: str, c: float):
    if name == "linear":
        return (lambda x, y: y), (lambda x, y: np.ones_like(y)), (lambda x, y: np.zeros_like(y))
    if name == "cubic":
        return (lambda x, y: y + y ** 3), (lambda x, y: 1.0 + 3.0 * y ** 2), (lambda x, y: 6.0 * y)
    if name == "affine":
        return (lambda x, y: y - c), (lambda x, y: np.ones_like(y)), (lambda x, y: np.zeros_like(y))
    raise ConfigurationError(f"unknown nonlinearity preset {name!r} (linear, cubic, affine)")


def spec_from_config(cfg: dict) -> tuple[ProblemSpec, float]:
    """Build a problem from the JSON presets; returns (spec, omega)."""
    if not isinstance(cfg, dict):
        raise ConfigurationError("problem config must be a JSON object")
    missing = {"nu", "ua", "ub", "nonlinearity", "data"} - cfg.keys()
    if missing:
        raise ConfigurationError(f"problem config lacks {sorted(missing)}")
    try:
        nu, ua, ub = float(cfg["nu"]), float(cfg["ua"]), float(cfg["ub"])
        omega = float(cfg.get("omega", 1.5 * math.pi))
        c = float(cfg.get("c", 1.0))
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"non-numeric config entry: {exc}") from exc
    d, d_y, d_yy = _nonlinearity(cfg["nonlinearity"], c)
    data = cfg["data"]
    if data == "benchmark":
        b = build_benchmark(omega).spec
        parts = dict(y_d=b.y_d, f=b.f, g1=b.g1, g2=b.g2, boundary_kinks=b.boundary_kinks)
    elif data == "tracking":
        parts = dict(y_d=lambda x: np.ones(len(x)))
    else:
        raise ConfigurationError(f"unknown data preset {data!r} (benchmark, tracking)")
    spec = ProblemSpec(d=d, d_y=d_y, d_yy=d_yy, nu=nu, ua=ua, ub=ub,
                       name=f"{cfg['nonlinearity']}/{data}", **parts)
    return spec, omega


def cmd_mesh(args) -> int:
    domain = build_sector_domain(args.omega, args.mu, args.radius)
    mesh = generate_graded_mesh(domain, args.h)
    cert = validate_grading(mesh)
    if args.out:
        save_mesh(mesh, args.out)
    print(json.dumps({"vertices": mesh.n_vertices, "triangles": mesh.n_triangles,
                      "boundary_edges": mesh.n_edges, "min_angle": mesh.min_angle(),
                      "grading_valid": cert.passed, "worst_ratio": cert.worst_ratio}))
    return EXIT_OK


def cmd_study(args) -> int:
    mu = 1.0 if args.uniform else args.mu
    try:
        report = run_convergence_study(args.omega, mu, args.levels, args.h0, args.radius,
                                       cold_start=args.cold_start)
    except NONCONVERGENCE as exc:
        partial = getattr(exc, "report", None)
        if partial is not None and partial.rows and args.out:
            emit_report(partial, args.out, args.format)
        print(f"study failed: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    if args.out:
        emit_report(report, args.out, args.format)
    for row in report.rows:
        eoc = "" if row["eoc_u"] is None else f"  EOC {row['eoc_u']:.2f}"
        print(f"{row['ndof_domain']:8d} {row['nedges_boundary']:6d}  {row['err_u']:.3e}{eoc}")
    return EXIT_OK


def cmd_solve(args) -> int:
    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read {args.config}: {exc}") from exc
    spec, omega = spec_from_config(cfg)
    mesh = generate_graded_mesh(build_sector_domain(omega, args.mu, args.radius), args.h)
    triple = sqp_solve(spec, mesh)
    for entry in triple.log:
        log.info(json.dumps(entry))
    opt = check_discrete_optimality(spec, mesh, triple)
    if args.out:
        Path(args.out).write_text(triple.u.to_text())
    print(json.dumps({"outer_iterations": triple.outer_iterations,
                      "cost": triple.log[-1]["J_h"],
                      "control_norm": triple.u.norm(),
                      "optimality_violation": opt.max_violation,
                      "optimality_passed": opt.passed}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="neumann-control",
                                     description="Graded-mesh Neumann boundary control solver")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    m = sub.add_parser("mesh", help="generate and certify a graded sector mesh")
    m.add_argument("--omega", type=float, default=1.5 * math.pi)
    m.add_argument("--h", type=float, required=True)
    m.add_argument("--mu", type=float, default=0.5)
    m.add_argument("--radius", type=float, default=0.5)
    m.add_argument("--out")
    m.set_defaults(func=cmd_mesh)

    s = sub.add_parser("study", help="convergence study on the sector benchmark")
    s.add_argument("--omega", type=float, default=1.5 * math.pi)
    s.add_argument("--mu", type=float, default=0.5)
    s.add_argument("--radius", type=float, default=0.5)
    s.add_argument("--levels", type=int, default=7)
    s.add_argument("--h0", type=float, default=1.0 / 3.0)
    s.add_argument("--out")
    s.add_argument("--format", choices=["csv", "json", "svg"], default="csv")
    s.add_argument("--uniform", action="store_true", help="use mu = 1")
    s.add_argument("--cold-start", action="store_true")
    s.set_defaults(func=cmd_study)

    p = sub.add_parser("solve", help="solve one problem given by JSON presets")
    p.add_argument("--config", required=True)
    p.add_argument("--h", type=float, default=0.05)
    p.add_argument("--mu", type=float, default=0.5)
    p.add_argument("--radius", type=float, default=0.5)
    p.add_argument("--out", help="write the optimal control as 'edge value' lines")
    p.set_defaults(func=cmd_solve)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; 2 is reserved for nonconvergence
        return EXIT_CONFIG if exc.code == 2 else int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        return args.func(args)
    except INVALID as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NONCONVERGENCE as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
