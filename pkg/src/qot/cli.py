"""Command-line front end.

Subcommands: distance, geodesic, flow, innerprod, spatial-distance,
spatial-flow, check. Exit codes: 0 success, 2 input/parse errors, 3 solver
non-convergence or positivity failures. QOT_LOG={error,info,debug} controls
verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import io as qio
from .checks import run_checks
from .errors import ConvergenceError, PositivityError, QotError, ValidationError
from .geodesic import solve_w2a_conic, solve_w2_direct, verify_optimality
from .io import JobConfig
from .metric import MetricKind, inner_product
from .transport import SolverOptions

log = logging.getLogger("qot")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SOLVER = 3


def _setup_logging():
    level = {"error": logging.ERROR, "info": logging.INFO,
             "debug": logging.DEBUG}.get(os.environ.get("QOT_LOG", "error"), logging.ERROR)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _add_common(p):
    p.add_argument("--basis", default="pauli",
                   help="named preset (pauli, gellmann:<n>) or path to a JSON basis file")
    p.add_argument("--kind", choices=["anticomm", "log"], default="anticomm")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output path (JSON report / CSV trace)")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=50_000, dest="max_iter")


def build_parser():
    ap = argparse.ArgumentParser(prog="qot", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    for name in ("distance", "geodesic"):
        p = sub.add_parser(name, help=f"compute a Wasserstein {name}")
        p.add_argument("--marginal0", required=True)
        p.add_argument("--marginal1", required=True)
        p.add_argument("--backend", choices=["conic", "direct"], default="conic")
        p.add_argument("--steps", type=int, default=16)
        _add_common(p)

    p = sub.add_parser("flow", help="entropy gradient flow of a density matrix")
    p.add_argument("--state", required=True)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--tfinal", type=float, default=1.0, dest="t_final")
    p.add_argument("--stride", type=int, default=10)
    _add_common(p)

    p = sub.add_parser("innerprod", help="Riemannian inner product of two tangents")
    p.add_argument("--state", required=True)
    p.add_argument("--tangent1", required=True)
    p.add_argument("--tangent2", required=True)
    _add_common(p)

    p = sub.add_parser("spatial-distance", help="matrix-field transport distance")
    p.add_argument("--marginal0", required=True)
    p.add_argument("--marginal1", required=True)
    p.add_argument("--backend", choices=["conic", "direct"], default="conic")
    p.add_argument("--steps", type=int, default=16)
    p.add_argument("--gamma", type=float, default=1.0)
    _add_common(p)

    p = sub.add_parser("spatial-flow", help="entropy gradient flow of a matrix field")
    p.add_argument("--state", required=True)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--tfinal", type=float, default=1.0, dest="t_final")
    p.add_argument("--stride", type=int, default=10)
    _add_common(p)

    p = sub.add_parser("check", help="run the seeded invariant suites")
    p.add_argument("--only", default=None, help="run a single named suite")
    _add_common(p)
    return ap


def _write_json(path, payload):
    text = json.dumps(payload, indent=2, sort_keys=True)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _solver_options(cfg):
    return SolverOptions(max_iter=cfg.max_iter, tol=cfg.tol)


def cmd_distance(cfg, include_path=False):
    basis = qio.read_basis(cfg.basis)
    rho0 = qio.read_density(cfg.marginal0)
    rho1 = qio.read_density(cfg.marginal1)
    opts = _solver_options(cfg)
    if cfg.backend == "conic":
        if cfg.kind != "anticomm":
            raise ValidationError("the conic backend supports only --kind anticomm "
                                  "(no convex form exists for the logarithmic case)")
        path, report = solve_w2a_conic(basis, rho0, rho1, cfg.steps, opts)
    else:
        path, report = solve_w2_direct(basis, rho0, rho1, cfg.steps, cfg.kind, opts)
    report.optimality = {
        k: (v.tolist() if isinstance(v, np.ndarray) else v)
        for k, v in verify_optimality(basis, path).items()}
    payload = report.as_dict()
    if include_path:
        payload["densities"] = [qio.matrix_to_record(m) for m in path.densities]
        payload["momenta"] = [[qio.matrix_to_record(b) for b in m] for m in path.momenta]
    _write_json(cfg.out, payload)
    if not report.converged:
        log.error("solver did not converge: residuals (%.2e, %.2e)",
                  report.primal_residual, report.dual_residual)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_flow(cfg):
    from .flows import flow_anticomm, flow_log

    basis = qio.read_basis(cfg.basis)
    rho0 = qio.read_density(cfg.state)
    flow = flow_anticomm if cfg.kind == "anticomm" else flow_log
    try:
        trace = flow(basis, rho0, cfg.t_final, cfg.dt, record_stride=cfg.stride)
    except PositivityError as exc:
        print(f"positivity failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    n = rho0.shape[0]
    uniform = np.eye(n) / n
    rows = [
        (t, s, drift, eig, float(np.linalg.norm(state - uniform)))
        for t, s, drift, eig, state in zip(
            trace.times, trace.entropies, trace.trace_drifts, trace.min_eigs,
            trace.states)
    ]
    if cfg.out:
        qio.write_csv(cfg.out, ["t", "entropy", "trace_drift", "min_eig",
                                "dist_to_uniform"], rows)
    else:
        print("t,entropy,trace_drift,min_eig,dist_to_uniform")
        for row in rows:
            print(",".join(repr(float(v)) for v in row))
    return EXIT_OK


def cmd_innerprod(cfg):
    basis = qio.read_basis(cfg.basis)
    rho = qio.read_density(cfg.state)
    d1 = qio.read_hermitian(cfg.tangent1)
    d2 = qio.read_hermitian(cfg.tangent2)
    value = inner_product(basis, rho, d1, d2, MetricKind(cfg.kind))
    _write_json(cfg.out, {"inner_product": value, "kind": cfg.kind})
    return EXIT_OK


def cmd_spatial_distance(cfg):
    from .spatial import solve_spatial_geodesic, solve_spatial_geodesic_direct

    basis = qio.read_basis(cfg.basis)
    f0 = qio.read_field(cfg.marginal0)
    f1 = qio.read_field(cfg.marginal1)
    opts = _solver_options(cfg)
    if cfg.backend == "conic":
        if cfg.kind != "anticomm":
            raise ValidationError("the conic backend supports only --kind anticomm; "
                                  "use --backend direct for the logarithmic field case")
        _, report = solve_spatial_geodesic(f0, f1, basis, cfg.gamma, cfg.steps, opts)
    else:
        _, report = solve_spatial_geodesic_direct(f0, f1, basis, cfg.gamma,
                                                  cfg.steps, MetricKind(cfg.kind), opts)
    _write_json(cfg.out, report.as_dict())
    return EXIT_OK if report.converged else EXIT_SOLVER


def cmd_spatial_flow(cfg):
    from .spatial import spatial_entropy_flow

    basis = qio.read_basis(cfg.basis)
    field = qio.read_field(cfg.state)
    try:
        trace = spatial_entropy_flow(field, basis, cfg.gamma, MetricKind(cfg.kind),
                                     cfg.t_final, cfg.dt, record_stride=cfg.stride)
    except PositivityError as exc:
        print(f"positivity failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    g, n = field.grid_size, field.dim
    uniform = np.repeat((np.eye(n) / n)[None], g, axis=0)
    rows = [
        (t, s, drift, eig, float(np.linalg.norm(state - uniform)))
        for t, s, drift, eig, state in zip(
            trace.times, trace.entropies, trace.trace_drifts, trace.min_eigs,
            trace.states)
    ]
    if cfg.out:
        qio.write_csv(cfg.out, ["t", "entropy", "trace_drift", "min_eig",
                                "dist_to_uniform"], rows)
    else:
        print("t,entropy,trace_drift,min_eig,dist_to_uniform")
        for row in rows:
            print(",".join(repr(float(v)) for v in row))
    return EXIT_OK


def cmd_check(cfg):
    results = run_checks(seed=cfg.seed, only=cfg.only)
    payload = {
        "seed": cfg.seed,
        "suites": {r["name"]: {k: v for k, v in r.items() if k != "name"}
                   for r in results},
        "all_passed": all(r["passed"] for r in results),
    }
    _write_json(cfg.out, payload)
    for r in results:
        status = "PASS" if r["passed"] else "FAIL"
        print(f"{status} {r['name']} (worst {r['worst']:.3e})", file=sys.stderr)
    return EXIT_OK if payload["all_passed"] else EXIT_SOLVER


def main(argv=None):
    _setup_logging()
    ap = build_parser()
    ns = ap.parse_args(argv)
    data = {k: v for k, v in vars(ns).items() if v is not None}
    try:
        cfg = JobConfig.from_dict(data)
    except ValidationError as exc:
        print(f"invalid arguments: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        if cfg.command == "distance":
            return cmd_distance(cfg)
        if cfg.command == "geodesic":
            return cmd_distance(cfg, include_path=True)
        if cfg.command == "flow":
            return cmd_flow(cfg)
        if cfg.command == "innerprod":
            return cmd_innerprod(cfg)
        if cfg.command == "spatial-distance":
            return cmd_spatial_distance(cfg)
        if cfg.command == "spatial-flow":
            return cmd_spatial_flow(cfg)
        if cfg.command == "check":
            return cmd_check(cfg)
        raise ValidationError(f"unknown command {cfg.command!r}")
    except json.JSONDecodeError as exc:
        print(f"malformed JSON: {exc.msg} at line {exc.lineno} column {exc.colno}",
              file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"missing file: {exc.filename}", file=sys.stderr)
        return EXIT_INPUT
    except (ValidationError,) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PositivityError as exc:
        print(f"positivity failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConvergenceError, QotError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
