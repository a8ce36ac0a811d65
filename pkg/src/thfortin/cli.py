"""Command-line driver: mesh generation, identity checks and studies.

Every subcommand writes one JSON report (or a CSV table) and exits with 0
when all checks hold, 1 on a tolerance violation and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import analysis
from .mesh import Mesh, MeshError, freudenthal_cube, mesh_to_dict, read_mesh

VARIANTS = {"th": "taylor_hood", "reduced": "reduced"}


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        values = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of integers, got {text!r}")
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("N values must be positive integers")
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--n", type=_int_list, default=None, help="subdivisions per axis, comma separated (default 2)")
    src.add_argument("--mesh-file", type=Path, default=None, help="mesh JSON file instead of a generated cube")
    common.add_argument("--dim", type=int, default=2, help="dimension of the generated cube (default 2)")
    common.add_argument("--mesh-variant", choices=("reflected", "translated"), default="reflected")
    common.add_argument("--variant", choices=sorted(VARIANTS), default="th")
    common.add_argument("--pressure", choices=sorted(analysis.PRESSURE_KINDS), default="p1")
    common.add_argument("--quad-degree", type=int, default=6)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", type=Path, default=None, help="output file (default stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--identity-tol", type=float, default=analysis.IDENTITY_TOL)
    common.add_argument("--beta-zero-tol", type=float, default=analysis.BETA_ZERO_TOL)
    common.add_argument("--slope-window", type=float, default=analysis.SLOPE_WINDOW)

    parser = argparse.ArgumentParser(prog="thfortin", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    helps = {
        "mesh": "generate a mesh and write it as JSON with topology statistics",
        "verify-bubbles": "check the tangential and modified bubble divergence identities",
        "fortin-check": "projection, divergence and trace checks of the Fortin operator",
        "infsup": "inf-sup constant of a velocity/pressure pair",
        "convergence": "approximation rates of the Fortin operator on refined cubes",
        "dof-table": "degree-of-freedom census with leading coefficients",
        "counterexample": "the P2-P0 pressure mode on the basic octahedron partition",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    return parser


def _meshes(args) -> list[tuple[Optional[int], Mesh]]:
    if args.mesh_file is not None:
        try:
            return [(None, read_mesh(args.mesh_file))]
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read mesh file: {exc}") from None
    if args.dim < 2:
        raise UsageError("--dim must be at least 2")
    return [(N, freudenthal_cube(args.dim, N, args.mesh_variant)) for N in (args.n or [2])]


def _run_mesh(args):
    (N, m), *rest = _meshes(args)
    if rest:
        raise UsageError("mesh takes a single N")
    report = {"report": "mesh", "N": N, "topology": m.topology_stats(), **mesh_to_dict(m)}
    return report, [dict(N=N, **m.topology_stats())], []


def _run_verify_bubbles(args):
    records, fails = [], []
    for N, m in _meshes(args):
        r = analysis.bubble_identity_residuals(m)
        r["N"] = N
        records.append(r)
        for key in ("tangential_max_residual", "modified_max_residual"):
            if r[key] > args.identity_tol:
                fails.append(f"N={N} {key}={r[key]:.3e}")
    rows = [{k: r[k] for k in ("N", "n_edges", "n_boundary_edges", "tangential_max_residual",
                                 "modified_max_residual")} for r in records]
    return {"report": "verify-bubbles", "records": records}, rows, fails


def _run_fortin_check(args):
    records, fails = [], []
    for N, m in _meshes(args):
        r = analysis.fortin_check(m, VARIANTS[args.variant], seed=args.seed, quad_degree=args.quad_degree)
        r["N"] = N
        records.append(r)
        for key in ("projection_error", "discrete_divergence_residual", "boundary_trace"):
            if r[key] is not None and r[key] > args.identity_tol:
                fails.append(f"N={N} {key}={r[key]:.3e}")
    rows = [{k: v for k, v in r.items() if k != "mesh"} for r in records]
    return {"report": "fortin-check", "records": records}, rows, fails


def _run_infsup(args):
    records, fails = [], []
    for N, m in _meshes(args):
        try:
            r = analysis.infsup_constant(m, args.variant, args.pressure, args.beta_zero_tol).to_dict()
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        r["N"] = N
        records.append(r)
        # only the P1 pressure pairs are guaranteed stable
        if args.pressure == "p1" and r["beta"] <= args.beta_zero_tol:
            fails.append(f"N={N} beta={r['beta']:.3e}")
    rows = [{"N": r["N"], "velocity_space": r["velocity_space"], "pressure_space": r["pressure_space"],
             "beta": r["beta"], "kernel_dim": r["kernel_dim"]} for r in records]
    return {"report": "infsup", "records": records}, rows, fails


def _run_convergence(args):
    if args.mesh_file is not None:
        raise UsageError("convergence needs generated cubes, not --mesh-file")
    Ns = args.n or [2, 4, 8, 16]
    if len(Ns) < 3:
        raise UsageError("convergence needs at least three N values")
    if args.dim < 2:
        raise UsageError("--dim must be at least 2")
    field = analysis.sine_field(freudenthal_cube(args.dim, 1, args.mesh_variant))
    r = analysis.convergence_study(field, VARIANTS[args.variant], args.dim, Ns,
                                   quad_degree=args.quad_degree, mesh_variant=args.mesh_variant)
    fails = []
    for key, expected in (("l2_slope", r.expected_l2_slope), ("h1_slope", r.expected_h1_slope)):
        got = getattr(r, key)
        if got is not None and abs(got - expected) > args.slope_window:
            fails.append(f"{key}={got:.3f} expected {expected}+-{args.slope_window}")
    return {"report": "convergence", **r.to_dict()}, r.rows(), fails


def _run_dof_table(args):
    if args.mesh_file is not None:
        raise UsageError("dof-table needs generated cubes, not --mesh-file")
    records, rows, fails = [], [], []
    for N in args.n or [1, 2, 4, 8]:
        c = analysis.dof_census(args.dim, N, args.mesh_variant)
        oracle = analysis.enumerate_counts(args.dim, N, args.mesh_variant)
        rec = c.to_dict()
        rec["enumeration"] = oracle
        records.append(rec)
        for key, value in oracle.items():
            if getattr(c, key) != value:
                fails.append(f"N={N} {key}={getattr(c, key)} enumeration={value}")
        lead = c.leading()
        rows.append({"N": N, "reduced": c.dim_reduced, "mini": c.dim_mini, "taylor_hood": c.dim_taylor_hood,
                     "pressure": c.dim_pressure, **{f"lead_{k}": v for k, v in lead.items()}})
    targets = analysis.table_targets(args.dim)
    rows.append({"N": "limit", "reduced": "", "mini": "", "taylor_hood": "", "pressure": "",
                 **{f"lead_{k}": float(v) for k, v in targets.items()}})
    return {"report": "dof-table", "dim": args.dim, "targets": targets, "records": records}, rows, fails


def _run_counterexample(args):
    r = analysis.octahedron_counterexample(seed=args.seed)
    fails = []
    for key in ("max_abs_pairing", "max_origin_divergence_error", "max_bubble_divergence_error"):
        if r[key] > args.identity_tol:
            fails.append(f"{key}={r[key]:.3e}")
    for key in ("beta_p0", "beta_augmented"):
        if r[key] > args.beta_zero_tol:
            fails.append(f"{key}={r[key]:.3e}")
    if r["kernel_cosine_p0"] < 1 - 1e-10:
        fails.append(f"kernel_cosine_p0={r['kernel_cosine_p0']!r}")
    row = {k: v for k, v in r.items() if not isinstance(v, (list, dict))}
    return r, [row], fails


COMMANDS = {
    "mesh": _run_mesh,
    "verify-bubbles": _run_verify_bubbles,
    "fortin-check": _run_fortin_check,
    "infsup": _run_infsup,
    "convergence": _run_convergence,
    "dof-table": _run_dof_table,
    "counterexample": _run_counterexample,
}


def run(args: argparse.Namespace) -> int:
    """Execute a parsed configuration; returns the exit status."""
    report, rows, fails = COMMANDS[args.subcommand](args)
    report = {"schema_version": analysis.SCHEMA_VERSION, **report}
    report.setdefault("report", args.subcommand)
    report["status"] = "fail" if fails else "pass"
    report["violations"] = fails
    text = analysis.to_json(report) if args.format == "json" else analysis.to_csv(rows)
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text, encoding="utf-8")
    for f in fails:
        print(f"tolerance violation in {args.subcommand}: {f}", file=sys.stderr)
    return 1 if fails else 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run(args)
    except (UsageError, MeshError) as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog} {args.subcommand}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
