"""Command-line front end.

    flowlab run SCENARIO.json [...]       evolve + check scenario files
    flowlab verify-models [MODEL...]      exact-model invariant harness
    flowlab classify  (SCENARIO | --model NAME)   type-III / type-IIb verdict
    flowlab blowdown  (SCENARIO | --model NAME)   pointed rescaling views
    flowlab gowdy     (SCENARIO | flags)          areal evolution + energy checks
    flowlab reduced-volume (SCENARIO | --model NAME)
    flowlab compare DIR_A DIR_B [--tol X]  field-wise artifact diff
    flowlab sweep SWEEP.json [--threads N]

Artifacts land under --out (default: $FLOWLAB_OUT or ./flowlab-out).
Exit codes: 0 all checks pass, 1 some check failed, 2 usage/schema error
(nothing written), 3 numerical failure (partial artifacts kept).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, scenarios
from .scenarios import (EXIT_CHECK_FAILED, EXIT_NUMERICAL, EXIT_OK, EXIT_SCHEMA,
                        Scenario, SchemaError, StructuralDiffError, compare_runs,
                        default_out_root, load_scenario, run_scenario, verify_zoo)


def _status(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


def _print_report(outdir: Path) -> None:
    rep = json.loads((outdir / "report.json").read_text())
    if "error" in rep:
        print(f"  ERROR {rep['error']}")
    for name, chk in sorted(rep.get("checks", {}).items()):
        extra = "" if chk.get("max_violation") is None else \
            f" max_violation={chk['max_violation']:.3e}"
        print(f"  {_status(chk['passed'])} {name}{extra}")
    for name, code in ((r["id"], r["exit_code"]) for r in rep.get("results", [])):
        print(f"  {_status(code == EXIT_OK)} {name} (exit {code})")


def _run_paths(paths, out_root, threads: int = 1) -> int:
    try:
        scs = [load_scenario(p) for p in paths]
    except SchemaError as e:
        print(f"schema error: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    worst = EXIT_OK
    for sc in scs:
        code, outdir = run_scenario(sc, out_root, threads=threads)
        print(f"scenario {sc.id}: exit {code} -> {outdir}")
        _print_report(outdir)
        worst = max(worst, code)
    return worst


def _scenario_from_args(args, kind: str) -> Scenario:
    """Either a scenario file (kind must match) or a zoo model by name."""
    if args.scenario:
        sc = load_scenario(args.scenario)
        if sc.kind != kind:
            raise SchemaError(f"{args.scenario} has kind {sc.kind!r}; "
                              f"this subcommand runs {kind!r}")
        return sc
    if not getattr(args, "model", None):
        raise SchemaError("give a scenario file or --model NAME")
    params = {"model": args.model, "t0": args.t0, "t1": args.t1, "num": args.num}
    if kind == "blowdown":
        params["max_views"] = args.max_views
    if kind == "reduced-volume" and args.fiber is not None:
        params["fiber"] = args.fiber
    return Scenario(id=f"{kind}-{args.model}", kind=kind, params=params,
                    tol=args.tol)


def _add_source_flags(sp, default_t1: float = 1e4) -> None:
    sp.add_argument("scenario", nargs="?", help="scenario JSON file")
    sp.add_argument("--model", help="exact model kind from the zoo")
    sp.add_argument("--t0", type=float, default=1.0)
    sp.add_argument("--t1", type=float, default=default_t1)
    sp.add_argument("--num", type=int, default=120, help="sample count")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="flowlab", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--version", action="version", version=f"flowlab {__version__}")
    ap.add_argument("--out", default=None,
                    help="artifact root (default: $FLOWLAB_OUT or ./flowlab-out)")
    ap.add_argument("--tol", type=float, default=1e-8,
                    help="monotonicity tolerance for flag-built scenarios")
    ap.add_argument("--seed", type=int, default=None,
                    help="RNG seed for flag-built scenarios")
    ap.add_argument("--threads", type=int, default=1,
                    help="parallel scenarios in sweeps")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("run", help="run scenario files")
    sp.add_argument("paths", nargs="+", help="scenario JSON files")

    sp = sub.add_parser("verify-models", help="check exact-model invariants")
    sp.add_argument("models", nargs="*", help="model kinds (see --list)")
    sp.add_argument("--all", action="store_true", help="check the whole zoo")
    sp.add_argument("--list", action="store_true", help="list zoo model kinds")
    sp.add_argument("--fault", default=None,
                    help="inject a defect (flip-K-sign) to prove the harness bites")

    _add_source_flags(sub.add_parser("classify", help="curvature-decay verdict"))

    sp = sub.add_parser("blowdown", help="pointed rescaling limit views")
    _add_source_flags(sp, default_t1=1e5)
    sp.add_argument("--max-views", type=int, default=8, dest="max_views")

    sp = sub.add_parser("gowdy", help="areal Gowdy evolution + energy checks")
    sp.add_argument("scenario", nargs="?", help="scenario JSON file")
    sp.add_argument("--nth", type=int, default=256)
    sp.add_argument("--R0", type=float, default=1.0)
    sp.add_argument("--R1", type=float, default=10.0)
    sp.add_argument("--mode-n", type=int, default=1, dest="mode_n")
    sp.add_argument("--amp", type=float, default=0.5)

    sp = sub.add_parser("reduced-volume", help="dimensional-reduction volume checks")
    _add_source_flags(sp)
    sp.add_argument("--fiber", type=int, default=None,
                    help="frame index of the circle fiber")

    sp = sub.add_parser("compare", help="diff two artifact directories")
    sp.add_argument("dir_a")
    sp.add_argument("dir_b")
    sp.add_argument("--tol", type=float, default=0.0, dest="compare_tol",
                    help="relative tolerance per numeric cell (0 = bitwise)")

    sp = sub.add_parser("sweep", help="run a sweep scenario in parallel")
    sp.add_argument("path", help="sweep scenario JSON file")

    args = ap.parse_args(argv)
    out_root = Path(args.out) if args.out else default_out_root()

    try:
        if args.command == "run":
            return _run_paths(args.paths, out_root, threads=args.threads)

        if args.command == "verify-models":
            from .models import MODEL_KINDS
            if args.list:
                print("\n".join(MODEL_KINDS))
                return EXIT_OK
            if not args.models and not getattr(args, "all", False):
                print("usage error: name at least one model or pass --all",
                      file=sys.stderr)
                return EXIT_SCHEMA
            rows = verify_zoo(None if args.all else args.models, fault=args.fault)
            for model, check, residual, ok in rows:
                print(f"{_status(ok)} {model}.{check} residual={residual:.3e}")
            return EXIT_OK if all(r[3] for r in rows) else EXIT_CHECK_FAILED

        if args.command in ("classify", "blowdown", "reduced-volume"):
            sc = _scenario_from_args(args, args.command)
            code, outdir = run_scenario(sc, out_root)
            print(f"scenario {sc.id}: exit {code} -> {outdir}")
            _print_report(outdir)
            rep = json.loads((outdir / "report.json").read_text())
            key = args.command.replace("-", "_") if args.command != "classify" \
                else "classification"
            if key in rep:
                print(f"  {key}: " + json.dumps(rep[key], default=str))
            return code

        if args.command == "gowdy":
            if args.scenario:
                sc = load_scenario(args.scenario)
                if sc.kind != "gowdy":
                    raise SchemaError(f"{args.scenario} has kind {sc.kind!r}")
            else:
                sc = Scenario(
                    id=f"gowdy-bessel-n{args.mode_n}-nth{args.nth}",
                    kind="gowdy", tol=args.tol, seed=args.seed,
                    params={"mode": "polarized", "R0": args.R0, "R1": args.R1,
                            "nth": args.nth,
                            "data": {"bessel": {"n": args.mode_n, "amp": args.amp}}})
            code, outdir = run_scenario(sc, out_root)
            print(f"scenario {sc.id}: exit {code} -> {outdir}")
            _print_report(outdir)
            return code

        if args.command == "compare":
            try:
                rep = compare_runs(args.dir_a, args.dir_b, tol=args.compare_tol)
            except StructuralDiffError as e:
                print(f"structural difference: {e}", file=sys.stderr)
                return EXIT_SCHEMA
            for file, row, col, a, b in rep.diffs[:20]:
                where = file if row is None else f"{file}:{row}:{col}"
                print(f"DIFF {where}: {a} != {b}")
            if len(rep.diffs) > 20:
                print(f"... and {len(rep.diffs) - 20} more")
            print(f"compared {rep.checked_files} files, "
                  f"{len(rep.diffs)} differing values")
            return EXIT_OK if rep.clean else EXIT_CHECK_FAILED

        if args.command == "sweep":
            sc = load_scenario(args.path)
            if sc.kind != "sweep":
                raise SchemaError(f"{args.path} has kind {sc.kind!r}, need 'sweep'")
            code, outdir = run_scenario(sc, out_root, threads=args.threads)
            print(f"sweep {sc.id}: exit {code} -> {outdir}")
            _print_report(outdir)
            return code
    except SchemaError as e:
        print(f"schema error: {e}", file=sys.stderr)
        return EXIT_SCHEMA

    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
