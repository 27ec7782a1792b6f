"""Command-line front end.

Subcommands: sweep, sensing-eval, localize, solve. Exit codes: 0 success,
1 usage error, 2 infeasible program, 3 solver failure. Powers are given in
dBm on the command line and converted to watts at this boundary.
"""

from __future__ import annotations

import argparse
import sys

from . import beamform, conic, harness, localization, model
from .errors import (ConfigError, HarnessError, InfeasibleError,
                     NoFeasibleSampleError, OtasenseError, RadarPowerError,
                     SolverFailureError)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_SOLVER = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the CLI contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _int_list(text: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise _UsageError(f"expected comma-separated integers, got {text!r}") from exc


def _base_config(args) -> model.SystemConfig:
    if getattr(args, "scenario", None):
        cfg, file_seed = model.load_scenario(args.scenario)
        if getattr(args, "seed", None) is None and file_seed is not None:
            args.seed = file_seed
        return cfg
    return harness.default_config()


def _build_parser() -> _Parser:
    p = _Parser(prog="otasense", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sw = sub.add_parser("sweep", help="Monte Carlo sweep over a scenario dimension")
    sw.add_argument("--var", required=True, choices=harness.SWEEP_VARIABLES)
    sw.add_argument("--values", required=True, type=_int_list)
    sw.add_argument("--scheme", default="both", choices=["shared", "separated", "both"])
    sw.add_argument("--baseline", action="store_true",
                    help="also run the antenna-selection baselines")
    sw.add_argument("--realizations", type=int, default=10)
    sw.add_argument("--seed", type=int, default=None,
                    help="root seed (default: scenario file seed, else 0)")
    sw.add_argument("--out", required=True)
    sw.add_argument("--format", default="csv", choices=["csv", "json"])
    sw.add_argument("--scenario", help="scenario file overriding the built-in defaults")
    sw.add_argument("--slots", type=int, default=10000,
                    help="slots for the empirical computation-error estimate")
    sw.add_argument("--samples", type=int, default=50, help="randomization samples")
    sw.add_argument("--eta-margin", type=float, default=2.0)

    se = sub.add_parser("sensing-eval", help="achieved sensing MSE across antenna counts")
    se.add_argument("--na-values", type=_int_list, default=[])
    se.add_argument("--ns-values", type=_int_list, default=[])
    se.add_argument("--realizations", type=int, default=1)
    se.add_argument("--seed", type=int, default=None,
                    help="root seed (default: scenario file seed, else 0)")
    se.add_argument("--out", required=True)
    se.add_argument("--format", default="csv", choices=["csv", "json"])
    se.add_argument("--scenario")
    se.add_argument("--samples", type=int, default=50)
    se.add_argument("--eta-margin", type=float, default=2.0)

    lo = sub.add_parser("localize", help="target-localization demo")
    lo.add_argument("--geometry", help="geometry file; omit for the built-in demo scene")
    lo.add_argument("--scenario", help="scenario file; omit for the demo defaults")
    lo.add_argument("--noise-dbm", type=float, default=-79.5)
    lo.add_argument("--seed", type=int, default=None,
                    help="root seed (default: scenario file seed, else 0)")
    lo.add_argument("--out", required=True, help="scatter CSV (label,x,y)")
    lo.add_argument("--beta", type=float, default=None,
                    help="target reflection amplitude (default: demo value)")
    lo.add_argument("--samples", type=int, default=100)

    so = sub.add_parser("solve", help="build and solve one scenario's conic program")
    so.add_argument("--scenario", required=True)
    so.add_argument("--seed", type=int, default=None)
    so.add_argument("--dump-conic", help="write the program in the sparse block text format")
    so.add_argument("--tol", type=float, default=1e-9)
    return p


def _cmd_sweep(args) -> int:
    base = _base_config(args)
    schemes = ("shared", "separated") if args.scheme == "both" else (args.scheme,)
    records = harness.run_sweep(base, args.var, args.values,
                                n_realizations=args.realizations, seed=args.seed or 0,
                                schemes=schemes, baselines=args.baseline,
                                n_samples=args.samples, n_slots=args.slots,
                                eta_margin=args.eta_margin)
    harness.emit(records, args.format, args.out)
    for row in harness.aggregate_mean(records):
        print("%s=%g scheme=%s mean normalized MSE %.6g over %d runs" % row)
    n_failed = sum(r.status != "ok" for r in records)
    if n_failed:
        print(f"{n_failed}/{len(records)} cells failed (see status column)", file=sys.stderr)
    return EXIT_OK


def _cmd_sensing_eval(args) -> int:
    if not args.na_values and not args.ns_values:
        raise _UsageError("need --na-values and/or --ns-values")
    base = _base_config(args)
    records = harness.run_sensing_eval(base, args.na_values, args.ns_values,
                                       n_realizations=args.realizations,
                                       seed=args.seed or 0, n_samples=args.samples,
                                       eta_margin=args.eta_margin)
    harness.emit(records, args.format, args.out)
    for r in harness.sorted_records(records):
        worst = max(r.sensing_mse) if r.sensing_mse else float("nan")
        print(f"{r.sweep_variable}={r.value:g} scheme={r.scheme} status={r.status} "
              f"worst sensing MSE {worst:.6g} (eta {r.eta:.6g})")
    return EXIT_OK


def _cmd_localize(args) -> int:
    geom = (localization.load_geometry(args.geometry) if args.geometry
            else localization.make_demo_geometry())
    if args.scenario:
        cfg, file_seed = model.load_scenario(args.scenario)
        if args.seed is None and file_seed is not None:
            args.seed = file_seed
    else:
        cfg = harness.default_localization_config(geom)
    beta = args.beta if args.beta is not None else harness.DEMO_BETA
    _, rows = harness.run_localization_demo(geom, cfg, args.noise_dbm,
                                            args.seed or 0, beta=beta,
                                            n_samples=args.samples)
    harness.write_xy_csv(rows, args.out)
    for label, x, y in rows[:3]:
        print(f"{label}: ({x:.4f}, {y:.4f})")
    return EXIT_OK


def _cmd_solve(args) -> int:
    cfg, file_seed = model.load_scenario(args.scenario)
    seed = args.seed if args.seed is not None else (file_seed or 0)
    channels = model.draw_channels(cfg, seed)
    if cfg.scheme == "shared":
        problem = beamform.build_sdp_shared(cfg, channels)
    else:
        problem = beamform.build_sdp_separated(cfg, channels)
    if args.dump_conic:
        with open(args.dump_conic, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(conic.export_conic(problem))
    solution = conic.solve_conic(problem, tol=args.tol)
    print(f"provenance: {problem.provenance}")
    print(f"status: {solution.status} ({solution.solver_status}, {solution.iterations} iterations)")
    if solution.status == "infeasible":
        return EXIT_INFEASIBLE
    print(f"objective: {solution.objective_value:.12g}")
    print(f"max constraint violation: {solution.max_constraint_violation:.3e}")
    print(f"min eigenvalue of recovered matrix: {solution.min_eigenvalue:.3e}")
    if solution.status != "optimal":
        return EXIT_SOLVER
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "sensing-eval":
            return _cmd_sensing_eval(args)
        if args.command == "localize":
            return _cmd_localize(args)
        return _cmd_solve(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, HarnessError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InfeasibleError, RadarPowerError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (SolverFailureError, NoFeasibleSampleError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OtasenseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
