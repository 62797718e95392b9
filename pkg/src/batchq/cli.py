"""Command-line entry point: ``batchq <command> [flags]``.

Exit codes: 0 success, 2 usage error, 3 solver or validation failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time
from pathlib import Path

from . import cyclic, harness, mdp, sim
from .cyclic import CyclicPolicy
from .model import DomainError, QueueState, ValidationError, make_params
from .schedule import DEFAULT_MAX_LEN

EXIT_USAGE = 2
EXIT_FAILURE = 3
MAX_ENUM_LEN = 20


class UsageError(Exception):
    pass


def _threads(value) -> int:
    if value is not None:
        return value
    env = os.environ.get("BATCHQ_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        raise UsageError(f"BATCHQ_THREADS must be an integer, got {env!r}")


def _emit(args, report: harness.RunReport, text: str, csv_text: str | None = None) -> None:
    if getattr(args, "json", False):
        sys.stdout.write(report.to_json())
    elif getattr(args, "csv", False) and csv_text is not None:
        sys.stdout.write(csv_text)
    else:
        sys.stdout.write(text)


def cmd_optimal_k(args) -> int:
    try:
        res = cyclic.optimal_k_for(args.gamma, args.r)
    except DomainError as exc:
        raise UsageError(str(exc))
    asym = {
        "gamma_to_one": math.sqrt(2 * args.r) - 1,
        "gamma_to_zero": args.r,
    }
    report = harness.RunReport(
        command=args.argv,
        params={"gamma": args.gamma, "r": args.r},
        results=[{**res.as_dict(), **{f"asymptotic_{k}": v for k, v in asym.items()}}],
        provenance={"tie_rtol": cyclic.TIE_RTOL, "tie_rule": "smaller k"},
    )
    text = (
        f"k*={res.k_star}  (g(k*-1)={res.threshold_low:.6g} < r={args.r:g} <= g(k*)={res.threshold_high:.6g})"
        + ("  [tie: k* and k*+1 cost the same]" if res.tie else "")
        + "\n"
    )
    _emit(args, report, text)
    return 0


def cmd_table1(args) -> int:
    overrides = {"xmax": args.xmax, "epsilon": args.epsilon}
    rows, provs, failed = [], [], []
    started = time.perf_counter()
    for gamma, r in harness.TABLE1_GRID:
        try:
            row, prov = harness.table1_row(gamma, r, overrides, args.cache_dir)
        except (mdp.ConvergenceError, mdp.TruncationError, ValidationError) as exc:
            logging.getLogger(__name__).error("row gamma=%g r=%g failed: %s", gamma, r, exc)
            row, prov = harness.closed_form_row(gamma, r), {"gamma": gamma, "r": r, "error": str(exc)}
            failed.append((gamma, r))
        rows.append(row)
        provs.append(prov)
    formatted = [harness.format_row(r) for r in rows]
    report = harness.RunReport(
        command=args.argv,
        params={"lambda1": 1.0, "lambda2": "r", "initial_state": "(xmax, lambda2)"},
        results=rows,
        provenance={"solver": provs, "gap": "(C - OPT) / OPT", "partial": bool(failed),
                    "seconds": round(time.perf_counter() - started, 3)},
    )
    header = ("gamma", "r", "k*", "C(1)", "C(r)", "C(k*)", "OPT", "Gap(1)", "Gap(r)", "Gap(k*)")
    lines = ["  ".join(f"{h:>8}" for h in header)]
    for f in formatted:
        lines.append("  ".join(f"{f.get(c, 'n/a'):>8}" for c in harness.TABLE1_COLUMNS))
    text = "\n".join(lines) + "\n"
    _emit(args, report, text, report.to_csv(list(harness.TABLE1_COLUMNS), formatted))
    return EXIT_FAILURE if failed else 0


def cmd_figure1(args) -> int:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        a = out / "figure1a.csv"
        b = out / "figure1b.csv"
        with open(a, "w", newline="") as fh:
            fh.write("gamma,r,k_star\n")
            for g, r, k in harness.figure1a_rows():
                fh.write(f"{g:g},{r:g},{k}\n")
        with open(b, "w", newline="") as fh:
            fh.write("k,cost\n")
            for k, c in harness.figure1b_rows(args.k_max):
                fh.write(f"{k},{c:.6f}\n")
    except OSError as exc:
        print(f"batchq: cannot write figure data: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    print(f"wrote {a} and {b}")
    return 0


def cmd_enumerate(args) -> int:
    if not 2 <= args.max_len <= MAX_ENUM_LEN:
        raise UsageError(f"--max-len must lie in [2, {MAX_ENUM_LEN}]")
    try:
        rep = harness.enumeration_report(args.gamma, args.l1, args.l2, args.max_len)
    except (ValidationError, DomainError) as exc:
        raise UsageError(str(exc))
    report = harness.RunReport(
        command=args.argv,
        params={"gamma": args.gamma, "lambda1": args.l1, "lambda2": args.l2, "max_len": args.max_len},
        results=[rep],
    )
    text = f"{rep['best_cycle']}  cost={rep['cost']:.2f}  k*={rep['k_star']}  match={str(rep['match']).lower()}\n"
    _emit(args, report, text)
    return 0


def _parse_policy(spec: str):
    kind, _, arg = spec.partition(":")
    if kind == "mdp" and not arg:
        return "mdp", None
    if kind == "cyclic":
        if arg == "auto":
            return "cyclic", None
        if arg.isdigit() and int(arg) >= 1:
            return "cyclic", int(arg)
    raise UsageError(f"invalid policy spec {spec!r}; expected cyclic:<k>, cyclic:auto or mdp")


def cmd_simulate(args) -> int:
    kind, k = _parse_policy(args.policy)
    try:
        params = make_params(args.l1, args.l2, args.gamma)
        config = sim.SimConfig(
            episodes=args.episodes,
            horizon=args.horizon,
            seed=args.seed,
            cost_mode=args.mode,
            threads=_threads(args.threads),
        )
    except (ValidationError, DomainError) as exc:
        raise UsageError(str(exc))
    y0 = mdp.initial_q2(params)
    prov = {"sim": {"episodes": config.episodes, "seed": config.seed, "mode": config.cost_mode.value,
                    "threads": config.threads}}
    if kind == "mdp":
        solver = mdp.default_config(params, xmax=args.xmax, epsilon=args.epsilon)
        table = mdp.solve_cached(params, solver, args.cache_dir)
        policy = mdp.extract_policy(table)
        init = QueueState(table.xmax, y0)
        reference = mdp.opt_cost(params, table)
        prov["solver"] = solver.as_dict()
    else:
        k = k or cyclic.optimal_k(params).k_star
        policy = CyclicPolicy(k)
        init = QueueState(args.init_x or math.ceil(10 * params.lambda2), y0)
        reference = cyclic.total_cost(params, k)
    est = sim.simulate(params, policy, init, config)
    report = harness.RunReport(
        command=args.argv,
        params={**params.as_dict(), "policy": str(policy), "init": [init.x, init.y]},
        results=[{**est.as_dict(), "reference": reference,
                  "tail_bound": sim.tail_bound(params, est.horizon)}],
        provenance=prov,
    )
    text = (
        f"policy={policy}  mean={est.mean:.4f} +/- {est.stderr:.4f} (1 s.e.)  "
        f"episodes={est.episodes}  seed={est.seed}  horizon={est.horizon}  reference={reference:.4f}\n"
    )
    if est.clamp_warnings:
        text += f"warning: {est.clamp_warnings} state visits clamped onto the table grid\n"
    _emit(args, report, text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="batchq", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def output_flags(p, csv=False):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--json", action="store_true", help="emit one JSON report")
        if csv:
            g.add_argument("--csv", action="store_true", help="emit CSV rows")

    def solver_flags(p):
        p.add_argument("--xmax", type=int, help="truncation bound (default depends on gamma)")
        p.add_argument("--epsilon", type=float, help="value accuracy target")
        p.add_argument("--cache-dir", help="reuse solved value tables from this directory")

    p = sub.add_parser("optimal-k", help="optimal cycle parameter k*")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--r", type=float, required=True, help="rate ratio lambda2/lambda1 (>= 1)")
    output_flags(p)
    p.set_defaults(func=cmd_optimal_k)

    p = sub.add_parser("table1", help="reproduce the 12-row comparison table")
    solver_flags(p)
    output_flags(p, csv=True)
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("figure1", help="write k* vs r and C(k) curve data as CSV")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--k-max", type=int, default=harness.FIGURE1B_KMAX)
    p.set_defaults(func=cmd_figure1)

    p = sub.add_parser("enumerate", help="brute-force the best cycle up to a length")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--l1", type=float, required=True)
    p.add_argument("--l2", type=float, required=True)
    p.add_argument("--max-len", type=int, default=DEFAULT_MAX_LEN)
    output_flags(p)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("simulate", help="Monte Carlo estimate of a policy's discounted cost")
    p.add_argument("--policy", default="cyclic:auto", help="cyclic:<k>, cyclic:auto or mdp")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--l1", type=float, required=True)
    p.add_argument("--l2", type=float, required=True)
    p.add_argument("--episodes", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=int)
    p.add_argument("--mode", choices=[m.value for m in sim.CostMode], default="expected")
    p.add_argument("--init-x", type=int, help="initial Q1 length for cyclic runs (default 10*lambda2)")
    p.add_argument("--threads", type=int, help="worker threads (env BATCHQ_THREADS)")
    solver_flags(p)
    output_flags(p)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = ["batchq", *argv]
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"batchq: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (mdp.ConvergenceError, mdp.TruncationError, ValidationError, DomainError) as exc:
        print(f"batchq: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
