"""Command-line front end: single solves, batch benchmarks, order experiments.

Traces are written as CSV with one row per iteration; reports and batch
aggregates are JSON. Exit codes: 0 converged, 1 not converged, 2 usage
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import (
    IterationRecord,
    estimate_local_order,
    predicted_local_order,
    summarize,
)
from .driver import Outcome, Schedule, SolveReport, SolverConfig, solve
from .newton_step import StepParams
from .oracle import PROBLEM_NAMES, default_start, make_problem

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


def splitmix64_uniform(seed: int, count: int, low: float = -1.0, high: float = 1.0) -> np.ndarray:
    """Deterministic uniforms from the splitmix64 generator.

    64-bit state advanced by the golden-gamma constant; each output is
    finalized and mapped to [low, high) using the top 53 bits. Chosen for
    bitwise reproducibility across platforms and runs.
    """
    state = seed & 0xFFFFFFFFFFFFFFFF
    out = np.empty(count)
    for i in range(count):
        state = (state + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
        z = z ^ (z >> 31)
        out[i] = (z >> 11) / float(1 << 53)
    return low + (high - low) * out


@dataclass
class RunSpec:
    problem: str
    n: int
    x0_mode: str = "default"  # default | ones | random | explicit
    x0_values: list[float] | None = None
    seed: int = 0
    schedule: str = "grad"
    theta: float = 1.0
    lambda_fallback: float = 0.0
    epsilon: float = 1e-5
    max_iterations: int = 100_000
    step_overrides: dict = field(default_factory=dict)
    M0: float = 1.0
    min_direction_norm: float = 2e-16
    trace_out: str | None = None
    report_out: str | None = None
    label: str | None = None

    def build_x0(self) -> np.ndarray:
        if self.x0_mode == "default":
            return default_start(self.problem, self.n)
        if self.x0_mode == "ones":
            return np.ones(self.n)
        if self.x0_mode == "random":
            return splitmix64_uniform(self.seed, self.n, -1.0, 1.0)
        if self.x0_mode == "explicit":
            x0 = np.asarray(self.x0_values, dtype=np.float64)
            if x0.shape != (self.n,):
                raise ValueError(f"explicit x0 has {x0.size} entries, expected {self.n}")
            return x0
        raise ValueError(f"unknown x0 mode {self.x0_mode!r}")

    def build_config(self) -> SolverConfig:
        return SolverConfig(
            schedule=Schedule(self.schedule),
            theta=self.theta,
            lambda_fallback=self.lambda_fallback,
            epsilon=self.epsilon,
            max_iterations=self.max_iterations,
            step_params=StepParams(**self.step_overrides),
            M0=self.M0,
            min_direction_norm=self.min_direction_norm,
        )


def run_spec(spec: RunSpec) -> SolveReport:
    oracle = make_problem(spec.problem, spec.n)
    return solve(oracle, spec.build_x0(), spec.build_config())


def write_trace(path: str, trace: list[IterationRecord]) -> None:
    fields = [f.name for f in dataclasses.fields(IterationRecord)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for rec in trace:
            writer.writerow([getattr(rec, name) for name in fields])


def write_report(path: str, spec: RunSpec, report: SolveReport) -> None:
    doc = {
        "spec": dataclasses.asdict(spec),
        "outcome": report.outcome.value,
        "iterations": report.iterations,
        "final_gradient_norm": report.final_gradient_norm,
        "failure_reason": report.failure_reason,
        "counters": dataclasses.asdict(report.counters),
    }
    if report.trace:
        doc["metrics"] = dataclasses.asdict(summarize(report.trace, spec.n))
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _spec_from_args(args: argparse.Namespace) -> RunSpec:
    if args.problem not in PROBLEM_NAMES:
        raise ValueError(f"unknown problem {args.problem!r}; known: {', '.join(PROBLEM_NAMES)}")
    x0_mode, x0_values = "default", None
    if args.x0 is not None:
        if args.x0 == "ones":
            x0_mode = "ones"
        elif args.x0 == "random":
            x0_mode = "random"
        else:
            x0_mode = "explicit"
            x0_values = [float(t) for t in args.x0.split(",")]
    overrides = {}
    for key in ("mu", "beta", "gamma", "tau", "tau_minus", "tau_plus", "eta", "m_max"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    return RunSpec(
        problem=args.problem,
        n=args.n,
        x0_mode=x0_mode,
        x0_values=x0_values,
        seed=args.seed,
        schedule=args.schedule,
        theta=args.theta,
        lambda_fallback=getattr(args, "lam", 0.0) or 0.0,
        epsilon=args.eps,
        max_iterations=args.max_iters,
        step_overrides=overrides,
        M0=args.m0,
        trace_out=args.trace_out,
        report_out=args.report_out,
    )


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--problem", required=True)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--x0", help="'ones', 'random', or a comma-separated list")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--schedule", choices=["grad", "eps", "fixed"], default="grad")
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--max-iters", type=int, default=100_000)
    p.add_argument("--m-max", dest="m_max", type=int)
    p.add_argument("--mu", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--tau-minus", dest="tau_minus", type=float)
    p.add_argument("--tau-plus", dest="tau_plus", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--m0", type=float, default=1.0)
    p.add_argument("--trace-out")
    p.add_argument("--report-out")


def cmd_solve(args: argparse.Namespace) -> int:
    try:
        spec = _spec_from_args(args)
        report = run_spec(spec)
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    if spec.trace_out:
        write_trace(spec.trace_out, report.trace)
    if spec.report_out:
        write_report(spec.report_out, spec, report)
    c = report.counters
    print(
        f"{spec.problem} n={spec.n} outcome={report.outcome.value} "
        f"iters={report.iterations} g_final={report.final_gradient_norm:.3e} "
        f"evals(f/g/hvp/hess)={c.value_evals}/{c.gradient_evals}/{c.hvp_evals}/{c.hessian_points}"
    )
    if report.outcome is Outcome.CONVERGED:
        return EXIT_OK
    if report.outcome is Outcome.NUMERICAL_FAILURE:
        return EXIT_NUMERICAL
    return EXIT_NOT_CONVERGED


def cmd_order(args: argparse.Namespace) -> int:
    try:
        thetas = [float(t) for t in args.theta.split(",")]
        if any(t < 0 for t in thetas):
            raise ValueError("theta values must be >= 0")
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    g_lo, g_hi = args.window
    pair_rows = []
    status = EXIT_OK
    for theta in thetas:
        spec = RunSpec(
            problem=args.problem,
            n=args.n,
            x0_mode="explicit",
            x0_values=[1.0] * args.n,
            schedule="grad",
            theta=theta,
            epsilon=args.eps,
            max_iterations=args.max_iters,
            # The vanishing-direction safeguard would stop the run before
            # the gradient traverses the measurement window.
            min_direction_norm=0.0,
        )
        report = run_spec(spec)
        est = estimate_local_order(report.trace, g_lo, g_hi)
        predicted = predicted_local_order(theta)
        if est is None:
            print(f"theta={theta:g} predicted={predicted:.4f} measured=NA "
                  f"(warning: fewer than 3 qualifying pairs)")
            status = EXIT_NOT_CONVERGED
        else:
            print(f"theta={theta:g} predicted={predicted:.4f} "
                  f"measured={est.slope:.4f} pairs={est.pairs}")
        gs = [rec.g for rec in report.trace]
        for a, b in zip(gs, gs[1:]):
            pair_rows.append((theta, np.log(a), np.log(b)))
    if args.pairs_out:
        with open(args.pairs_out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["theta", "log_g_k", "log_g_next"])
            writer.writerows(pair_rows)
    return status


def cmd_bench(args: argparse.Namespace) -> int:
    try:
        with open(args.manifest) as fh:
            entries = json.load(fh)
        if not isinstance(entries, list) or not entries:
            raise ValueError("manifest must be a non-empty JSON list of run specs")
        specs = [RunSpec(**entry) for entry in entries]
    except (OSError, TypeError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE

    def one(spec: RunSpec) -> dict:
        row = {
            "label": spec.label or f"{spec.problem}-n{spec.n}-{spec.schedule}-theta{spec.theta}",
            "problem": spec.problem,
            "n": spec.n,
            "schedule": spec.schedule,
            "theta": spec.theta,
            "lambda": spec.lambda_fallback,
        }
        try:
            report = run_spec(spec)
        except Exception as err:  # isolate per-run failures
            row.update(outcome="error", error=str(err))
            return row
        row.update(
            outcome=report.outcome.value,
            iterations=report.iterations,
            final_gradient_norm=report.final_gradient_norm,
        )
        if report.trace:
            row.update(dataclasses.asdict(summarize(report.trace, spec.n)))
        return row

    with ThreadPoolExecutor(max_workers=min(8, len(specs))) as pool:
        rows = list(pool.map(one, specs))

    fields = sorted({key for row in rows for key in row})
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            writer.writerows(rows)
    if args.aggregate_out:
        with open(args.aggregate_out, "w") as fh:
            json.dump(rows, fh, indent=2)
            fh.write("\n")
    ok = sum(row.get("outcome") == "converged" for row in rows)
    print(f"{ok}/{len(rows)} runs converged")
    for row in rows:
        print(f"  {row['label']}: {row.get('outcome')}")
    return EXIT_OK if ok == len(rows) else EXIT_NOT_CONVERGED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regnewton",
        description="Matrix-free adaptive regularized Newton-CG solver",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run a single solve")
    _add_run_flags(p_solve)
    # Let values like "--x0 -1.2,1" parse as arguments, not option names.
    p_solve._negative_number_matcher = re.compile(r"^-\d[\d.,eE+-]*$")
    p_solve.set_defaults(func=cmd_solve)

    p_order = sub.add_parser("order", help="measure empirical local convergence order")
    p_order.add_argument("--theta", default="0,0.5,1,1.5", help="comma-separated theta values")
    p_order.add_argument("--problem", default="scalar_quad")
    p_order.add_argument("--n", type=int, default=1)
    p_order.add_argument("--eps", type=float, default=1e-40)
    p_order.add_argument("--max-iters", type=int, default=10_000)
    p_order.add_argument("--window", type=float, nargs=2, default=(1e-12, 1e-2),
                         metavar=("G_LO", "G_HI"))
    p_order.add_argument("--pairs-out", help="CSV of (theta, log g_k, log g_{k+1}) pairs")
    p_order.set_defaults(func=cmd_order)

    p_bench = sub.add_parser("bench", help="run a batch of solves from a JSON manifest")
    p_bench.add_argument("--manifest", required=True)
    p_bench.add_argument("--out", help="CSV summary, one row per run")
    p_bench.add_argument("--aggregate-out", help="JSON aggregate document")
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
