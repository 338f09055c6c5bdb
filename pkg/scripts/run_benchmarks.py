#!/usr/bin/env python3
"""Run the benchmark grid and tally certificate verification.

Covers every built-in problem against every noise model over a seed fan-out,
writes one summary row per run, and rechecks each certificate with exact
derivatives.  Intended as the quick reproduce-everything entry point:

    python scripts/run_benchmarks.py --out results/ --seeds 5
"""
import argparse
import csv
import sys
import time
from pathlib import Path

from arq import BudgetExhaustedError, NoiseModel, SolverConfig, make_problem, solve
from arq.harness import expand_seeds, verify_certificate, write_trace_csv

PROBLEMS = (("quadratic", 4), ("rosenbrock", 2), ("quartic", 3), ("sineq", 4))
NOISES = ("exact", "truncation", "bounded_random")
EPS = (1e-2, 1e-3)
QS = (1, 2)

COLUMNS = (
    "problem", "dim", "noise", "seed", "q", "eps", "status", "iterations",
    "successful", "unsuccessful", "accuracy_improving", "value_evals",
    "deriv_evals", "f_final", "verified",
)


def run_grid(out_dir: Path, n_seeds: int, master_seed: int, write_traces: bool):
    out_dir.mkdir(parents=True, exist_ok=True)
    seeds = [s % 2**32 for s in expand_seeds(master_seed, n_seeds)]
    rows = []
    n_fail = 0
    for name, dim in PROBLEMS:
        problem = make_problem(name, dim)
        for noise_kind in NOISES:
            for seed in seeds:
                for q in QS:
                    for eps in EPS:
                        kwargs = dict(p=2, q=q, epsilons=(eps,) * q)
                        if noise_kind == "exact":
                            kwargs.update(acc0=(0.0, 0.0), acc_max=0.0)
                        config = SolverConfig(**kwargs)
                        noise = NoiseModel(noise_kind, 0.9, seed)
                        tag = f"{name}_{noise_kind}_s{seed}_q{q}_e{eps:g}"
                        row = dict(problem=name, dim=dim, noise=noise_kind,
                                   seed=seed, q=q, eps=eps)
                        try:
                            result = solve(problem, noise, config)
                        except BudgetExhaustedError:
                            row.update(status="budget", verified="")
                            rows.append(row)
                            n_fail += 1
                            continue
                        kinds = [r.kind for r in result.trace]
                        checks = verify_certificate(problem, result.certificate)
                        verified = all(c["ok"] for c in checks)
                        n_fail += 0 if verified else 1
                        row.update(
                            status="ok",
                            iterations=result.iterations,
                            successful=kinds.count("successful"),
                            unsuccessful=kinds.count("unsuccessful"),
                            accuracy_improving=kinds.count("accuracy_improving"),
                            value_evals=result.counters.value_evals,
                            deriv_evals=result.counters.derivative_evals,
                            f_final=problem.value(result.certificate.x_eps),
                            verified=verified,
                        )
                        rows.append(row)
                        if write_traces:
                            write_trace_csv(out_dir / "traces" / f"{tag}.csv", result.trace)
    with (out_dir / "benchmarks.csv").open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    return rows, n_fail


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--seeds", type=int, default=5, help="seeds per cell")
    parser.add_argument("--master-seed", type=int, default=20240809)
    parser.add_argument("--traces", action="store_true", help="write per-run trace CSVs")
    args = parser.parse_args()

    start = time.perf_counter()
    rows, n_fail = run_grid(Path(args.out), args.seeds, args.master_seed, args.traces)
    ok = sum(1 for r in rows if r["status"] == "ok")
    verified = sum(1 for r in rows if r.get("verified") is True)
    print(f"{len(rows)} runs: {ok} terminated, {verified} verified, "
          f"{n_fail} problems, {time.perf_counter() - start:.1f}s")
    print(f"summary written to {Path(args.out) / 'benchmarks.csv'}")
    return 0 if n_fail == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
