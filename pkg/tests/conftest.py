"""Shared fixtures: the benchmark run grid and independent reference oracles.

The reference evaluators here are deliberately written with explicit loops
and grids, independent of the package's contraction/solver code paths, so
they can serve as oracles for it.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import pytest

from arq import NoiseModel, SolverConfig, make_problem, solve
from arq.harness import expand_seeds

BENCH_PROBLEMS = (("quadratic", 4), ("rosenbrock", 2), ("quartic", 3), ("sineq", 4))
BENCH_NOISES = ("exact", "truncation", "bounded_random")
BENCH_EPS = (1e-2, 1e-3)
BENCH_QS = (1, 2)
MASTER_SEED = 20240809
N_SEEDS = 5


def bench_seeds():
    return [s % 2**32 for s in expand_seeds(MASTER_SEED, N_SEEDS)]


def bench_config(q: int, eps_min: float, noise: str) -> SolverConfig:
    kwargs = dict(p=2, q=q, epsilons=(eps_min,) * q)
    if noise == "exact":
        kwargs.update(acc0=(0.0, 0.0), acc_max=0.0)
    return SolverConfig(**kwargs)


@dataclass
class BenchRun:
    problem_name: str
    dim: int
    noise: str
    seed: int
    q: int
    eps_min: float
    problem: object
    config: SolverConfig
    result: object

    @property
    def t_records(self):
        return [r for r in self.result.trace if r.kind in ("successful", "unsuccessful")]


@dataclass
class BenchSuite:
    runs: list
    build_seconds: float


@pytest.fixture(scope="session")
def benchmark_suite():
    import time

    start = time.perf_counter()
    runs = []
    for name, dim in BENCH_PROBLEMS:
        problem = make_problem(name, dim)
        for noise in BENCH_NOISES:
            for seed in bench_seeds():
                for q in BENCH_QS:
                    for eps_min in BENCH_EPS:
                        config = bench_config(q, eps_min, noise)
                        result = solve(problem, NoiseModel(noise, 0.9, seed), config)
                        runs.append(
                            BenchRun(name, dim, noise, seed, q, eps_min, problem, config, result)
                        )
    return BenchSuite(runs, time.perf_counter() - start)


# ---------------------------------------------------------------------------
# Independent reference evaluators.
# ---------------------------------------------------------------------------


def reference_taylor_eval(value, tensors, s, j):
    """Multinomial-expansion Taylor evaluation with explicit index loops."""
    total = float(value)
    n = len(s)
    for order in range(1, j + 1):
        t = np.asarray(tensors[order - 1], dtype=float)
        acc = 0.0
        for idx in itertools.product(range(n), repeat=order):
            term = float(t[idx])
            for a in idx:
                term *= s[a]
            acc += term
        total += acc / math.factorial(order)
    return total


def _grid_decrements(tensors, d):
    dec = -(d @ tensors[0])
    if len(tensors) >= 2:
        dec -= 0.5 * np.einsum("ai,ij,aj->a", d, tensors[1], d)
    if len(tensors) >= 3:
        dec -= np.einsum("ijk,ai,aj,ak->a", tensors[2], d, d, d) / 6.0
    return dec


def polar_grid_phi(tensors, delta, n_angle=4000, n_radius=100, refine=2):
    """Ball-maximized decrement of a degree-<=3 polynomial on a polar grid (n=2).

    The radius grid is rescanned around the incumbent a couple of times so
    interior maximizers are resolved well below the comparison tolerances.
    """
    angles = np.linspace(0.0, 2.0 * math.pi, n_angle, endpoint=False)
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    lo, hi = delta / n_radius, delta
    best = 0.0
    best_r = delta
    for _ in range(1 + refine):
        radii = np.linspace(lo, hi, n_radius)
        d = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, 2)
        dec = _grid_decrements(tensors, d)
        idx = int(np.argmax(dec))
        if float(dec[idx]) > best:
            best = float(dec[idx])
            best_r = radii[idx // n_angle]
        step = (hi - lo) / (n_radius - 1)
        lo, hi = max(1e-12, best_r - step), min(delta, best_r + step)
    return best


def central_diff_gradient(fun, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2.0 * h)
    return g


def central_diff_hessian(fun, x, h=1e-5):
    # Extended precision: at h = 1e-5 the subtraction roundoff in float64
    # (~2e-6) would swamp tolerances of 1e-6.
    x = np.asarray(x, dtype=np.longdouble)
    h = np.longdouble(h)
    n = x.size
    out = np.zeros((n, n), dtype=np.longdouble)
    for i in range(n):
        for j in range(n):
            pp = x.copy(); pp[i] += h; pp[j] += h
            pm = x.copy(); pm[i] += h; pm[j] -= h
            mp = x.copy(); mp[i] -= h; mp[j] += h
            mm = x.copy(); mm[i] -= h; mm[j] -= h
            out[i, j] = (fun(pp) - fun(pm) - fun(mp) + fun(mm)) / (4.0 * h * h)
    return np.asarray(out, dtype=float)


def random_symmetric(rng, n, order):
    t = rng.standard_normal((n,) * order)
    if order == 1:
        return t
    perms = list(itertools.permutations(range(order)))
    return sum(np.transpose(t, p) for p in perms) / len(perms)
