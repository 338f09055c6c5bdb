"""Function/derivative oracle honoring demanded absolute accuracy bounds.

The solver never sees exact problem data directly: it asks an `Oracle` for
a value or a derivative bundle together with an absolute error bound per
quantity, and the oracle must return something within that bound.  Noise
injection is pluggable (`NoiseModel`); the bound is a hard contract for
every model, checked against ground truth in the test suite.

Evaluations are counted (`EvalCounters`).  Bundle requests at an unchanged
point with non-decreasing bounds are served from a one-slot cache without
counting; a strictly tighter bound at the same point re-evaluates.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensors import DerivativeBundle, frobenius_norm, operator_norm, symmetrize

__all__ = [
    "Problem",
    "NoiseModel",
    "EvalCounters",
    "Oracle",
    "make_problem",
    "PROBLEM_NAMES",
    "estimate_lipschitz",
]

NOISE_KINDS = ("exact", "truncation", "bounded_random")


@dataclass(frozen=True)
class Problem:
    """Smooth unconstrained test problem with exact derivatives up to p_max."""

    name: str
    dim: int
    eval_value: callable
    eval_derivative: callable  # (x, i) -> symmetric order-i tensor
    f_low: float
    x0: np.ndarray
    p_max: int = 3
    lipschitz_hint: float | None = None

    def value(self, x) -> float:
        return float(self.eval_value(np.asarray(x, dtype=float)))

    def derivative(self, x, i: int) -> np.ndarray:
        if not 1 <= i <= self.p_max:
            raise ValueError(f"derivative order {i} outside 1..{self.p_max}")
        return np.asarray(self.eval_derivative(np.asarray(x, dtype=float), i), dtype=float)

    def exact_bundle(self, x, p: int) -> DerivativeBundle:
        tensors = [self.derivative(x, i) for i in range(1, p + 1)]
        return DerivativeBundle(self.value(x), tensors, (0.0,) * p)


@dataclass(frozen=True)
class NoiseModel:
    """How much of the permitted error budget gets injected, and how.

    kind:
        "exact"          -- no error regardless of the bound;
        "truncation"     -- round to the coarsest decimal grid still inside
                            the bound (multi-precision style);
        "bounded_random" -- pseudo-random perturbation of magnitude
                            fill_fraction * bound.
    """

    kind: str = "exact"
    fill_fraction: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; choose from {NOISE_KINDS}")
        if not 0.0 <= self.fill_fraction <= 1.0:
            raise ValueError("fill_fraction must be in [0, 1]")


@dataclass
class EvalCounters:
    value_evals: int = 0
    derivative_evals: int = 0
    per_iteration: list = field(default_factory=list)

    def snapshot(self) -> tuple:
        return (self.value_evals, self.derivative_evals)


def _truncate_scalar(exact: float, bound: float) -> float:
    # Coarsest number of decimals whose actual rounding error fits the bound.
    if bound <= 0:
        return exact
    for d in range(0, 17):
        v = round(exact, d)
        if abs(v - exact) <= bound:
            return v
    return exact


def _truncate_tensor(exact: np.ndarray, bound: float) -> np.ndarray:
    # Error measured in a norm that upper-bounds the induced norm, so the
    # contract holds whatever the order.
    if bound <= 0:
        return exact.copy()
    for d in range(0, 17):
        v = np.round(exact, d)
        err = v - exact
        if exact.ndim == 1:
            size = float(np.linalg.norm(err))
        elif exact.ndim == 2:
            size = operator_norm(err)
        else:
            size = frobenius_norm(err)
        if size <= bound:
            return v
    return exact.copy()


class Oracle:
    """Owns the noise stream, evaluation counters and the bundle cache.

    One solver run owns one oracle; independent runs may hold independent
    oracles concurrently.  With a fixed seed the injected noise is a pure
    function of the call sequence.
    """

    def __init__(self, problem: Problem, noise: NoiseModel):
        self.problem = problem
        self.noise = noise
        self.counters = EvalCounters()
        self._rng = np.random.default_rng(noise.seed)
        self._cached = None  # (x, accuracy array, bundle)

    def inexact_value(self, x, bound: float) -> float:
        """f at x with absolute error at most `bound` (>= 0). Counts one eval."""
        if bound < 0:
            raise ValueError("bound must be >= 0")
        x = np.asarray(x, dtype=float)
        exact = self.problem.value(x)
        self.counters.value_evals += 1
        if self.noise.kind == "exact" or bound == 0.0:
            return exact
        if self.noise.kind == "truncation":
            return _truncate_scalar(exact, bound)
        sign = 1.0 if self._rng.random() < 0.5 else -1.0
        return exact + sign * self.noise.fill_fraction * bound

    def _perturb_tensor(self, exact: np.ndarray, bound: float) -> np.ndarray:
        if self.noise.kind == "exact" or bound == 0.0:
            return exact.copy()
        if self.noise.kind == "truncation":
            return _truncate_tensor(exact, bound)
        direction = symmetrize(self._rng.standard_normal(exact.shape))
        # Scale against a norm that is exact for orders 1-2 and an upper
        # bound (Frobenius) for order 3, so the induced-norm contract can
        # never be violated.
        if exact.ndim <= 2:
            size = operator_norm(direction)
        else:
            size = frobenius_norm(direction)
        if size == 0.0:
            return exact.copy()
        return exact + (self.noise.fill_fraction * bound / size) * direction

    def inexact_bundle(self, x, accuracies, p: int) -> DerivativeBundle:
        """Derivative bundle at x with per-order error bounds `accuracies`.

        Counts one derivative evaluation unless served from the cache (same
        point, bounds no tighter than the cached ones).
        """
        x = np.asarray(x, dtype=float)
        accuracies = np.asarray(accuracies, dtype=float)
        if accuracies.shape != (p,):
            raise ValueError(f"need {p} accuracy entries, got {accuracies.shape}")
        if np.any(accuracies < 0):
            raise ValueError("accuracy entries must be >= 0")
        if self._cached is not None:
            cx, cacc, cbundle = self._cached
            if (
                cx.shape == x.shape
                and np.array_equal(cx, x)
                and len(cacc) == p
                and np.all(accuracies >= cacc)
            ):
                return cbundle
        tensors = []
        for i in range(1, p + 1):
            exact = self.problem.derivative(x, i)
            tensors.append(self._perturb_tensor(exact, float(accuracies[i - 1])))
        # The value slot is informational: decrements and measures are
        # value-independent, so it never steers the algorithm and is not
        # counted as an objective evaluation.
        value = self.problem.value(x)
        bundle = DerivativeBundle(value, tensors, tuple(accuracies))
        self.counters.derivative_evals += 1
        self._cached = (x.copy(), accuracies.copy(), bundle)
        return bundle


# ---------------------------------------------------------------------------
# Built-in benchmark problems.  All expose exact derivatives up to order 3
# and a certified lower bound on f, which is what certificate verification
# and the theoretical eval bounds need.
# ---------------------------------------------------------------------------

PROBLEM_NAMES = ("quadratic", "rosenbrock", "quartic", "sineq")


def _quadratic(dim: int) -> Problem:
    # Fixed rotation per dimension so runs are reproducible across processes.
    rng = np.random.default_rng(1234 + dim)
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    a = q @ np.diag(np.linspace(1.0, 10.0, dim)) @ q.T
    a = 0.5 * (a + a.T)

    def value(x):
        return 0.5 * x @ a @ x

    def deriv(x, i):
        if i == 1:
            return a @ x
        if i == 2:
            return a
        return np.zeros((dim,) * i)

    return Problem("quadratic", dim, value, deriv, 0.0, np.ones(dim), 3, None)


def _rosenbrock(dim: int) -> Problem:
    if dim < 2:
        raise ValueError("rosenbrock needs dim >= 2")

    def value(x):
        return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))

    def deriv(x, i):
        n = dim
        if i == 1:
            g = np.zeros(n)
            g[:-1] += -400.0 * x[:-1] * (x[1:] - x[:-1] ** 2) - 2.0 * (1.0 - x[:-1])
            g[1:] += 200.0 * (x[1:] - x[:-1] ** 2)
            return g
        if i == 2:
            h = np.zeros((n, n))
            for k in range(n - 1):
                h[k, k] += -400.0 * x[k + 1] + 1200.0 * x[k] ** 2 + 2.0
                h[k, k + 1] += -400.0 * x[k]
                h[k + 1, k] += -400.0 * x[k]
                h[k + 1, k + 1] += 200.0
            return h
        t = np.zeros((n, n, n))
        for k in range(n - 1):
            t[k, k, k] += 2400.0 * x[k]
            t[k, k, k + 1] += -400.0
            t[k, k + 1, k] += -400.0
            t[k + 1, k, k] += -400.0
        return t

    x0 = np.array([-1.2 if k % 2 == 0 else 1.0 for k in range(dim)])
    return Problem("rosenbrock", dim, value, deriv, 0.0, x0, 3, None)


def _quartic(dim: int) -> Problem:
    # Separable double well: nonconvex, minimizers at +-1 per coordinate.
    def value(x):
        return float(np.sum((x**2 - 1.0) ** 2))

    def deriv(x, i):
        if i == 1:
            return 4.0 * x * (x**2 - 1.0)
        if i == 2:
            return np.diag(12.0 * x**2 - 4.0)
        t = np.zeros((dim,) * 3)
        idx = np.arange(dim)
        t[idx, idx, idx] = 24.0 * x
        return t

    x0 = 0.6 * np.ones(dim)
    x0[1::2] = -0.4
    return Problem("quartic", dim, value, deriv, 0.0, x0, 3, None)


def _sineq(dim: int) -> Problem:
    def value(x):
        return float(np.sum(np.sin(x)) + 0.5 * x @ x)

    def deriv(x, i):
        if i == 1:
            return np.cos(x) + x
        if i == 2:
            return np.diag(-np.sin(x) + 1.0)
        t = np.zeros((dim,) * 3)
        idx = np.arange(dim)
        t[idx, idx, idx] = -np.cos(x)
        return t

    return Problem("sineq", dim, value, deriv, float(-dim), np.ones(dim), 3, 2.0)


def make_problem(name: str, dim: int) -> Problem:
    factories = {
        "quadratic": _quadratic,
        "rosenbrock": _rosenbrock,
        "quartic": _quartic,
        "sineq": _sineq,
    }
    if name not in factories:
        raise ValueError(f"unknown problem {name!r}; choose from {PROBLEM_NAMES}")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    return factories[name](dim)


def estimate_lipschitz(
    problem: Problem,
    x0,
    p: int,
    radius: float | None = None,
    samples: int = 48,
    seed: int = 7,
) -> float:
    """Sampled estimate of max_j L_{f,j}, j = 0..p, near the start point.

    Uses derivative-norm bounds where the next-order tensor is available and
    difference quotients of the order-p tensor otherwise; floored at 1.
    A user-supplied `lipschitz_hint` wins outright.
    """
    if problem.lipschitz_hint is not None:
        return max(1.0, float(problem.lipschitz_hint))
    x0 = np.asarray(x0, dtype=float)
    if radius is None:
        radius = max(1.0, float(np.linalg.norm(x0)) + 1.0)
    rng = np.random.default_rng(seed)
    pts = x0 + radius * rng.uniform(-1.0, 1.0, size=(samples, x0.size))
    pts = np.vstack([x0[None, :], pts])
    best = 1.0
    for x in pts:
        for j in range(0, p + 1):
            if j + 1 <= problem.p_max:
                best = max(best, operator_norm(problem.derivative(x, j + 1)))
            else:
                h = 1e-4
                u = rng.standard_normal(x.size)
                u /= np.linalg.norm(u)
                dp = problem.derivative(x + h * u, j) - problem.derivative(x - h * u, j)
                best = max(best, frobenius_norm(dp) / (2.0 * h))
    return float(best)


def lipschitz_over_points(problem: Problem, points, order: int) -> float:
    """Estimate of L_{f,order} over a visited region (trace points/segments)."""
    pts = [np.asarray(x, dtype=float) for x in points]
    best = 1.0
    for x in pts:
        if order + 1 <= problem.p_max:
            best = max(best, operator_norm(problem.derivative(x, order + 1)))
    for a, b in zip(pts[:-1], pts[1:]):
        gap = float(np.linalg.norm(a - b))
        if gap > 1e-12:
            diff = problem.derivative(a, order) - problem.derivative(b, order)
            best = max(best, frobenius_norm(diff) / gap)
    return float(best)
