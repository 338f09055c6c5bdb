"""Ball-constrained decrement maximization and regularized-model minimization.

Two jobs live here.  `optimality_measure` maximizes a degree-j Taylor
decrement over a Euclidean ball, the quantity the outer algorithm uses both
as its optimality measure and as its progress certificate:

    order 1  closed form (scaled steepest descent), exact;
    order 2  global trust-region subproblem via eigendecomposition and a
             secular-equation root find, near-exact;
    order 3  multi-start projected gradient ascent, certified only up to a
             configurable fraction of the optimum.

`minimize_model` drives a safeguarded trust-region Newton iteration on the
regularized Taylor model until the step is either long (norm >= 1) or the
model's own ball measures at the step are provably small, the two exits the
outer algorithm accepts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .tensors import (
    DerivativeBundle,
    RegularizedModel,
    model_decrement,
    model_eval,
    regularizer_derivative,
    shifted_model_bundle,
    shifted_model_derivatives,
    taylor_decrement,
)

__all__ = [
    "MeasureResult",
    "StepResult",
    "SubsolverStallError",
    "ORDER_GUARANTEES",
    "solve_trs",
    "optimality_measure",
    "radius_search",
    "minimize_model",
]

# Certified fraction of the true ball-constrained optimum, per order.
ORDER_GUARANTEES = {1: 1.0, 2: 1.0 - 1e-8, 3: 0.5}

_ORDER3_STARTS = 50
_ORDER3_ITERS = 80


class SubsolverStallError(RuntimeError):
    """Inner solve hit its iteration or radius floor; carries diagnostics."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class MeasureResult:
    """Certified lower bound on a ball-constrained Taylor decrement maximum."""

    phi_bar: float
    displacement: np.ndarray
    guarantee: float


@dataclass(frozen=True)
class StepResult:
    """Outcome of approximately minimizing the regularized model.

    Either ``long_step`` (norm >= 1, no radii needed) or a short step with
    per-order radii and the displacements certifying that the model's ball
    measures at the step are small.
    """

    step: np.ndarray
    radii: np.ndarray | None
    inner_displacements: tuple | None
    long_step: bool
    inner_iterations: int = 0


def _lex_ge(a: np.ndarray, b: np.ndarray) -> bool:
    for x, y in zip(a, b):
        if x > y:
            return True
        if x < y:
            return False
    return True


def _pick_candidate(cands, qval):
    """Best objective value; lexicographically largest vector breaks ties."""
    best = None
    best_v = None
    for d in cands:
        v = qval(d)
        if best is None or v < best_v - 1e-14 * (1.0 + abs(best_v)):
            best, best_v = d, v
        elif abs(v - best_v) <= 1e-14 * (1.0 + abs(best_v)) and _lex_ge(d, best):
            best, best_v = d, v
    return best


def _complete_to_boundary(base, u, delta, qval):
    """Both boundary points of the line base + t u, best-then-lex picked.

    Solves ||base + t u||^2 = delta^2 exactly, so the completion stays on
    the sphere even when base is not orthogonal to u.
    """
    bu = float(base @ u)
    disc = bu * bu + delta**2 - float(base @ base)
    root = math.sqrt(max(disc, 0.0))
    return _pick_candidate([base + (-bu + root) * u, base + (-bu - root) * u], qval)


def solve_trs(g: np.ndarray, h: np.ndarray, delta: float) -> np.ndarray:
    """Global solution of min g.d + 0.5 d'Hd subject to ||d|| <= delta.

    The global minimizer d* satisfies (H + mu I) d* = -g with
    H + mu I >= 0, mu >= 0 and mu (delta - ||d*||) = 0.  Working in the
    eigenbasis of H, the boundary multiplier solves the secular equation
    ||d(mu)|| = delta, here root-found on the better-conditioned form
    1/||d(mu)|| = 1/delta.  The hard case (gradient orthogonal to the
    minimal eigenspace with the pseudo-solution interior) is completed by
    moving along a minimal eigenvector to the boundary.
    """
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    delta = float(delta)
    if delta <= 0:
        raise ValueError("delta must be > 0")
    n = g.size
    lam, q = np.linalg.eigh(0.5 * (h + h.T))
    gh = q.T @ g
    lam1 = float(lam[0])
    scale = max(1.0, float(np.max(np.abs(lam))), float(np.linalg.norm(gh)) / delta)

    def qval(d):
        return float(g @ d + 0.5 * d @ h @ d)

    # Strictly convex interior solution.
    if lam1 > 0:
        d = q @ (-gh / lam)
        if np.linalg.norm(d) <= delta:
            return d

    mu_floor = max(0.0, -lam1)
    min_mask = lam - lam1 <= 1e-12 * scale
    gh_min = float(np.max(np.abs(gh[min_mask]), initial=0.0))

    nz = ~min_mask
    d0 = np.zeros(n)
    d0[nz] = -gh[nz] / (lam[nz] + mu_floor)
    nd0 = float(np.linalg.norm(d0))

    if gh_min <= 1e-11 * scale and nd0 <= delta:
        return _complete_to_boundary(q @ d0, q[:, 0], delta, qval)

    def inv_norm_gap(mu):
        return 1.0 / float(np.linalg.norm(gh / (lam + mu))) - 1.0 / delta

    lo = mu_floor + max(1e-14, 1e-13 * scale)
    if inv_norm_gap(lo) >= 0.0:
        # Root is pinched against the floor; the offset solution already
        # sits (numerically) inside the ball, so complete as in the hard case.
        base = q @ (-gh / (lam + lo))
        return _complete_to_boundary(base, q[:, 0], delta, qval)
    hi = max(1.0, mu_floor + scale)
    while inv_norm_gap(hi) < 0.0:
        hi *= 2.0
        if hi > 1e300:
            raise RuntimeError("secular-equation bracket failed")
    mu = brentq(inv_norm_gap, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=200)
    d = q @ (-gh / (lam + mu))
    nd = float(np.linalg.norm(d))
    if nd > 0:
        d *= delta / nd
    return d


def _measure_order1(bundle: DerivativeBundle, delta: float) -> MeasureResult:
    g = bundle.tensors[0]
    ng = float(np.linalg.norm(g))
    if ng == 0.0:
        return MeasureResult(0.0, np.zeros(bundle.dim), 1.0)
    d = -(delta / ng) * g
    return MeasureResult(taylor_decrement(bundle, d, 1), d, 1.0)


def _measure_order2(bundle: DerivativeBundle, delta: float) -> MeasureResult:
    d = solve_trs(bundle.tensors[0], bundle.tensors[1], delta)
    dec = taylor_decrement(bundle, d, 2)
    if dec <= 0.0:
        return MeasureResult(0.0, np.zeros(bundle.dim), ORDER_GUARANTEES[2])
    return MeasureResult(dec, d, ORDER_GUARANTEES[2])


def _project_ball(d: np.ndarray, delta: float) -> np.ndarray:
    nd = float(np.linalg.norm(d))
    if nd <= delta:
        return d
    return d * (delta / nd)


def _measure_order3(bundle: DerivativeBundle, delta: float) -> MeasureResult:
    g, h, t = bundle.tensors[0], bundle.tensors[1], bundle.tensors[2]
    n = bundle.dim
    rng = np.random.default_rng(101)

    def dec(d):
        return taylor_decrement(bundle, d, 3)

    def grad_dec(d):
        return -(g + h @ d + 0.5 * (t @ d) @ d)

    starts = []
    ng = float(np.linalg.norm(g))
    if ng > 0:
        starts.append(-(delta / ng) * g)
    starts.append(solve_trs(g, h, delta))
    for i in range(n):
        e = np.zeros(n)
        e[i] = delta
        starts.extend([e, -e])
    while len(starts) < _ORDER3_STARTS:
        v = rng.standard_normal(n)
        v *= delta * rng.random() ** (1.0 / n) / np.linalg.norm(v)
        starts.append(v)

    best_d = np.zeros(n)
    best_v = 0.0
    for d in starts[:_ORDER3_STARTS]:
        d = _project_ball(np.asarray(d, dtype=float), delta)
        step = 0.5 * delta
        v = dec(d)
        for _ in range(_ORDER3_ITERS):
            gr = grad_dec(d)
            ngr = float(np.linalg.norm(gr))
            if ngr < 1e-14:
                break
            cand = _project_ball(d + step * gr / ngr, delta)
            cv = dec(cand)
            if cv > v:
                d, v = cand, cv
                step *= 1.3
            else:
                step *= 0.5
                if step < 1e-12 * delta:
                    break
        if v > best_v or (v == best_v and _lex_ge(d, best_d)):
            best_d, best_v = d, v
    if best_v <= 0.0:
        return MeasureResult(0.0, np.zeros(n), ORDER_GUARANTEES[3])
    return MeasureResult(best_v, best_d, ORDER_GUARANTEES[3])


def optimality_measure(bundle: DerivativeBundle, j: int, delta: float) -> MeasureResult:
    """Displacement in the delta-ball whose degree-j decrement certifies a
    fraction of the ball optimum (1, 1 - 1e-8 and 0.5 for orders 1, 2, 3)."""
    if not 1 <= j <= bundle.degree:
        raise ValueError(f"order {j} outside 1..{bundle.degree}")
    delta = float(delta)
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must be in (0, 1], got {delta}")
    if j == 1:
        return _measure_order1(bundle, delta)
    if j == 2:
        return _measure_order2(bundle, delta)
    return _measure_order3(bundle, delta)


def _measure_coef(theta: float, omega: float, varsigma: float) -> float:
    return varsigma * theta * (1.0 - omega) / (2.0 * (1.0 + omega))


def radius_search(
    model: RegularizedModel,
    s: np.ndarray,
    ell: int,
    epsilon_ell: float,
    theta: float,
    omega: float,
    varsigma: float,
    delta_cap: float,
    floor: float = 1e-8,
):
    """Largest radius on a halving grid from delta_cap at which the model's
    order-ell ball measure at s is below its smallness target.

    Only orders >= 3 are searched; orders 1 and 2 keep radius 1.
    """
    if ell < 3:
        raise ValueError("radius is fixed at 1 for orders 1 and 2")
    coef = _measure_coef(theta, omega, varsigma)
    sb = shifted_model_bundle(model, s, ell)
    delta = min(1.0, float(delta_cap))
    while delta >= floor:
        m = optimality_measure(sb, ell, delta)
        if m.phi_bar <= coef * epsilon_ell * delta**ell / math.factorial(ell):
            return delta, m
        delta *= 0.5
    raise SubsolverStallError(
        "radius search hit its floor",
        {"order": ell, "floor": floor, "epsilon": epsilon_ell},
    )


def _newton_hessian(model: RegularizedModel, s: np.ndarray) -> np.ndarray:
    """Second derivative of the model at s for the inner Newton iteration.

    For degree-1 models the Taylor part is affine, so only the regularizer
    curves; the shifted-derivative helper is capped at the model degree and
    cannot serve that case.
    """
    if model.degree >= 2:
        return shifted_model_derivatives(model, s, 2)
    p = model.degree
    return model.sigma / math.factorial(p + 1) * regularizer_derivative(s, p, 2)


def _certify_step(model, s, q, theta, omega, varsigma, epsilons, delta_caps):
    """Radii/displacements with all order-1..q model measures at s below
    target, or None if some order fails (checked cheapest first)."""
    coef = _measure_coef(theta, omega, varsigma)
    radii = np.ones(q)
    measures = []
    for ell in range(1, q + 1):
        if ell <= 2:
            delta = 1.0
            sb = shifted_model_bundle(model, s, ell)
            m = optimality_measure(sb, ell, delta)
            if m.phi_bar > coef * epsilons[ell - 1] * delta**ell / math.factorial(ell):
                return None
        else:
            try:
                delta, m = radius_search(
                    model, s, ell, epsilons[ell - 1], theta, omega, varsigma,
                    delta_caps[ell - 1],
                )
            except SubsolverStallError:
                return None
        radii[ell - 1] = delta
        measures.append(m)
    return radii, tuple(measures)


def minimize_model(
    model: RegularizedModel,
    warm_start: np.ndarray,
    q: int,
    theta: float,
    omega: float,
    varsigma: float,
    epsilons,
    delta_caps=None,
    max_inner: int = 500,
) -> StepResult:
    """Step for the outer algorithm: never worse than the warm start, and
    either long (norm >= 1) or certified nearly optimal for the model.

    A trust-region Newton iteration descends on the model from the warm
    start (steepest descent is implicit: the trust-region step degrades to
    it as the radius shrinks).  Every accepted iterate keeps the model
    decrement at least that of the warm start, so the descent postcondition
    holds by monotonicity.
    """
    s = np.asarray(warm_start, dtype=float).copy()
    epsilons = np.asarray(epsilons, dtype=float)
    if epsilons.shape != (q,):
        raise ValueError(f"need {q} epsilon entries, got {epsilons.shape}")
    if delta_caps is None:
        delta_caps = np.ones(q)
    target = model_decrement(model, s)
    if not target > 0:
        raise ValueError("warm start must strictly decrease the model")

    def finish(current, iterations):
        if np.linalg.norm(current) >= 1.0:
            return StepResult(current, None, None, True, iterations)
        cert = _certify_step(model, current, q, theta, omega, varsigma, epsilons, delta_caps)
        if cert is not None:
            radii, measures = cert
            return StepResult(current, radii, measures, False, iterations)
        return None

    out = finish(s, 0)
    if out is not None:
        return out

    tr = max(0.25, min(1.0, float(np.linalg.norm(s))))
    m_cur = model_eval(model, s)
    for it in range(1, max_inner + 1):
        g1 = shifted_model_derivatives(model, s, 1)
        h1 = _newton_hessian(model, s)
        d = solve_trs(g1, h1, tr)
        pred = -(g1 @ d + 0.5 * d @ h1 @ d)
        if pred <= 0 or np.linalg.norm(d) < 1e-16:
            # No descent available at this radius: the iterate is a numerical
            # second-order point of the model.
            out = finish(s, it)
            if out is not None:
                return out
            raise SubsolverStallError(
                "model minimizer converged but step certification failed",
                {"iterations": it, "grad_norm": float(np.linalg.norm(g1))},
            )
        cand = s + d
        m_new = model_eval(model, cand)
        actual = m_cur - m_new
        if actual > 0:
            s, m_cur = cand, m_new
            out = finish(s, it)
            if out is not None:
                return out
            if actual >= 0.75 * pred and np.linalg.norm(d) >= 0.9 * tr:
                tr = min(2.0 * tr, 1e3)
        else:
            tr *= 0.25
            if tr < 1e-14:
                out = finish(s, it)
                if out is not None:
                    return out
                raise SubsolverStallError(
                    "trust region collapsed before certification",
                    {"iterations": it, "grad_norm": float(np.linalg.norm(g1))},
                )
    raise SubsolverStallError(
        "inner iteration cap exceeded",
        {"iterations": max_inner, "step_norm": float(np.linalg.norm(s))},
    )
