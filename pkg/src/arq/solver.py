"""Adaptive regularization with demand-driven evaluation accuracy.

The driver alternates five phases per iteration k:

  step 1   measure approximate optimality of orders 1..q inside shrinking
           balls; terminate, demand better accuracy, or pick the order
           whose measured decrement is large enough to work with;
  step 2   approximately minimize the regularized degree-p Taylor model and
           vet the step's decrement (and, for short steps, the model's own
           measures) for accuracy;
  step 3   evaluate the objective at the trial point to within a fraction
           of the predicted decrease and accept/reject by the usual ratio;
  step 4   update the regularization weight from the ratio;
  step 5   tighten every derivative accuracy demand by a fixed factor when
           any accuracy check came back insufficient.

Iterations are classified successful / unsuccessful / accuracy-improving;
the trace records everything the property suite needs to recheck the run
against ground truth.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .check import CheckOutcome, check
from .oracle import EvalCounters, NoiseModel, Oracle, Problem, estimate_lipschitz
from .subsolvers import (
    ORDER_GUARANTEES,
    MeasureResult,
    StepResult,
    minimize_model,
    optimality_measure,
)
from .tensors import RegularizedModel, model_decrement, taylor_decrement

logger = logging.getLogger("arq")

__all__ = [
    "ConfigError",
    "BudgetExhaustedError",
    "InternalInvariantError",
    "SolverConfig",
    "AccuracyState",
    "SolverState",
    "IterationRecord",
    "Certificate",
    "SolveResult",
    "solve",
    "step1",
    "step2",
    "step3_step4",
    "step5",
    "KIND_SUCCESS",
    "KIND_UNSUCCESS",
    "KIND_ACCURACY",
]

KIND_SUCCESS = "successful"
KIND_UNSUCCESS = "unsuccessful"
KIND_ACCURACY = "accuracy_improving"


class ConfigError(ValueError):
    """A solver parameter violates its admissible interval."""


class BudgetExhaustedError(RuntimeError):
    """Iteration budget ran out before certification."""

    def __init__(self, message, trace=None, counters=None):
        super().__init__(message)
        self.trace = trace or []
        self.counters = counters


class InternalInvariantError(RuntimeError):
    """A bound the theory guarantees was crossed: implementation bug."""


@dataclass(frozen=True)
class SolverConfig:
    """Run parameters; every interval constraint is enforced at construction."""

    p: int = 2
    q: int = 1
    epsilons: tuple = (1e-3,)
    sigma0: float = 1.0
    sigma_min: float = 1e-8
    eta1: float = 0.1
    eta2: float = 0.9
    gamma1: float = 0.5
    gamma2: float = 2.0
    gamma3: float = 4.0
    gamma_acc: float = 0.25
    omega: float = 0.02
    varsigma: float | None = None
    theta: float = 0.5
    delta0: tuple | None = None
    acc0: tuple | None = None
    acc_max: float = 1.0
    max_iters: int = 1000
    max_inner_iters: int = 500

    def __post_init__(self):
        def fail(msg):
            raise ConfigError(msg)

        if self.q not in (1, 2, 3):
            fail(f"q must be 1, 2 or 3, got {self.q}")
        if not self.q <= self.p <= 3:
            fail(f"p must satisfy q <= p <= 3, got p={self.p}, q={self.q}")
        eps = tuple(float(e) for e in np.atleast_1d(self.epsilons))
        if len(eps) != self.q:
            fail(f"epsilons must have {self.q} entries, got {len(eps)}")
        if any(not 0.0 < e < 1.0 for e in eps):
            fail(f"epsilons must lie in (0, 1), got {eps}")
        if not self.sigma0 > 0:
            fail(f"sigma0 must be > 0, got {self.sigma0}")
        if not 0.0 < self.sigma_min <= self.sigma0:
            fail(f"sigma_min must be in (0, sigma0], got {self.sigma_min}")
        if not 0.0 < self.eta1 <= self.eta2 < 1.0:
            fail(f"need 0 < eta1 <= eta2 < 1, got {self.eta1}, {self.eta2}")
        if not 0.0 < self.gamma1 < 1.0 < self.gamma2 < self.gamma3:
            fail(
                "need 0 < gamma1 < 1 < gamma2 < gamma3, got "
                f"{self.gamma1}, {self.gamma2}, {self.gamma3}"
            )
        if not 0.0 < self.gamma_acc < 1.0:
            fail(f"gamma_acc must be in (0, 1), got {self.gamma_acc}")
        omega_cap = min(0.5 * self.eta1, 0.25 * (1.0 - self.eta2))
        if not 0.0 < self.omega < omega_cap:
            fail(f"omega must be in (0, {omega_cap}), got {self.omega}")
        if not self.theta > 0:
            fail(f"theta must be > 0, got {self.theta}")
        varsigma = self.varsigma
        guaranteed = min(ORDER_GUARANTEES[j] for j in range(1, self.q + 1))
        if varsigma is None:
            varsigma = guaranteed
        if not 0.0 < varsigma <= 1.0:
            fail(f"varsigma must be in (0, 1], got {varsigma}")
        if varsigma > guaranteed:
            logger.warning(
                "varsigma %.3g exceeds the subsolver guarantee %.3g for q=%d; "
                "certificates may overstate optimality",
                varsigma, guaranteed, self.q,
            )
        delta0 = self.delta0
        if delta0 is None:
            delta0 = (1.0,) * self.q
        delta0 = tuple(float(d) for d in np.atleast_1d(delta0))
        if len(delta0) != self.q:
            fail(f"delta0 must have {self.q} entries, got {len(delta0)}")
        if any(not e < d <= 1.0 for d, e in zip(delta0, eps)):
            fail(f"delta0 entries must lie in (epsilon_j, 1], got {delta0}")
        if not self.acc_max >= 0:
            fail(f"acc_max must be >= 0, got {self.acc_max}")
        acc0 = self.acc0
        if acc0 is None:
            acc0 = (min(0.1, self.acc_max),) * self.p
        acc0 = tuple(float(a) for a in np.atleast_1d(acc0))
        if len(acc0) != self.p:
            fail(f"acc0 must have {self.p} entries, got {len(acc0)}")
        if any(a < 0 or a > self.acc_max for a in acc0):
            fail(f"acc0 entries must lie in [0, acc_max], got {acc0}")
        if self.max_iters < 1:
            fail(f"max_iters must be >= 1, got {self.max_iters}")
        object.__setattr__(self, "epsilons", eps)
        object.__setattr__(self, "delta0", delta0)
        object.__setattr__(self, "acc0", acc0)
        object.__setattr__(self, "varsigma", float(varsigma))


@dataclass
class AccuracyState:
    """Current absolute accuracy demands and the improvement counter."""

    values: np.ndarray
    j_sharp: int
    gamma: float

    def tighten(self):
        self.values = self.gamma * self.values
        self.j_sharp += 1


@dataclass
class SolverState:
    x: np.ndarray
    sigma: float
    delta: np.ndarray
    delta_start: np.ndarray
    accuracy: AccuracyState
    k: int = 0
    trace: list = field(default_factory=list)


@dataclass
class IterationRecord:
    k: int
    kind: str | None
    sigma: float
    acc: np.ndarray
    delta_start: np.ndarray
    delta_end: np.ndarray
    x: np.ndarray
    value_evals: int = 0
    derivative_evals: int = 0
    j_k: int | None = None
    rho: float | None = None
    step: np.ndarray | None = None
    step_norm: float | None = None
    dec_bar: float | None = None
    model_dec: float | None = None
    long_step: bool | None = None
    radii: np.ndarray | None = None
    f_bar_before: float | None = None
    f_bar_after: float | None = None
    accepted: bool | None = None


@dataclass
class Certificate:
    """Termination evidence: the point, the radii, and the measured drops.

    The harness fills the two verification fields after recomputing the
    measures with exact derivatives.
    """

    x_eps: np.ndarray
    delta_eps: np.ndarray
    measured: tuple  # per order: dict(order, phi_bar, delta, threshold)
    verified_exact: tuple | None = None  # per-order pass flags
    verified_phi: tuple | None = None  # per-order recomputed measures


@dataclass
class SolveResult:
    certificate: Certificate
    counters: EvalCounters
    trace: list
    state: SolverState

    @property
    def iterations(self) -> int:
        return len(self.trace)


# --- step outcomes ---------------------------------------------------------


@dataclass
class Step1Terminated:
    certificate: Certificate


@dataclass
class Step1ToStep2:
    j_k: int
    measure: MeasureResult


class Step1ToStep5:
    pass


@dataclass
class Step2ToStep3:
    step_result: StepResult
    dec_p: float


class Step2ToStep5:
    pass


def _termination_threshold(config: SolverConfig, j: int, delta_j: float) -> float:
    return (
        config.varsigma
        * config.epsilons[j - 1]
        / (1.0 + config.omega)
        * delta_j**j
        / math.factorial(j)
    )


def step1(state: SolverState, bundle, model, config: SolverConfig, guard_l_bar: float):
    """Order-by-order optimality sweep with radius halving.

    Mutates ``state.delta`` in place; the caller snapshots the entry values.
    Returns termination with a certificate, a hand-off to step 2, or a
    demand for better accuracy.
    """
    measured = []
    for j in range(1, config.q + 1):
        while True:
            delta_j = float(state.delta[j - 1])
            meas = optimality_measure(bundle, j, delta_j)
            verdict = check(
                delta_j,
                meas.phi_bar,
                state.accuracy.values[:j],
                0.5 * config.epsilons[j - 1],
                config.omega,
            )
            if verdict is CheckOutcome.INSUFFICIENT:
                return Step1ToStep5()
            if meas.phi_bar <= _termination_threshold(config, j, delta_j):
                measured.append(
                    {
                        "order": j,
                        "phi_bar": meas.phi_bar,
                        "delta": delta_j,
                        "threshold": config.epsilons[j - 1]
                        * delta_j**j
                        / math.factorial(j),
                    }
                )
                break
            dm = model_decrement(model, meas.displacement)
            if dm >= 0.5 * _termination_threshold(config, j, delta_j):
                return Step1ToStep2(j, meas)
            state.delta[j - 1] = 0.5 * delta_j
            # The halving loop provably stops before delta_j falls a factor
            # 1e-3 under its theoretical floor; crossing it is a bug, not a
            # math failure.
            floor = (
                1e-3
                * config.varsigma
                * config.epsilons[j - 1]
                / (4.0 * (1.0 + config.omega) * max(guard_l_bar, state.sigma))
            )
            if state.delta[j - 1] < floor:
                raise InternalInvariantError(
                    f"step-1 radius for order {j} fell below its guard "
                    f"({state.delta[j - 1]:.3e} < {floor:.3e}) at iteration {state.k}"
                )
    return Step1Terminated(
        Certificate(state.x.copy(), state.delta.copy(), tuple(measured))
    )


def step2(
    state: SolverState,
    bundle,
    model,
    config: SolverConfig,
    j_k: int,
    d_measure: MeasureResult,
):
    """Step computation plus the accuracy vetting of its decrement."""
    caps = np.minimum(1.0, state.delta_start)
    step_res = minimize_model(
        model,
        d_measure.displacement,
        config.q,
        config.theta,
        config.omega,
        config.varsigma,
        np.asarray(config.epsilons),
        delta_caps=caps,
        max_inner=config.max_inner_iters,
    )
    s = step_res.step
    step_norm = float(np.linalg.norm(s))
    dec_p = taylor_decrement(bundle, s, config.p)

    delta_1 = float(state.delta[j_k - 1])
    xi_first = (
        config.varsigma
        * config.epsilons[j_k - 1]
        / (2.0 * (1.0 + config.omega))
        * math.factorial(config.p)
        * delta_1**j_k
        / (math.factorial(j_k) * max(delta_1, step_norm) ** config.p)
    )
    verdict = check(step_norm, dec_p, state.accuracy.values, xi_first, config.omega)
    if verdict is CheckOutcome.ABSOLUTE:
        # Ruled out by the lower bound on the model decrease carried over
        # from step 1; reaching here means that bound was broken.
        raise InternalInvariantError(
            f"step-2 decrement check returned absolute at iteration {state.k}"
        )
    if verdict is CheckOutcome.INSUFFICIENT:
        return Step2ToStep5()

    if step_norm < 1.0:
        acc = state.accuracy.values
        for ell in range(1, config.q + 1):
            acc_model = 3.0 * float(np.max(acc[ell - 1 : config.p]))
            xi_ell = (
                config.varsigma
                * config.theta
                * (1.0 - config.omega)
                * config.epsilons[ell - 1]
                / (2.0 * (1.0 + config.omega) ** 2)
            )
            inner = step_res.inner_displacements[ell - 1]
            verdict = check(
                float(step_res.radii[ell - 1]),
                inner.phi_bar,
                [acc_model] * ell,
                xi_ell,
                config.omega,
            )
            if verdict is CheckOutcome.INSUFFICIENT:
                return Step2ToStep5()
    return Step2ToStep3(step_res, dec_p)


def step3_step4(
    state: SolverState,
    oracle: Oracle,
    config: SolverConfig,
    step_res: StepResult,
    dec_p: float,
    fbar_cache,
):
    """Trial-point acceptance and regularization update.

    ``fbar_cache`` is ``(value, bound)`` for the inexact objective at the
    current iterate, reused when its recorded bound is already tight enough;
    otherwise the value is recomputed (the second evaluation this iteration).
    """
    bound = config.omega * dec_p
    trial = oracle.inexact_value(state.x + step_res.step, bound)
    if fbar_cache is None or fbar_cache[1] > bound:
        fbar_cache = (oracle.inexact_value(state.x, bound), bound)
    f_before = fbar_cache[0]
    rho = (f_before - trial) / dec_p
    accepted = rho >= config.eta1
    if accepted:
        state.x = state.x + step_res.step
        fbar_cache = (trial, bound)
        if not step_res.long_step:
            state.delta = step_res.radii.copy()
        # long step: keep the end-of-step-1 radii already in state.delta
    if rho >= config.eta2:
        state.sigma = max(config.sigma_min, config.gamma1 * state.sigma)
    elif rho < config.eta1:
        state.sigma = config.gamma2 * state.sigma
    return rho, accepted, fbar_cache, f_before, trial


def step5(state: SolverState, config: SolverConfig):
    """Tighten all accuracy demands; rewind the radii; keep x and sigma."""
    state.accuracy.tighten()
    state.delta = state.delta_start.copy()


def _guard_bound(problem: Problem, x0, config: SolverConfig) -> float:
    l_est = estimate_lipschitz(problem, x0, config.p)
    return l_est + config.acc_max


def solve(
    problem: Problem,
    noise: NoiseModel,
    config: SolverConfig,
    x0=None,
) -> SolveResult:
    """Run the full loop until certification or budget exhaustion."""
    oracle = Oracle(problem, noise)
    start = np.asarray(problem.x0 if x0 is None else x0, dtype=float).copy()
    if start.shape != (problem.dim,):
        raise ConfigError(f"x0 has shape {start.shape}, expected ({problem.dim},)")
    state = SolverState(
        x=start,
        sigma=config.sigma0,
        delta=np.asarray(config.delta0, dtype=float).copy(),
        delta_start=np.asarray(config.delta0, dtype=float).copy(),
        accuracy=AccuracyState(
            np.asarray(config.acc0, dtype=float).copy(), 0, config.gamma_acc
        ),
    )
    guard_l_bar = _guard_bound(problem, start, config)
    fbar_cache = None

    for k in range(config.max_iters):
        state.k = k
        state.delta_start = state.delta.copy()
        snap = oracle.counters.snapshot()
        sigma_k = state.sigma
        acc_k = state.accuracy.values.copy()
        x_k = state.x.copy()

        bundle = oracle.inexact_bundle(state.x, state.accuracy.values, config.p)
        model = RegularizedModel(bundle, state.sigma)
        record = IterationRecord(
            k=k,
            kind=None,
            sigma=sigma_k,
            acc=acc_k,
            delta_start=state.delta_start.copy(),
            delta_end=state.delta_start.copy(),
            x=x_k,
        )

        out = step1(state, bundle, model, config, guard_l_bar)
        record.delta_end = state.delta.copy()

        if isinstance(out, Step1Terminated):
            record.f_bar_after = fbar_cache[0] if fbar_cache else None
            _close_record(record, oracle, snap, k)
            state.trace.append(record)
            logger.info("terminated at iteration %d", k)
            return SolveResult(out.certificate, oracle.counters, state.trace, state)

        to_step5 = isinstance(out, Step1ToStep5)
        if not to_step5:
            record.j_k = out.j_k
            out2 = step2(state, bundle, model, config, out.j_k, out.measure)
            if isinstance(out2, Step2ToStep3):
                rho, accepted, fbar_cache, f_before, trial = step3_step4(
                    state, oracle, config, out2.step_result, out2.dec_p, fbar_cache
                )
                sres = out2.step_result
                record.kind = KIND_SUCCESS if accepted else KIND_UNSUCCESS
                record.rho = rho
                record.step = sres.step.copy()
                record.step_norm = float(np.linalg.norm(sres.step))
                record.dec_bar = out2.dec_p
                record.model_dec = model_decrement(model, sres.step)
                record.long_step = sres.long_step
                record.radii = None if sres.radii is None else sres.radii.copy()
                record.f_bar_before = f_before
                record.f_bar_after = fbar_cache[0]
                record.accepted = accepted
                _close_record(record, oracle, snap, k)
                state.trace.append(record)
                logger.debug(
                    "k=%d %s rho=%.3g sigma=%.3g |s|=%.3g",
                    k, record.kind, rho, sigma_k, record.step_norm,
                )
                continue
            to_step5 = True

        step5(state, config)
        record.kind = KIND_ACCURACY
        _close_record(record, oracle, snap, k)
        state.trace.append(record)
        logger.debug(
            "k=%d accuracy improved to %.3g", k, float(np.max(state.accuracy.values))
        )

    raise BudgetExhaustedError(
        f"no certificate within {config.max_iters} iterations",
        trace=state.trace,
        counters=oracle.counters,
    )


def _close_record(record: IterationRecord, oracle: Oracle, snap, k: int):
    dv = oracle.counters.value_evals - snap[0]
    dd = oracle.counters.derivative_evals - snap[1]
    record.value_evals = dv
    record.derivative_evals = dd
    oracle.counters.per_iteration.append((k, dv, dd))
