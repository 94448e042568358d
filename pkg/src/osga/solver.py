"""Optimal subgradient algorithm (OSGA).

The solver maintains a global minorant ``f(z) >= gamma + <h, z> + mu Q(z)``
built as a convex combination of (strongly convex) tangents, together with
the best point ``x_b``.  The error factor ``eta = E(gamma - f(x_b), h) - mu``
bounds the optimality gap by ``0 <= f(x_b) - f_hat <= eta * Q(x_hat)``.
Each iteration mixes one new tangent into the minorant with weight
``alpha`` and adapts ``alpha`` from the observed reduction of ``eta``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .history import IterationRecord, RunHistory
from .oracle import EvalCounter, Objective, Vector, eval_pair, eval_value
from .prox import QuadraticProx

# Reasons that count as success for the CLI exit status.
SUCCESS_REASONS = frozenset({"optimal", "converged", "f_target"})


@dataclass(frozen=True)
class TuningParams:
    lam: float = 0.5
    alpha_max: float = 0.7
    kappa: float = 0.5
    kappa_prime: float = 0.5

    def __post_init__(self):
        if not 0 < self.alpha_max < 1:
            raise ValueError(f"alpha_max must lie in ]0,1[, got {self.alpha_max}")
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if not 0 < self.kappa_prime <= self.kappa:
            raise ValueError(
                f"kappa_prime must satisfy 0 < kappa_prime <= kappa = {self.kappa}, "
                f"got {self.kappa_prime}")
        bound = math.exp(-self.kappa)
        if not 0 < self.lam <= bound:
            raise ValueError(
                f"lambda must satisfy 0 < lambda <= exp(-kappa) = {bound:.4f}, got {self.lam}")


@dataclass(frozen=True)
class StoppingRule:
    eps: float = 1e-6
    f_target: float = -math.inf
    max_iterations: int = 100_000
    max_oracle_calls: int | None = None

    def __post_init__(self):
        if not (self.eps > 0 and math.isfinite(self.eps)):
            raise ValueError(f"eps must be positive and finite, got {self.eps}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.max_oracle_calls is not None and self.max_oracle_calls < 1:
            raise ValueError("max_oracle_calls must be positive")


@dataclass(frozen=True)
class Relaxation:
    """Minorant ``f(z) >= gamma + <h, z> + mu Q(z)``."""

    gamma: float
    h: Vector


@dataclass
class SolverState:
    x_b: Vector
    f_b: float
    relaxation: Relaxation
    eta: float
    u: Vector
    alpha: float
    counter: EvalCounter
    iteration: int = 0
    status: str | None = None

    @property
    def terminal(self) -> bool:
        return self.status is not None


@dataclass(frozen=True)
class StepReport:
    x: Vector
    f_x: float
    g_norm_dual: float
    x_b_prime: Vector
    x_prime: Vector
    x_b_bar: Vector
    f_b_bar: float
    gamma_bar: float
    h_bar: Vector
    u_prime: Vector | None
    u_bar: Vector
    eta_bar: float


@dataclass
class RunResult:
    x_b: Vector
    f_b: float
    eta: float
    status: str
    iterations: int
    counter: EvalCounter
    history: RunHistory
    eta0: float
    alpha0: float
    q0: float
    mu: float

    @property
    def success(self) -> bool:
        return self.status in SUCCESS_REASONS


def accumulate_relaxation(relaxation: Relaxation, x: Vector, f_x: float,
                          g_sc: Vector, alpha: float, mu: float,
                          prox: QuadraticProx) -> Relaxation:
    """Mix the tangent at ``x`` into the minorant with weight ``alpha``.

    ``g_sc`` is ``g(x) - mu * grad Q(x)``.  If the input minorant is valid
    and ``f - mu Q`` is convex, so is the output.
    """
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must lie in [0,1], got {alpha}")
    gamma, h = relaxation.gamma, relaxation.h
    h_bar = h + alpha * (g_sc - h)
    gamma_bar = gamma + alpha * (f_x - mu * prox.value(x) - float(g_sc @ x) - gamma)
    return Relaxation(gamma_bar, h_bar)


def _sc_grad(g: Vector, x: Vector, mu: float, prox: QuadraticProx) -> Vector:
    return g - mu * prox.grad(x) if mu else g


def _check_stop(state: SolverState, stop: StoppingRule) -> str | None:
    if state.eta <= 0:
        return "optimal"
    if state.eta <= stop.eps:
        return "converged"
    if state.f_b <= stop.f_target:
        return "f_target"
    if state.iteration >= stop.max_iterations:
        return "max_iterations"
    if stop.max_oracle_calls is not None and state.counter.total >= stop.max_oracle_calls:
        return "max_oracle_calls"
    if state.alpha <= 0:
        return "stalled"
    return None


def init_state(oracle: Objective, prox: QuadraticProx, tuning: TuningParams,
               stop: StoppingRule, x_start: Vector, mu: float | None = None,
               counter: EvalCounter | None = None) -> SolverState:
    """Build the initial minorant from the tangent at ``x_start``."""
    mu = oracle.mu if mu is None else float(mu)
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    counter = EvalCounter() if counter is None else counter
    x_b = np.array(x_start, dtype=float)
    f_b, g = eval_pair(oracle, x_b, counter)
    h = _sc_grad(g, x_b, mu, prox)
    gamma = f_b - mu * prox.value(x_b) - float(h @ x_b)
    sol = prox.solve(gamma - f_b, h)
    state = SolverState(x_b=x_b, f_b=f_b, relaxation=Relaxation(gamma, h),
                        eta=sol.E - mu, u=sol.u, alpha=tuning.alpha_max,
                        counter=counter)
    if f_b <= stop.f_target:
        state.status = "f_target"
    elif state.eta <= 0:
        state.status = "optimal"
    elif state.eta <= stop.eps:
        state.status = "converged"
    return state


def iterate(state: SolverState, oracle: Objective, prox: QuadraticProx,
            mu: float, skip_x_prime: bool = False) -> StepReport:
    """One OSGA step; moves ``x_b`` to the new best point and returns the report.

    The minorant, ``eta``, ``u`` and ``alpha`` are left for :func:`update_scheme`.
    """
    alpha = state.alpha
    x_b, f_b = state.x_b, state.f_b
    x = x_b + alpha * (state.u - x_b)
    f_x, g = eval_pair(oracle, x, state.counter)
    g_sc = _sc_grad(g, x, mu, prox)
    relax_bar = accumulate_relaxation(state.relaxation, x, f_x, g_sc, alpha, mu, prox)
    gamma_bar, h_bar = relax_bar.gamma, relax_bar.h

    # ties keep the incumbent
    if f_x < f_b:
        x_b_prime, f_b_prime = x, f_x
    else:
        x_b_prime, f_b_prime = x_b, f_b

    if skip_x_prime:
        u_prime = None
        x_prime = x
        x_b_bar, f_b_bar = x_b_prime, f_b_prime
    else:
        u_prime = prox.solve(gamma_bar - f_b_prime, h_bar).u
        x_prime = x_b + alpha * (u_prime - x_b)
        f_x_prime = eval_value(oracle, x_prime, state.counter)
        if f_x_prime < f_b_prime:
            x_b_bar, f_b_bar = x_prime, f_x_prime
        else:
            x_b_bar, f_b_bar = x_b_prime, f_b_prime

    sol = prox.solve(gamma_bar - f_b_bar, h_bar)
    state.x_b, state.f_b = x_b_bar, f_b_bar
    return StepReport(
        x=x, f_x=f_x, g_norm_dual=prox.dual_norm(g),
        x_b_prime=x_b_prime, x_prime=x_prime, x_b_bar=x_b_bar, f_b_bar=f_b_bar,
        gamma_bar=gamma_bar, h_bar=h_bar, u_prime=u_prime, u_bar=sol.u,
        eta_bar=sol.E - mu,
    )


def update_scheme(state: SolverState, report: StepReport,
                  tuning: TuningParams) -> float:
    """Adapt ``alpha`` and accept the tentative minorant if ``eta`` improved.

    Returns the progress ratio ``R``.
    """
    eta, alpha = state.eta, state.alpha
    if eta <= 0:
        raise ValueError("update scheme called on an optimal state")
    denom = tuning.lam * alpha * eta
    if denom > 0:
        R = (eta - report.eta_bar) / denom
    else:
        # the product underflowed (alpha subnormal); divide stepwise instead
        R = (eta - report.eta_bar) / eta / tuning.lam / alpha
    if R < 1:
        state.alpha = alpha * math.exp(-tuning.kappa)
    else:
        # min(alpha e^{kappa'(R-1)}, alpha_max), compared in log space: R can be huge
        growth = tuning.kappa_prime * (R - 1)
        if growth >= math.log(tuning.alpha_max / alpha):
            state.alpha = tuning.alpha_max
        else:
            state.alpha = alpha * math.exp(growth)
    if report.eta_bar < eta:
        state.relaxation = Relaxation(report.gamma_bar, report.h_bar)
        state.eta = report.eta_bar
        state.u = report.u_bar
    state.iteration += 1
    return R


def solve_iter(oracle: Objective, prox: QuadraticProx, x_start: Vector,
               tuning: TuningParams | None = None, stop: StoppingRule | None = None,
               mu: float | None = None, skip_x_prime: bool = False,
               ) -> Iterator[tuple[SolverState, StepReport | None, float | None]]:
    """Yield ``(state, report, R)`` after init and after every iteration.

    The init yield has ``report = R = None``.  The state object is shared
    and mutated in place; copy what you need before advancing.
    """
    tuning = TuningParams() if tuning is None else tuning
    stop = StoppingRule() if stop is None else stop
    mu = oracle.mu if mu is None else float(mu)
    state = init_state(oracle, prox, tuning, stop, x_start, mu=mu)
    yield state, None, None
    while not state.terminal:
        report = iterate(state, oracle, prox, mu, skip_x_prime=skip_x_prime)
        R = update_scheme(state, report, tuning)
        state.status = _check_stop(state, stop)
        yield state, report, R


def solve(oracle: Objective, prox: QuadraticProx, x_start: Vector,
          tuning: TuningParams | None = None, stop: StoppingRule | None = None,
          mu: float | None = None, skip_x_prime: bool = False,
          observer: Callable[[SolverState, StepReport | None], None] | None = None,
          ) -> RunResult:
    """Minimize ``oracle`` from ``x_start`` and return the result with its history.

    ``observer``, if given, is called with the live state after init and
    after every iteration.  It must not mutate the state.
    """
    mu = oracle.mu if mu is None else float(mu)
    history = RunHistory()
    t0 = time.perf_counter()
    eta0 = alpha0 = math.nan
    state = None
    for state, report, R in solve_iter(oracle, prox, x_start, tuning, stop,
                                       mu=mu, skip_x_prime=skip_x_prime):
        if observer is not None:
            observer(state, report)
        c = state.counter
        if report is None:
            eta0, alpha0 = state.eta, state.alpha
            history.append(IterationRecord(
                iteration=0, f_best=state.f_b, eta=state.eta,
                alpha_next=state.alpha, n_f=c.n_f, n_g=c.n_g,
                wall_time=time.perf_counter() - t0))
            prev_eta, prev_alpha = state.eta, state.alpha
            continue
        history.append(IterationRecord(
            iteration=state.iteration, f_best=state.f_b, eta=state.eta,
            alpha_next=state.alpha, n_f=c.n_f, n_g=c.n_g,
            wall_time=time.perf_counter() - t0, eta_prev=prev_eta,
            eta_bar=report.eta_bar, alpha=prev_alpha, R=R,
            g_norm_dual=report.g_norm_dual, accepted=report.eta_bar < prev_eta))
        prev_eta, prev_alpha = state.eta, state.alpha
    return RunResult(
        x_b=state.x_b, f_b=state.f_b, eta=state.eta, status=state.status,
        iterations=state.iteration, counter=state.counter, history=history,
        eta0=eta0, alpha0=alpha0, q0=prox.q0, mu=mu)
