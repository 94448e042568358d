"""Runtime monitors and complexity certificates for OSGA runs.

The monitors evaluate, record by record, the inequalities the analysis of
the algorithm guarantees; the certificate calculators evaluate the explicit
iteration bounds for the nonsmooth and the smooth regime.  Nothing here
changes solver behavior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .history import IterationRecord, RunHistory
from .oracle import Objective
from .prox import QuadraticProx
from .solver import Relaxation, RunResult, SolverState, TuningParams

MINORANT_RTOL = 1e-9
BOUND_TOL = 1e-9
IDENTITY_RTOL = 1e-12


def check_eta_inequality(record: IterationRecord, mu: float, q0: float) -> float:
    """Slack of ``eta_bar - (1-a) eta <= a^2 |g|_*^2 / (2 (1-a) (eta+mu) Q0)``.

    Nonnegative slack means the inequality holds.
    """
    a = record.alpha
    if a is None:
        raise ValueError("init record carries no step")
    if a >= 1:
        raise ValueError(f"inequality undefined for alpha >= 1 (alpha={a})")
    eta = record.eta_prev
    bound = a * a * record.g_norm_dual ** 2 / (2 * (1 - a) * (eta + mu) * q0)
    return bound - (record.eta_bar - (1 - a) * eta)


def check_smooth_implication(record: IterationRecord, mu: float, L: float) -> bool:
    """``eta_bar > (1-a) eta`` must imply ``(1-a)(eta+mu) < a^2 L``."""
    a, eta = record.alpha, record.eta_prev
    if record.eta_bar <= (1 - a) * eta:
        return True
    return (1 - a) * (eta + mu) < a * a * L


def _minorant_gaps(relaxation: Relaxation, mu: float, oracle: Objective,
                   prox: QuadraticProx, n_samples: int, radius: float | None,
                   seed: int, center) -> tuple[np.ndarray, np.ndarray]:
    center = np.asarray(center, dtype=float)
    if radius is None:
        radius = 10.0 * (1.0 + float(np.linalg.norm(center)))
    rng = np.random.default_rng(seed)
    n = center.size
    # uniform in the ball: direction on the sphere, radius ~ r U^(1/n)
    d = rng.standard_normal((n_samples, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = radius * rng.uniform(size=(n_samples, 1)) ** (1.0 / n)
    pts = np.vstack([center, center + r * d])
    gaps, fs = [], []
    for z in pts:
        fz = oracle.value(z)
        low = relaxation.gamma + float(relaxation.h @ z) + mu * prox.value(z)
        gaps.append(low - fz)
        fs.append(fz)
    return np.array(gaps), np.array(fs)


def check_minorant(relaxation: Relaxation, mu: float, oracle: Objective,
                   prox: QuadraticProx, n_samples: int = 1000,
                   radius: float | None = None, rng_seed: int = 0,
                   center=None) -> float:
    """Largest sampled value of ``gamma + <h,z> + mu Q(z) - f(z)``.

    Samples ``center`` itself plus ``n_samples`` points uniform in the ball of
    the given radius around it (default ``10 (1 + |center|)``); ``center``
    defaults to the prox center.  Values above ``1e-9 (1 + |f(z)|)`` indicate
    an invalid minorant.
    """
    center = prox.z0 if center is None else center
    gaps, _ = _minorant_gaps(relaxation, mu, oracle, prox, n_samples, radius,
                             rng_seed, center)
    return float(gaps.max())


def minorant_holds(relaxation: Relaxation, mu: float, oracle: Objective,
                   prox: QuadraticProx, n_samples: int = 1000,
                   radius: float | None = None, rng_seed: int = 0,
                   center=None) -> bool:
    center = prox.z0 if center is None else center
    gaps, fs = _minorant_gaps(relaxation, mu, oracle, prox, n_samples, radius,
                              rng_seed, center)
    return bool(np.all(gaps <= MINORANT_RTOL * (1 + np.abs(fs))))


@dataclass(frozen=True)
class ComplexityCertificate:
    regime: str
    constants: dict
    K_bound: float


def nonsmooth_certificate(c0: float, eta0: float, alpha0: float,
                          tuning: TuningParams, mu: float, eps: float, q0: float,
                          alpha: float | None = None,
                          eta: float | None = None) -> ComplexityCertificate:
    """Iteration bound when subgradient dual norms stay below ``c0``.

    ``(alpha, eta)`` default to the initial values, giving the bound on the
    total number of iterations.
    """
    if not (c0 > 0 and eps > 0 and q0 > 0):
        raise ValueError("need c0 > 0, eps > 0 and Q0 > 0")
    alpha = alpha0 if alpha is None else alpha
    eta = eta0 if eta is None else eta
    k = tuning.kappa
    c1 = c0 * c0 / (2 * q0)
    c2 = max(c1 / ((1 - math.exp(-k)) * (1 - tuning.alpha_max)),
             eta0 * (eta0 + mu) / alpha0)
    c3 = c2 / (2 * tuning.lam)
    consts = {"c0": c0, "c1": c1, "c2": c2, "c3": c3}
    if eta <= eps:
        return ComplexityCertificate("nonsmooth", consts, 0.0)
    ee = eps * (eps + mu)
    K = 1 + math.log(c2 * alpha / ee) / k + c3 / ee - c3 / (eta * (eta + mu))
    return ComplexityCertificate("nonsmooth", consts, K)


def smooth_certificate(L: float, eta0: float, alpha0: float, tuning: TuningParams,
                       mu: float, eps: float, alpha: float | None = None,
                       eta: float | None = None,
                       strongly_convex: bool | None = None) -> ComplexityCertificate:
    """Iteration bound for gradients with Lipschitz constant ``L``.

    Uses the linear-rate bound when ``mu > 0`` and the ``eps^(-1/2)`` bound
    otherwise; ``strongly_convex=True`` with ``mu = 0`` is rejected.
    """
    if not (L > 0 and eps > 0):
        raise ValueError("need L > 0 and eps > 0")
    if strongly_convex is None:
        strongly_convex = mu > 0
    if strongly_convex and mu <= 0:
        raise ValueError("the strongly convex bound requires mu > 0")
    alpha = alpha0 if alpha is None else alpha
    eta = eta0 if eta is None else eta
    k = tuning.kappa
    c4 = max((eta0 + mu) / alpha0 ** 2,
             math.exp(2 * k) * L / (1 - tuning.alpha_max))
    c5 = 4 * c4 / tuning.lam ** 2
    consts = {"L": L, "c4": c4, "c5": c5}
    if strongly_convex:
        c6 = math.sqrt(c4 / mu)
        c7 = c6 / tuning.lam
        consts.update(c6=c6, c7=c7)
        regime = "smooth_strongly_convex"
    else:
        regime = "smooth"
    if eta <= eps:
        return ComplexityCertificate(regime, consts, 0.0)
    if strongly_convex:
        K = 1 + math.log(c6 * alpha) / k + c7 * math.log(eta / eps)
    else:
        K = (1 + math.log(alpha * math.sqrt(c4 / eps)) / k
             + math.sqrt(c5 / eps) - math.sqrt(c5 / eta))
    return ComplexityCertificate(regime, consts, K)


def fit_power_law(x, y) -> tuple[float, float]:
    """Least-squares slope of ``log y`` against ``log x`` and its r^2."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    return _linfit(lx, ly)


def _linfit(x, y) -> tuple[float, float]:
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


def fit_rate(history: RunHistory, known_f_hat: float,
             model: str = "sublinear_poly") -> tuple[float, float]:
    """Empirical convergence rate of ``f_b - f_hat``.

    ``sublinear_poly`` returns the slope of ``log gap`` against ``log k`` over
    the tail half of the usable iterations.  ``linear`` returns the mean
    per-iteration log contraction ratio, with r^2 of the straight-line fit of
    ``log gap`` against ``k``.
    """
    k = history.column("iteration")
    gap = history.column("f_best") - known_f_hat
    use = (k >= 1) & (gap > 0)
    k, gap = k[use], gap[use]
    if k.size < 20:
        raise ValueError(f"need at least 20 usable iterations, got {k.size}")
    if model == "sublinear_poly":
        half = k.size // 2
        return _linfit(np.log(k[half:]), np.log(gap[half:]))
    if model == "linear":
        lg = np.log(gap)
        _, r2 = _linfit(k, lg)
        ratio = float(np.mean(np.diff(lg) / np.diff(k)))
        return ratio, r2
    raise ValueError(f"unknown rate model {model!r}")


@dataclass
class MonitorResult:
    name: str
    passed: bool
    checked: int
    failures: int = 0
    worst: float | None = None
    detail: str = ""


@dataclass
class MonitorReport:
    results: list[MonitorResult] = field(default_factory=list)
    certificates: list[ComplexityCertificate] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def get(self, name: str) -> MonitorResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def lines(self) -> list[str]:
        out = []
        for r in self.results:
            tag = "PASS" if r.passed else "FAIL"
            worst = "" if r.worst is None else f" worst={r.worst:.3e}"
            out.append(f"[{tag}] {r.name}: {r.checked - r.failures}/{r.checked}{worst}"
                       + (f" ({r.detail})" if r.detail else ""))
        return out


class MinorantSampler:
    """Solver observer that samples minorant validity every few iterations."""

    def __init__(self, oracle: Objective, prox: QuadraticProx, mu: float,
                 every: int = 10, n_samples: int = 200, seed: int = 0):
        self.oracle, self.prox, self.mu = oracle, prox, mu
        self.every, self.n_samples, self.seed = every, n_samples, seed
        self.checked = 0
        self.failures = 0
        self.worst = -math.inf

    def __call__(self, state: SolverState, report) -> None:
        if state.iteration % self.every and not state.terminal:
            return
        gaps, fs = _minorant_gaps(state.relaxation, self.mu, self.oracle, self.prox,
                                  self.n_samples, None, self.seed + state.iteration,
                                  state.x_b)
        self.checked += 1
        scaled = gaps / (1 + np.abs(fs))
        self.worst = max(self.worst, float(scaled.max()))
        if np.any(gaps > MINORANT_RTOL * (1 + np.abs(fs))):
            self.failures += 1

    def result(self) -> MonitorResult:
        return MonitorResult("minorant_validity", self.failures == 0, self.checked,
                             self.failures, self.worst if self.checked else None)


def _count(name, flags, values=None, detail=""):
    flags = list(flags)
    fails = sum(1 for ok in flags if not ok)
    worst = None if values is None or not len(values) else float(np.min(values))
    return MonitorResult(name, fails == 0, len(flags), fails, worst, detail)


def iterations_to_eta(history: RunHistory, eps: float) -> int | None:
    for r in history:
        if r.eta <= eps:
            return r.iteration
    return None


def run_monitors(result: RunResult, oracle: Objective, prox: QuadraticProx,
                 tuning: TuningParams, eps: float, skip_x_prime: bool = False,
                 c0: float | None = None, L: float | None = None) -> MonitorReport:
    """Check every applicable inequality on a finished run.

    ``c0`` defaults to the largest dual subgradient norm seen in the run
    (an a posteriori certificate).  ``L`` defaults to the objective's
    gradient Lipschitz constant in the prox norm, if it declares one.
    """
    rep = MonitorReport()
    H = result.history
    mu = result.mu
    recs = H.records
    steps = H.steps
    if L is None:
        diag = None if prox.B.is_identity else prox.B.diag
        L = oracle.grad_lipschitz(diag)

    if oracle.known_optimum is not None:
        x_hat, f_hat = oracle.known_optimum
        qx = prox.value(x_hat)
        tol = BOUND_TOL * (1 + abs(f_hat))
        lo = [r.f_best - f_hat + tol for r in recs]
        hi = [r.eta * qx + tol - (r.f_best - f_hat) for r in recs]
        rep.results.append(_count("error_bound", [a >= 0 and b >= 0 for a, b in zip(lo, hi)],
                                  np.minimum(lo, hi)))

    fb = [r.f_best for r in recs]
    rep.results.append(_count("f_best_monotone", [b <= a for a, b in zip(fb, fb[1:])]))
    et = [r.eta for r in recs]
    rep.results.append(_count("eta_monotone", [b <= a for a, b in zip(et, et[1:])]))
    rep.results.append(_count(
        "alpha_range", [0 < r.alpha_next <= tuning.alpha_max for r in recs]))

    acc = [r for r in steps if r.accepted]
    rel = [abs(r.eta - (1 - tuning.lam * r.R * r.alpha) * r.eta_prev)
           / max(abs(r.eta), abs(r.eta_prev)) for r in acc]
    rep.results.append(_count("accepted_identity", [v <= IDENTITY_RTOL for v in rel],
                              [-v for v in rel]))
    red = [r for r in steps if r.R < 1]
    shrink = math.exp(-tuning.kappa)
    rep.results.append(_count("alpha_reduction_factor",
                              [r.alpha_next == r.alpha * shrink for r in red]))

    slack = [check_eta_inequality(r, mu, prox.q0) for r in steps]
    rep.results.append(_count(
        "eta_inequality",
        [s >= -BOUND_TOL * max(1.0, r.eta_prev) for s, r in zip(slack, steps)], slack))

    g_norms = [r.g_norm_dual for r in steps]
    if c0 is None:
        c0 = max(g_norms) if g_norms else 0.0
    if c0 > 0:
        cert = nonsmooth_certificate(c0, result.eta0, result.alpha0, tuning, mu, eps, prox.q0)
        rep.certificates.append(cert)
        c2 = cert.constants["c2"]
        vals = [r.alpha_next * c2 * (1 + BOUND_TOL) - r.eta * (r.eta + mu) for r in recs]
        rep.results.append(_count("nonsmooth_eta_bound", [v >= 0 for v in vals], vals))

    if L is not None and not skip_x_prime:
        rep.results.append(_count(
            "smooth_implication", [check_smooth_implication(r, mu, L) for r in steps]))
        cert = smooth_certificate(L, result.eta0, result.alpha0, tuning, mu, eps)
        rep.certificates.append(cert)
        c4 = cert.constants["c4"]
        vals = [r.alpha_next ** 2 * c4 * (1 + BOUND_TOL) - (r.eta + mu) for r in recs]
        rep.results.append(_count("smooth_eta_bound", [v >= 0 for v in vals], vals))

    k_eps = iterations_to_eta(H, eps)
    if k_eps is not None and rep.certificates:
        ok = [k_eps <= c.K_bound for c in rep.certificates]
        detail = ", ".join(f"{c.regime} K={c.K_bound:.4g}" for c in rep.certificates)
        rep.results.append(MonitorResult(
            "certificate_iterations", all(ok), len(ok), ok.count(False),
            None, f"iterations={k_eps}; {detail}"))
    return rep
