"""Seeded convex test problems with known optima.

All generators draw from ``numpy.random.Generator(PCG64(seed))`` so an
instance is bit-identical for identical ``(family, parameters, seed)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .oracle import Objective, Vector

FAMILIES = ("quadratic", "least_squares", "l1_regression", "max_affine")


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


class DiagonalQuadratic(Objective):
    """``f(x) = 0.5 <Ax, x> - <b, x>`` with ``A = diag(d)``."""

    smooth = True

    def __init__(self, d: Vector, x_hat: Vector):
        d = np.array(d, dtype=float)
        if np.any(d <= 0):
            raise ValueError("diagonal must be positive")
        self.d = d
        self.b = d * np.asarray(x_hat, dtype=float)
        self.dim = d.size
        self.mu = float(d.min())
        self.lipschitz_grad = float(d.max())
        x_hat = np.array(x_hat, dtype=float)
        self.known_optimum = (x_hat, self.value(x_hat))

    def value(self, x):
        return float(0.5 * (x * self.d) @ x - self.b @ x)

    def subgrad(self, x):
        return self.d * x - self.b

    def strong_convexity(self, precond_diag=None):
        if precond_diag is None:
            return self.mu
        return float(np.min(self.d / precond_diag))

    def grad_lipschitz(self, precond_diag=None):
        if precond_diag is None:
            return self.lipschitz_grad
        return float(np.max(self.d / precond_diag))


class LeastSquares(Objective):
    """``f(x) = 0.5 ||Ax - b||^2`` for a consistent system ``b = A x_hat``."""

    smooth = True

    def __init__(self, A, x_hat):
        self.A = np.array(A, dtype=float)
        x_hat = np.array(x_hat, dtype=float)
        self.b = self.A @ x_hat
        self.dim = self.A.shape[1]
        self.mu = 0.0
        self.lipschitz_grad = float(np.linalg.norm(self.A, 2) ** 2)
        self.known_optimum = (x_hat, 0.0)

    def value(self, x):
        r = self.A @ x - self.b
        return float(0.5 * r @ r)

    def subgrad(self, x):
        return self.A.T @ (self.A @ x - self.b)

    def grad_lipschitz(self, precond_diag=None):
        if precond_diag is None:
            return self.lipschitz_grad
        return float(np.linalg.norm(self.A / np.sqrt(precond_diag), 2) ** 2)


class L1Regression(Objective):
    """``f(x) = ||Ax - b||_1`` with ``b = A x_hat``.

    The subgradient is ``A^T sign(Ax - b)`` with ``sign(0) = 0``.
    """

    def __init__(self, A, x_hat):
        self.A = np.array(A, dtype=float)
        x_hat = np.array(x_hat, dtype=float)
        self.b = self.A @ x_hat
        self.dim = self.A.shape[1]
        self.mu = 0.0
        self.known_optimum = (x_hat, 0.0)
        m = self.A.shape[0]
        # ||A^T s||_2 <= ||A||_2 ||s||_2 <= ||A||_2 sqrt(m)
        self.c0_hint = float(np.linalg.norm(self.A, 2) * np.sqrt(m))

    def value(self, x):
        return float(np.abs(self.A @ x - self.b).sum())

    def subgrad(self, x):
        return self.A.T @ np.sign(self.A @ x - self.b)


class MaxAffine(Objective):
    """``f(x) = max_i <a_i, x> + b_i``; the subgradient is the slope of the
    lowest-index maximizing piece."""

    def __init__(self, slopes, offsets=None, known_optimum=None):
        self.a = np.array(slopes, dtype=float)
        k, n = self.a.shape
        self.offsets = np.zeros(k) if offsets is None else np.array(offsets, dtype=float)
        self.dim = n
        self.mu = 0.0
        self.known_optimum = known_optimum
        self.c0_hint = float(np.linalg.norm(self.a, axis=1).max())

    def value(self, x):
        return float(np.max(self.a @ x + self.offsets))

    def subgrad(self, x):
        return self.a[int(np.argmax(self.a @ x + self.offsets))].copy()


def make_quadratic(n: int, cond: float, seed: int) -> DiagonalQuadratic:
    if n < 1 or cond < 1:
        raise ValueError("need n >= 1 and cond >= 1")
    rng = _rng(seed)
    d = np.exp(rng.uniform(0.0, np.log(cond), size=n))
    x_hat = rng.standard_normal(n)
    return DiagonalQuadratic(d, x_hat)


def make_least_squares(m: int, n: int, rank: int, seed: int) -> LeastSquares:
    if m < 1 or n < 1 or not 1 <= rank <= min(m, n):
        raise ValueError("need m, n >= 1 and 1 <= rank <= min(m, n)")
    rng = _rng(seed)
    F = rng.standard_normal((m, rank))
    G = rng.standard_normal((rank, n))
    A = F @ G / np.sqrt(m * n)
    x_hat = rng.standard_normal(n)
    return LeastSquares(A, x_hat)


def make_l1_regression(m: int, n: int, seed: int) -> L1Regression:
    if not m >= n >= 1:
        raise ValueError("need m >= n >= 1")
    rng = _rng(seed)
    A = rng.standard_normal((m, n)) / np.sqrt(m)
    x_hat = rng.standard_normal(n)
    return L1Regression(A, x_hat)


def make_max_affine(n: int, k: int, seed: int) -> MaxAffine:
    """Slopes sum to zero and all offsets vanish, so ``f >= 0 = f(0)``."""
    if n < 1 or k < 2:
        raise ValueError("need n >= 1 and k >= 2")
    rng = _rng(seed)
    a = rng.standard_normal((k, n))
    a[-1] = -a[:-1].sum(axis=0)
    return MaxAffine(a, known_optimum=(np.zeros(n), 0.0))


@dataclass(frozen=True)
class ProblemSpec:
    family: str = "quadratic"
    n: int = 10
    m: int | None = None
    k: int | None = None
    rank: int | None = None
    cond: float = 100.0
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown problem family {self.family!r}; expected one of {FAMILIES}")
        if self.n < 1:
            raise ValueError("problem.n must be positive")
        if self.cond < 1:
            raise ValueError("problem.cond must be >= 1")
        if self.seed < 0:
            raise ValueError("problem.seed must be nonnegative")

    def build(self) -> Objective:
        if self.family == "quadratic":
            return make_quadratic(self.n, self.cond, self.seed)
        if self.family == "least_squares":
            m = self.m if self.m is not None else 2 * self.n
            rank = self.rank if self.rank is not None else min(m, self.n)
            return make_least_squares(m, self.n, rank, self.seed)
        if self.family == "l1_regression":
            m = self.m if self.m is not None else 2 * self.n
            return make_l1_regression(m, self.n, self.seed)
        k = self.k if self.k is not None else self.n + 1
        return make_max_affine(self.n, k, self.seed)
