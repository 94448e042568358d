"""First-order oracle contract and evaluation counting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import NDArray

Vector = NDArray[np.float64]


class OracleError(ArithmeticError):
    """Raised when a user oracle returns a non-finite value."""


@dataclass
class EvalCounter:
    n_f: int = 0
    n_g: int = 0

    @property
    def total(self) -> int:
        return self.n_f + self.n_g


class Objective:
    """Black-box convex objective with a computable subgradient.

    Subclasses implement :meth:`value` and :meth:`subgrad`.  Instances are
    treated as immutable once constructed, so one objective can be shared by
    concurrent solves; every run owns its own :class:`EvalCounter`.

    Attributes
    ----------
    dim : int
        Dimension of the variable.
    mu : float
        Strong convexity parameter relative to the identity-preconditioned
        quadratic prox function, i.e. ``f - mu * Q`` is convex.
    lipschitz_grad : float or None
        Lipschitz constant of the gradient for smooth problems.
    known_optimum : tuple (x_hat, f_hat) or None
    c0_hint : float or None
        Upper bound on the Euclidean norm of any returned subgradient.
    """

    dim: int
    mu: float = 0.0
    lipschitz_grad: float | None = None
    known_optimum: tuple[Vector, float] | None = None
    c0_hint: float | None = None
    smooth: bool = False

    def value(self, x: Vector) -> float:
        raise NotImplementedError

    def subgrad(self, x: Vector) -> Vector:
        raise NotImplementedError

    def strong_convexity(self, precond_diag: Vector | None = None) -> float:
        """Strong convexity parameter relative to ``Q0 + 0.5 <B(z-z0), z-z0>``.

        The default is only valid for the identity preconditioner; problems
        with ``mu > 0`` override this to account for a diagonal ``B``.
        """
        if precond_diag is None or self.mu == 0.0:
            return self.mu
        raise NotImplementedError(
            f"{type(self).__name__} cannot rescale mu for a diagonal preconditioner")

    def grad_lipschitz(self, precond_diag: Vector | None = None) -> float | None:
        """Gradient Lipschitz constant in the norm ``sqrt(<Bz, z>)``, if known."""
        if precond_diag is None or self.lipschitz_grad is None:
            return self.lipschitz_grad
        raise NotImplementedError(
            f"{type(self).__name__} cannot rescale L for a diagonal preconditioner")


class FunctionObjective(Objective):
    """Objective built from plain callables."""

    def __init__(self, dim: int, f: Callable[[Vector], float],
                 g: Callable[[Vector], Vector], mu: float = 0.0,
                 lipschitz_grad: float | None = None,
                 known_optimum: tuple[Vector, float] | None = None):
        if dim < 1:
            raise ValueError("dim must be positive")
        if mu < 0:
            raise ValueError("mu must be nonnegative")
        self.dim = int(dim)
        self._f = f
        self._g = g
        self.mu = float(mu)
        self.lipschitz_grad = lipschitz_grad
        self.smooth = lipschitz_grad is not None
        self.known_optimum = known_optimum

    def value(self, x):
        return float(self._f(x))

    def subgrad(self, x):
        return np.asarray(self._g(x), dtype=float)


def _check_point(oracle: Objective, x: Vector) -> Vector:
    x = np.asarray(x, dtype=float)
    if x.shape != (oracle.dim,):
        raise ValueError(f"point has shape {x.shape}, expected ({oracle.dim},)")
    if not np.all(np.isfinite(x)):
        raise ValueError("point has non-finite entries")
    return x


def eval_value(oracle: Objective, x: Vector, counter: EvalCounter) -> float:
    x = _check_point(oracle, x)
    f = float(oracle.value(x))
    counter.n_f += 1
    if not np.isfinite(f):
        raise OracleError(f"objective value {f} at x={x!r}")
    return f


def eval_pair(oracle: Objective, x: Vector,
              counter: EvalCounter) -> tuple[float, Vector]:
    """Return ``(f(x), g(x))`` and bump both counters."""
    x = _check_point(oracle, x)
    f = float(oracle.value(x))
    g = np.asarray(oracle.subgrad(x), dtype=float)
    counter.n_f += 1
    counter.n_g += 1
    if not np.isfinite(f):
        raise OracleError(f"objective value {f} at x={x!r}")
    if g.shape != (oracle.dim,):
        raise OracleError(f"subgradient has shape {g.shape} at x={x!r}")
    if not np.all(np.isfinite(g)):
        raise OracleError(f"non-finite subgradient at x={x!r}")
    return f, g
