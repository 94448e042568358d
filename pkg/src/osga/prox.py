"""Quadratic prox function and the closed-form auxiliary subproblem.

The prox function is ``Q(z) = Q0 + 0.5 * <B(z - z0), z - z0>`` with a
diagonal (or identity) preconditioner ``B``.  For a linear form
``gamma + <h, z>`` the auxiliary subproblem

    E(gamma, h) = sup_z  -(gamma + <h, z>) / Q(z),   U(gamma, h) = argsup

has a closed-form solution on the whole space, computed by
:meth:`QuadraticProx.solve`.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass

import numpy as np

from .oracle import Vector


@dataclass(frozen=True)
class Preconditioner:
    """Identity (``diag is None``) or positive diagonal ``B``."""

    dim: int
    diag: Vector | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.diag is not None:
            d = np.array(self.diag, dtype=float)
            if d.shape != (self.dim,):
                raise ValueError(f"diagonal has shape {d.shape}, expected ({self.dim},)")
            if not np.all(np.isfinite(d)) or np.any(d <= 0):
                raise ValueError("preconditioner diagonal must be finite and positive")
            d.flags.writeable = False
            object.__setattr__(self, "diag", d)

    @classmethod
    def identity(cls, dim: int) -> "Preconditioner":
        return cls(dim)

    @property
    def is_identity(self) -> bool:
        return self.diag is None

    def apply(self, z: Vector) -> Vector:
        return z.copy() if self.diag is None else self.diag * z

    def apply_inverse(self, h: Vector) -> Vector:
        return h.copy() if self.diag is None else h / self.diag


@dataclass(frozen=True)
class SubproblemSolution:
    E: float
    u: Vector
    beta: float


class QuadraticProx:
    """``Q(z) = Q0 + 0.5 ||z - z0||^2`` in the norm ``||z|| = sqrt(<Bz, z>)``."""

    def __init__(self, z0: Vector, q0: float = 1.0,
                 precond: Preconditioner | None = None):
        z0 = np.array(z0, dtype=float)
        if z0.ndim != 1 or not np.all(np.isfinite(z0)):
            raise ValueError("z0 must be a finite vector")
        if not (q0 > 0 and math.isfinite(q0)):
            raise ValueError(f"Q0 must be positive and finite, got {q0}")
        if precond is None:
            precond = Preconditioner.identity(z0.size)
        if precond.dim != z0.size:
            raise ValueError("preconditioner and z0 dimensions differ")
        z0.flags.writeable = False
        self.z0 = z0
        self.q0 = float(q0)
        self.B = precond

    @property
    def dim(self) -> int:
        return self.z0.size

    def _check(self, v: Vector) -> Vector:
        v = np.asarray(v, dtype=float)
        if v.shape != self.z0.shape:
            raise ValueError(f"vector has shape {v.shape}, expected {self.z0.shape}")
        return v

    def value(self, z: Vector) -> float:
        d = self._check(z) - self.z0
        return self.q0 + 0.5 * float(d @ self.B.apply(d))

    def grad(self, z: Vector) -> Vector:
        return self.B.apply(self._check(z) - self.z0)

    def norm(self, z: Vector) -> float:
        z = self._check(z)
        return math.sqrt(float(z @ self.B.apply(z)))

    def dual_norm(self, h: Vector) -> float:
        h = self._check(h)
        return math.sqrt(float(h @ self.B.apply_inverse(h)))

    def solve(self, gamma: float, h: Vector) -> SubproblemSolution:
        """Maximize ``-(gamma + <h, z>) / Q(z)`` over the whole space.

        With ``beta = gamma + <h, z0>`` and ``s = ||h||_*`` the optimal value
        is the positive root of ``Q0 e^2 + beta e - s^2/2 = 0``; the root is
        evaluated in whichever algebraic form avoids cancellation for the
        sign of ``beta``.  For ``h = 0`` the supremum is ``max(0, -beta/Q0)``
        and ``z0`` is returned as maximizer.  When ``beta > 0`` and ``|h|`` is
        so small that ``E`` underflows, ``E = 0`` is returned with the (finite,
        far away) maximizer.
        """
        h = self._check(h)
        if not (math.isfinite(gamma) and np.all(np.isfinite(h))):
            raise ArithmeticError("non-finite subproblem data")
        beta = float(gamma + h @ self.z0)
        hinv = self.B.apply_inverse(h)
        s2 = float(h @ hinv)
        if s2 >= sys.float_info.min:
            root = math.sqrt(beta * beta + 2.0 * self.q0 * s2)
            E = (root - beta) / (2.0 * self.q0) if beta <= 0 else s2 / (beta + root)
            if not (math.isfinite(E) and E > 0):
                raise ArithmeticError(f"subproblem value E={E} for beta={beta}, |h|^2={s2}")
            u = self.z0 - hinv / E
        else:
            E, u = self._solve_tiny(beta, h)
        if not np.all(np.isfinite(u)):
            raise ArithmeticError("non-finite subproblem maximizer")
        return SubproblemSolution(E, u, beta)

    def _solve_tiny(self, beta: float, h: Vector) -> tuple[float, Vector]:
        # |h|_*^2 underflows: work with h/m
        m = float(np.abs(h).max())
        if m == 0.0:
            return max(0.0, -beta / self.q0), self.z0.copy()
        hinv = self.B.apply_inverse(h / m)
        s_unit = math.sqrt(float((h / m) @ hinv))
        s = m * s_unit
        root = math.hypot(beta, math.sqrt(2.0 * self.q0) * s)
        if beta <= 0:
            E = (root - beta) / (2.0 * self.q0)
            step = m / E
        else:
            # E may underflow to 0; the maximizer stays representable
            E = s * (s / (beta + root))
            step = (beta + root) / (s * s_unit)
        return E, self.z0 - step * hinv

    def verify(self, gamma: float, h: Vector,
               sol: SubproblemSolution) -> tuple[float, float]:
        """Scaled residuals of the value identity and the stationarity condition."""
        h = self._check(h)
        identity = abs(sol.E * self.value(sol.u) + gamma + float(h @ sol.u))
        stationarity = self.dual_norm(sol.E * self.grad(sol.u) + h)
        return identity / (1 + abs(gamma)), stationarity / (1 + self.dual_norm(h))


def default_q0(x_guess: Vector, z0: Vector, precond: Preconditioner | None = None) -> float:
    """Order-of-magnitude guess ``max(0.5 ||x_guess - z0||^2, 1)``."""
    d = np.asarray(x_guess, dtype=float) - np.asarray(z0, dtype=float)
    Bd = d if precond is None else precond.apply(d)
    return max(0.5 * float(d @ Bd), 1.0)
