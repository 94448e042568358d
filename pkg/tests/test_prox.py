import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from osga.prox import Preconditioner, QuadraticProx, default_q0

from oracles import line_search_subproblem, mp_subproblem_value


def prox1(z0, q0, b=None):
    z0 = np.atleast_1d(np.asarray(z0, float))
    B = None if b is None else Preconditioner(z0.size, np.atleast_1d(np.asarray(b, float)))
    return QuadraticProx(z0, q0, B)


class TestPreconditioner:
    def test_rejects_nonpositive_diagonal(self):
        with pytest.raises(ValueError):
            Preconditioner(2, np.array([1.0, 0.0]))
        with pytest.raises(ValueError):
            Preconditioner(2, np.array([1.0, -3.0]))

    def test_apply_inverse_roundtrip(self):
        rng = np.random.default_rng(0)
        d = np.exp(rng.uniform(-5, 5, 30))
        B = Preconditioner(30, d)
        z = rng.standard_normal(30)
        np.testing.assert_allclose(B.apply_inverse(B.apply(z)), z, rtol=1e-12)
        np.testing.assert_allclose(B.apply(B.apply_inverse(z)), z, rtol=1e-12)

    def test_diagonal_is_frozen(self):
        d = np.array([1.0, 2.0])
        B = Preconditioner(2, d)
        d[0] = 99.0
        assert B.diag[0] == 1.0
        with pytest.raises(ValueError):
            B.diag[0] = 5.0


class TestProxFunction:
    @pytest.mark.parametrize("q0, z0, b, z, expected", [
        (1.0, 0.0, None, 0.0, 1.0),
        (0.5, 1.0, None, 0.0, 1.0),
        (1.0, 0.0, 4.0, 1.0, 3.0),
    ])
    def test_value(self, q0, z0, b, z, expected):
        assert prox1(z0, q0, b).value(np.array([z])) == pytest.approx(expected, rel=1e-15)

    def test_grad(self):
        P = QuadraticProx(np.zeros(2), 1.0)
        np.testing.assert_array_equal(P.grad(np.zeros(2)), [0.0, 0.0])
        np.testing.assert_array_equal(P.grad(np.array([2.0, -1.0])), [2.0, -1.0])
        np.testing.assert_array_equal(prox1(1.0, 1.0, 4.0).grad(np.array([0.0])), [-4.0])

    def test_dual_norm(self):
        P = QuadraticProx(np.zeros(2), 1.0)
        assert P.dual_norm(np.zeros(2)) == 0.0
        assert P.dual_norm(np.array([3.0, 4.0])) == pytest.approx(5.0, rel=1e-15)
        assert prox1(0.0, 1.0, 4.0).dual_norm(np.array([2.0])) == pytest.approx(1.0, rel=1e-15)

    def test_value_at_least_q0(self):
        rng = np.random.default_rng(1)
        P = QuadraticProx(rng.standard_normal(5), 0.3, Preconditioner(5, rng.uniform(0.1, 3, 5)))
        for _ in range(50):
            assert P.value(rng.standard_normal(5) * 10) >= 0.3

    def test_strong_convexity_identity_is_exact(self):
        # Q(z) - Q(x) - <gQ(x), z-x> = 0.5 |z-x|^2 for the quadratic prox
        rng = np.random.default_rng(2)
        P = QuadraticProx(rng.standard_normal(4), 2.0, Preconditioner(4, rng.uniform(0.5, 2, 4)))
        for _ in range(20):
            x, z = rng.standard_normal(4), rng.standard_normal(4)
            lhs = P.value(z) - P.value(x) - P.grad(x) @ (z - x)
            assert lhs == pytest.approx(0.5 * P.norm(z - x) ** 2, rel=1e-10, abs=1e-12)

    def test_dimension_mismatch(self):
        P = QuadraticProx(np.zeros(3), 1.0)
        with pytest.raises(ValueError):
            P.value(np.zeros(2))

    @pytest.mark.parametrize("q0", [0.0, -1.0, math.inf, math.nan])
    def test_bad_q0(self, q0):
        with pytest.raises(ValueError):
            QuadraticProx(np.zeros(1), q0)

    def test_default_q0(self):
        assert default_q0(np.zeros(3), np.zeros(3)) == 1.0
        assert default_q0(np.array([4.0, 0.0]), np.zeros(2)) == 8.0


class TestSubproblemExamples:
    def test_zero_h_negative_beta(self):
        P = QuadraticProx(np.zeros(3), 1.0)
        sol = P.solve(-1.0, np.zeros(3))
        assert sol.E == 1.0
        np.testing.assert_array_equal(sol.u, np.zeros(3))
        ident, stat = P.verify(-1.0, np.zeros(3), sol)
        assert ident == 0.0
        assert stat == 0.0

    def test_zero_h_nonnegative_beta(self):
        P = QuadraticProx(np.zeros(2), 1.0)
        assert P.solve(0.5, np.zeros(2)).E == 0.0
        assert P.solve(0.0, np.zeros(2)).E == 0.0

    def test_beta_zero(self):
        P = QuadraticProx(np.zeros(3), 1.0)
        h = np.array([1.0, 0.0, 0.0])
        sol = P.solve(0.0, h)
        assert sol.beta == 0.0
        assert sol.E == pytest.approx(1 / math.sqrt(2), rel=1e-14)
        np.testing.assert_allclose(sol.u, [-math.sqrt(2), 0, 0], rtol=1e-14)
        assert sol.E * P.value(sol.u) == pytest.approx(math.sqrt(2), rel=1e-14)
        assert -(0.0 + h @ sol.u) == pytest.approx(math.sqrt(2), rel=1e-14)

    def test_beta_positive(self):
        P = QuadraticProx(np.zeros(1), 1.0)
        sol = P.solve(1.0, np.array([1.0]))
        assert sol.beta == 1.0
        assert sol.E == pytest.approx(1 / (1 + math.sqrt(3)), rel=1e-14)
        assert sol.u[0] == pytest.approx(-(1 + math.sqrt(3)), rel=1e-14)
        assert -1.0 - sol.u[0] == pytest.approx(sol.E * P.value(sol.u), rel=1e-14)

    def test_exact_solution_residuals(self):
        rng = np.random.default_rng(3)
        P = QuadraticProx(rng.standard_normal(6), 0.7, Preconditioner(6, rng.uniform(0.2, 5, 6)))
        h = rng.standard_normal(6)
        sol = P.solve(0.4, h)
        ident, stat = P.verify(0.4, h, sol)
        assert ident <= 1e-10
        assert stat <= 1e-10

    def test_perturbed_solution_detected(self):
        P = QuadraticProx(np.zeros(3), 1.0)
        h = np.array([1.0, -2.0, 0.5])
        sol = P.solve(0.3, h)
        bad_u = sol.u.copy()
        bad_u[1] += 1e-3
        bad = type(sol)(sol.E, bad_u, sol.beta)
        _, stat = P.verify(0.3, h, bad)
        assert stat > 1e-4

    def test_underflowing_value(self):
        P = QuadraticProx(np.array([0.3]), 2.0)
        sol = P.solve(1.0, np.array([1e-170]))
        assert sol.E == 0.0
        assert np.all(np.isfinite(sol.u)) and sol.u[0] < -1e169
        # beta <= 0 keeps a representable value
        assert P.solve(0.0, np.array([1e-170])).E == pytest.approx(0.5e-170, rel=1e-14)

    def test_nonfinite_input(self):
        P = QuadraticProx(np.zeros(2), 1.0)
        with pytest.raises(ArithmeticError):
            P.solve(math.nan, np.ones(2))
        with pytest.raises(ArithmeticError):
            P.solve(0.0, np.array([1.0, math.inf]))


def _random_tuple(rng, n=None):
    n = rng.integers(1, 21) if n is None else n
    h = rng.standard_normal(n) * np.exp(rng.uniform(-3, 3))
    z0 = rng.standard_normal(n) * rng.uniform(0, 5)
    q0 = float(np.exp(rng.uniform(np.log(1e-2), np.log(1e2))))
    b = np.exp(rng.uniform(np.log(1e-2), np.log(1e2), n))
    gamma = float(rng.uniform(-10, 10))
    return gamma, h, z0, q0, b


def test_against_high_precision_root():
    rng = np.random.default_rng(4)
    for _ in range(300):
        gamma, h, z0, q0, b = _random_tuple(rng)
        P = QuadraticProx(z0, q0, Preconditioner(z0.size, b))
        ref = mp_subproblem_value(gamma, h, z0, q0, b)
        assert P.solve(gamma, h).E == pytest.approx(ref, rel=1e-13)


def test_both_algebraic_forms_agree():
    rng = np.random.default_rng(5)
    for _ in range(10_000):
        gamma, h, z0, q0, b = _random_tuple(rng, n=int(rng.integers(1, 6)))
        beta = gamma + h @ z0
        s2 = float(h @ (h / b))
        root = math.sqrt(beta * beta + 2 * q0 * s2)
        first = (root - beta) / (2 * q0)
        second = s2 / (beta + root)
        # each form loses digits only when |beta| dominates with the wrong sign
        if beta * beta > 1e6 * q0 * s2:
            continue
        assert first == pytest.approx(second, rel=1e-9)


def test_line_restriction_oracle_small_batch():
    rng = np.random.default_rng(6)
    n = 4
    rows = [_random_tuple(rng, n) for _ in range(200)]
    gamma = np.array([r[0] for r in rows])
    H = np.array([r[1] for r in rows])
    Z0 = np.array([r[2] for r in rows])
    q0 = np.array([r[3] for r in rows])
    Bd = np.array([r[4] for r in rows])
    E_ref, U_ref = line_search_subproblem(gamma, H, Z0, q0, Bd)
    for i in range(len(rows)):
        P = QuadraticProx(Z0[i], q0[i], Preconditioner(n, Bd[i]))
        sol = P.solve(gamma[i], H[i])
        assert abs(sol.E - E_ref[i]) <= 1e-6 * sol.E
        assert np.linalg.norm(sol.u - U_ref[i]) <= 1e-6 * (1 + np.linalg.norm(sol.u))


# entries are 0 or large enough that |h|^2 is a normal double
finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False).filter(
    lambda v: v == 0 or abs(v) >= 1e-100)


@settings(max_examples=200, deadline=None)
@given(gamma=finite, h=st.lists(finite, min_size=1, max_size=5), seed=st.integers(0, 2**32 - 1))
def test_key_inequalities(gamma, h, seed):
    h = np.array(h)
    n = h.size
    rng = np.random.default_rng(seed)
    P = QuadraticProx(rng.standard_normal(n), float(rng.uniform(0.1, 10)),
                      Preconditioner(n, rng.uniform(0.1, 10, n)))
    sol = P.solve(gamma, h)
    assert sol.E >= 0
    for _ in range(20):
        z = rng.standard_normal(n) * 10
        lhs = gamma + h @ z
        rhs = sol.E * (0.5 * P.norm(z - sol.u) ** 2 - P.value(z))
        scale = 1 + abs(gamma) + abs(h @ z) + sol.E * P.value(z)
        assert lhs >= rhs - 1e-9 * scale
        key2 = sol.E * (P.value(z) - P.value(sol.u)) + h @ (z - sol.u)
        assert key2 >= -1e-9 * scale


@settings(max_examples=200, deadline=None)
@given(gamma=finite, h=st.lists(finite, min_size=1, max_size=5),
       c=st.floats(1e-3, 1e3), seed=st.integers(0, 2**32 - 1))
def test_scaling_covariance(gamma, h, c, seed):
    h = np.array(h)
    rng = np.random.default_rng(seed)
    P = QuadraticProx(rng.standard_normal(h.size), float(rng.uniform(0.1, 10)))
    a = P.solve(gamma, h)
    b = P.solve(c * gamma, c * h)
    assert b.E == pytest.approx(c * a.E, rel=1e-12, abs=1e-300)
    np.testing.assert_allclose(b.u, a.u, rtol=1e-10, atol=1e-10 * (1 + np.abs(a.u).max()))
