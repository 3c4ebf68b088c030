import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rtomo.solvers import (CgBreakdown, CgConfig, FistaConfig, NonFiniteError, cg_solve, fista,
                           l1_norm, real_dot, soft_threshold)

from conftest import crandn


def test_soft_threshold_examples():
    np.testing.assert_allclose(soft_threshold(np.array([3 + 4j]), 1.0), [2.4 + 3.2j], atol=1e-15)
    v = np.array([1 - 2j, 0, -3.0 + 0j])
    np.testing.assert_array_equal(soft_threshold(v, 0.0), v)
    assert not np.any(soft_threshold(v, 3.0))
    np.testing.assert_allclose(soft_threshold(np.array([-3.0, 0.5]), 1.0), [-2.0, 0.0])
    with pytest.raises(ValueError):
        soft_threshold(v, -0.1)


@settings(max_examples=50)
@given(seed=st.integers(0, 2**32 - 1), tau=st.floats(0, 3))
def test_soft_threshold_nonexpansive(seed, tau):
    rng = np.random.default_rng(seed)
    u, v = crandn(rng, 20), crandn(rng, 20)
    assert (np.linalg.norm(soft_threshold(u, tau) - soft_threshold(v, tau))
            <= np.linalg.norm(u - v) + 1e-12)


def test_soft_threshold_is_prox(rng):
    # perturbing the prox output never lowers tau*|x|_1 + |x - v|^2/2
    v, tau = crandn(rng, 8), 0.7
    x = soft_threshold(v, tau)
    obj = lambda z: tau * l1_norm(z) + 0.5 * np.linalg.norm(z - v) ** 2
    for _ in range(200):
        assert obj(x) <= obj(x + 1e-3 * crandn(rng, 8)) + 1e-15


def test_cg_identity(rng):
    b = crandn(rng, 10)
    x, it, res = cg_solve(lambda v: v, b, CgConfig(10, 1e-12))
    np.testing.assert_allclose(x, b)
    assert it == 1 and res == 0.0


def test_cg_zero_rhs():
    x, it, res = cg_solve(lambda v: 2 * v, np.zeros(4), CgConfig())
    assert not np.any(x) and it == 0


def test_cg_diagonal(rng):
    n = 30
    d = np.arange(1.0, n + 1)
    x_true = crandn(rng, n)
    b = d * x_true
    x, it, res = cg_solve(lambda v: d * v, b, CgConfig(200, 1e-10))
    assert res <= 1e-10 * np.linalg.norm(b)
    assert np.linalg.norm(x - x_true) <= 1e-8 * np.linalg.norm(x_true)


def test_cg_two_by_two_hand_inverse():
    G = np.array([[2, 1j], [-1j, 2]])
    # inverse = [[2, -1j], [1j, 2]] / 3
    x, it, res = cg_solve(lambda v: G @ v, np.array([1.0, 0.0]), CgConfig(10, 1e-14))
    np.testing.assert_allclose(x, [2 / 3, 1j / 3], atol=1e-14)
    assert it <= 2


@pytest.mark.parametrize("n", [1, 3, 5, 8])
def test_cg_small_dense_systems(rng, n):
    B = crandn(rng, n, n)
    G = B.conj().T @ B + 0.5 * np.eye(n)
    x_true = crandn(rng, n)
    b = G @ x_true
    x, it, res = cg_solve(lambda v: G @ v, b, CgConfig(n + 2, 1e-12))
    assert it <= n + 2
    assert np.linalg.norm(x - x_true) <= 1e-9 * np.linalg.norm(x_true)


def test_cg_energy_error_nonincreasing(rng):
    n = 12
    B = crandn(rng, n, n)
    G = B.conj().T @ B + np.eye(n)
    b = crandn(rng, n)
    x_star = np.linalg.solve(G, b)
    errs = []
    for k in range(1, n + 1):
        x, *_ = cg_solve(lambda v: G @ v, b, CgConfig(k, 1e-300))
        e = x - x_star
        errs.append(np.vdot(e, G @ e).real)
    assert all(b <= a * (1 + 1e-9) + 1e-20 for a, b in zip(errs, errs[1:]))


def test_cg_warm_start(rng):
    d = np.linspace(1, 5, 6)
    b = crandn(rng, 6)
    x, it, _ = cg_solve(lambda v: d * v, b, CgConfig(50, 1e-10), x0=b / d)
    assert it == 0


def test_cg_breakdown_and_nonfinite():
    with pytest.raises(CgBreakdown):
        cg_solve(lambda v: -v, np.ones(3), CgConfig())
    with pytest.raises(NonFiniteError):
        cg_solve(lambda v: v, np.array([1.0, np.nan]), CgConfig())


def test_cg_max_iters_reported(rng):
    d = np.logspace(0, 6, 50)
    x, it, res = cg_solve(lambda v: d * v, crandn(rng, 50), CgConfig(3, 1e-12))
    assert it == 3 and res > 0


def l1_problem(a, tau):
    f_val = lambda x: 0.5 * real_dot(x - a, x - a)
    f_grad = lambda x: x - a
    g_val = lambda x: tau * l1_norm(x)
    prox = lambda v, s: soft_threshold(v, tau * s)
    return f_val, f_grad, g_val, prox


def test_fista_separable_closed_form(rng):
    a, tau = crandn(rng, 25), 0.8
    x, rep = fista(*l1_problem(a, tau), np.zeros(25), FistaConfig(max_iters=200, rel_tol=0))
    assert rep.iterations <= 200
    np.testing.assert_allclose(x, soft_threshold(a, tau), atol=1e-8)


def test_fista_scalar_lasso():
    x, rep = fista(*l1_problem(np.array([2.0]), 1.0), np.zeros(1), FistaConfig(rel_tol=1e-14))
    assert x[0] == pytest.approx(1.0, abs=1e-10)


def test_fista_monotone_and_backtracking_holds(rng):
    A = crandn(rng, 30, 16)
    y = crandn(rng, 30)
    mu = 0.5
    f_val = lambda x: 0.5 * mu * np.linalg.norm(A @ x - y) ** 2
    f_grad = lambda x: mu * A.conj().T @ (A @ x - y)
    checks = []

    def prox(v, s):
        return soft_threshold(v, s)

    x0 = crandn(rng, 16)
    x, rep = fista(f_val, f_grad, l1_norm, prox, x0, FistaConfig(L0=1e-3, max_iters=300))
    assert rep.backtracks > 0
    assert rep.objective[-1] <= rep.objective[0] + 1e-12
    assert all(b <= a + 1e-12 for a, b in zip(rep.objective, rep.objective[1:]))
    # the accepted Lipschitz estimate satisfies the quadratic upper bound at the end point
    L = rep.lipschitz
    g = f_grad(x)
    z = prox(x - g / L, 1 / L)
    d = z - x
    assert f_val(z) <= f_val(x) + real_dot(d, g) + 0.5 * L * real_dot(d, d) + 1e-9


def long_run_ista(A, y, mu, iters):
    """Plain proximal gradient with the exact 1/Lipschitz step."""
    Lf = mu * np.linalg.norm(A, 2) ** 2
    x = np.zeros(A.shape[1], complex)
    for _ in range(iters):
        x = soft_threshold(x - mu * A.conj().T @ (A @ x - y) / Lf, 1 / Lf)
    return x


def test_fista_complex_lasso_against_long_run_reference(rng):
    A = crandn(rng, 12, 16)
    y = A @ np.where(rng.random(16) < 0.3, crandn(rng, 16), 0) + 0.05 * crandn(rng, 12)
    mu = 2.0
    F = lambda x: 0.5 * mu * np.linalg.norm(A @ x - y) ** 2 + l1_norm(x)
    ref = long_run_ista(A, y, mu, 100_000)
    x, rep = fista(lambda x: 0.5 * mu * np.linalg.norm(A @ x - y) ** 2,
                   lambda x: mu * A.conj().T @ (A @ x - y), l1_norm, soft_threshold,
                   np.zeros(16), FistaConfig(max_iters=5000, rel_tol=1e-15))
    assert abs(F(x) - F(ref)) <= 1e-6 * abs(F(ref))


def test_fista_beats_gradient_descent_on_quadratic(rng):
    n = 40
    d = np.logspace(0, 2, n)
    b = crandn(rng, n)
    f_val = lambda x: 0.5 * real_dot(x, d * x) - real_dot(b, x)
    f_grad = lambda x: d * x - b
    f_star = f_val(b / d)
    gap = lambda x: (f_val(x) - f_star) / abs(f_star)

    def run_fista(k):
        x, _ = fista(f_val, f_grad, lambda x: 0.0, lambda v, s: v, np.zeros(n),
                     FistaConfig(L0=d.max(), max_iters=k, rel_tol=0))
        return x

    def run_gd(k):
        x = np.zeros(n, complex)
        for _ in range(k):
            x = x - f_grad(x) / d.max()
        return x

    budget = next(k for k in range(25, 5001, 25) if gap(run_fista(k)) < 1e-6)
    assert gap(run_gd(budget)) > 1e-6
    for k in (25, 100, budget):
        assert gap(run_fista(k)) < gap(run_gd(k))


def test_fista_nonfinite_objective():
    with pytest.raises(NonFiniteError):
        fista(lambda x: np.nan, lambda x: x, l1_norm, soft_threshold, np.zeros(2))


@pytest.mark.parametrize("kw", [dict(L0=0), dict(eta=1.0), dict(max_iters=0), dict(rel_tol=-1)])
def test_fista_config_validation(kw):
    with pytest.raises(ValueError):
        FistaConfig(**kw)


def test_cg_config_validation():
    with pytest.raises(ValueError):
        CgConfig(max_iters=0)
    with pytest.raises(ValueError):
        CgConfig(rel_tol=0)
