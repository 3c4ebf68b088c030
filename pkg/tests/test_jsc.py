import numpy as np
import pytest

from rtomo.geometry import MeasurementSet, SceneGrid, WaveformConfig, make_cluster
from rtomo.jsc import (DataFidelity, JscConfig, estimate_phase, fuse_max, run_jsc,
                       solve_local)
from rtomo.operator import ClusterOperator
from rtomo.simulate import PointScatterer, simulate_cluster
from rtomo.solvers import FistaConfig

from conftest import DEG, crandn


def random_data(op, rng):
    return MeasurementSet(op.geometry, crandn(rng, op.geometry.n_samples))


def test_estimate_phase_unit_modulus(small_op, rng):
    y = random_data(small_op, rng)
    theta = estimate_phase(small_op, y)
    np.testing.assert_allclose(np.abs(theta), 1.0, atol=1e-14)
    bp = small_op.adjoint(y.samples)
    np.testing.assert_allclose(theta * np.abs(bp), bp, atol=1e-12)


def test_estimate_phase_zero_backprojection(small_op):
    y = MeasurementSet(small_op.geometry, np.zeros(small_op.geometry.n_samples))
    assert np.all(estimate_phase(small_op, y) == 1.0)


def test_mismatched_geometry_rejected(small_op, rng):
    other = make_cluster(50 * DEG, 0.0, 10 * DEG, 3, small_op.geometry.waveform)
    with pytest.raises(ValueError, match="different clusters"):
        estimate_phase(small_op, MeasurementSet(other, crandn(rng, other.n_samples)))


def test_data_fidelity_value_and_gradient(small_op, rng):
    # direct forward-model oracle
    y = random_data(small_op, rng)
    theta = np.exp(1j * rng.uniform(0, 2 * np.pi, small_op.grid.size))
    mu = 3.0
    term = DataFidelity(small_op, y, theta, mu)
    r = crandn(rng, small_op.grid.size)
    resid = small_op.forward(theta * r) - y.samples
    assert term.value(r) == pytest.approx(0.5 * mu * np.vdot(resid, resid).real, rel=1e-11)
    grad = mu * theta.conj() * small_op.adjoint(resid)
    np.testing.assert_allclose(term.grad(r), grad, rtol=1e-11, atol=1e-9)
    # the gradient is the Wirtinger one: f(r + t d) ~ f(r) + t Re<grad, d>
    d, t = crandn(rng, small_op.grid.size), 1e-6
    fd = (term.value(r + t * d) - term.value(r - t * d)) / (2 * t)
    assert fd == pytest.approx(np.vdot(term.grad(r), d).real, rel=1e-5)


def kkt_violation(term, r):
    # 0 in grad + subdifferential of |r|_1
    g = term.grad(r)
    nz = np.abs(r) > 0
    on = np.abs(g[nz] + r[nz] / np.abs(r[nz]))
    off = np.maximum(np.abs(g[~nz]) - 1.0, 0.0)
    return max(on.max(initial=0.0), off.max(initial=0.0))


def test_solve_local_satisfies_optimality(small_op, rng):
    y = random_data(small_op, rng)
    theta = estimate_phase(small_op, y)
    cfg = JscConfig(mu=0.05, fista=FistaConfig(max_iters=20000, rel_tol=1e-15))
    r, rep = solve_local(small_op, y, theta, cfg)
    term = DataFidelity(small_op, y, theta, cfg.mu)
    assert kkt_violation(term, r) < 1e-4
    assert np.count_nonzero(r) < r.size  # the l1 term bites at this mu
    assert rep.objective[-1] <= rep.objective[0]


def test_solve_local_zero_data(small_op):
    y = MeasurementSet(small_op.geometry, np.zeros(small_op.geometry.n_samples))
    r, rep = solve_local(small_op, y, np.ones(small_op.grid.size))
    assert not np.any(r)
    assert rep.converged


def test_fuse_max():
    a = np.array([0.0, 2.0, 1.0])
    b = np.array([1.0, 0.5, 1.0])
    np.testing.assert_array_equal(fuse_max([a, b]), [1.0, 2.0, 1.0])
    np.testing.assert_array_equal(fuse_max([a]), a)
    with pytest.raises(ValueError):
        fuse_max([])
    with pytest.raises(ValueError):
        fuse_max([a, np.ones(2)])
    with pytest.raises(ValueError):
        fuse_max([-a - 1])


@pytest.mark.parametrize("mu", [0.0, -1.0])
def test_jsc_config_validation(mu):
    with pytest.raises(ValueError):
        JscConfig(mu=mu)


def two_cluster_problem():
    grid = SceneGrid(-0.8, 0.8, -0.8, 0.8, 16, 16)
    wf = WaveformConfig(5e9, 2e9, 8)
    scat = [PointScatterer(0.05, 0.05, amplitude=1.0), PointScatterer(-0.45, 0.35, amplitude=0.5)]
    geoms = [make_cluster(40 * DEG, a * DEG, 18 * DEG, 6, wf) for a in (0, 90)]
    ys = [simulate_cluster(g, scat) for g in geoms]
    return [ClusterOperator(g, grid) for g in geoms], ys


def test_run_jsc_images_scatterers_and_is_thread_invariant():
    ops, ys = two_cluster_problem()
    cfg = JscConfig(mu=100.0, fista=FistaConfig(max_iters=300))
    serial = run_jsc(ops, ys, cfg)
    parallel = run_jsc(ops, ys, cfg, threads=2)
    np.testing.assert_array_equal(serial.image, parallel.image)
    grid = ops[0].grid
    assert int(np.argmax(serial.image)) == grid.nearest_pixel(0.05, 0.05)
    np.testing.assert_array_equal(serial.image, np.maximum(*[np.abs(r) for r in serial.local]))
    assert len(serial.reports) == 2 and len(serial.thetas) == 2


def test_run_jsc_rejects_mismatched_lists():
    ops, ys = two_cluster_problem()
    with pytest.raises(ValueError):
        run_jsc(ops, ys[:1])
    with pytest.raises(ValueError):
        run_jsc([], [])
