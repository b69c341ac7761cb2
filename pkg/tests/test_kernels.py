"""Backend parity: the numba kernels must reproduce the numpy fallback
exactly, since both consume the same pre-drawn randoms."""
import numpy as np
import pytest

from hrsim import rng_stream
from hrsim.backend import HAVE_NUMBA
from hrsim import kernels

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba unavailable")


def _step_inputs(n, seed=0):
    rng = rng_stream(seed, 0)
    pos = rng.uniform(-10, 10, (n, 3))
    vel = rng.uniform(-0.5, 0.5, (n, 3))
    vel[: n // 4] = 0.0  # force some resamples via the zero-speed branch
    turn_u = rng.random(n)
    gauss = rng.standard_normal((n, 3))
    rad_u = rng.random(n)
    return pos, vel, turn_u, gauss, rad_u


@needs_numba
def test_ergodic_update_parity():
    drift = np.array([0.2, -0.1, 0.0])
    pos1, vel1, tu, g, ru = _step_inputs(500)
    pos2, vel2 = pos1.copy(), vel1.copy()
    kernels.ergodic_update_numpy(pos1, vel1, tu, g, ru, drift, 0.3, 1.0, 10.5)
    kernels.ergodic_update_numba(pos2, vel2, tu, g, ru, drift, 0.3, 1.0, 10.5)
    assert np.allclose(pos1, pos2, rtol=0, atol=1e-14)
    assert np.allclose(vel1, vel2, rtol=0, atol=1e-14)


@needs_numba
def test_residual_matrix_parity():
    rng = rng_stream(1, 0)
    wa = rng.uniform(0.05, 1.0, (40, 2))
    pa = rng.uniform(-3, 3, (40, 2))
    wb = rng.uniform(0.05, 1.0, (30, 2))
    pb = rng.uniform(-3, 3, (30, 2))
    a = kernels.residual_matrix_numpy(wa, pa, wb, pb)
    b = kernels.residual_matrix_numba(wa, pa, wb, pb)
    assert np.allclose(a, b, rtol=0, atol=1e-13)


@needs_numba
def test_cross_hits_parity():
    rng = rng_stream(2, 0)
    pa = rng.uniform(-20, 20, (300, 3))
    pb = rng.uniform(-20, 20, (200, 3))
    for radius in (0.5, 2.0, 7.0):
        ha1, hb1 = kernels.cross_hits_numpy(pa, pb, radius)
        ha2, hb2 = kernels.cross_hits_numba(pa, pb, radius)
        assert np.array_equal(ha1, ha2)
        assert np.array_equal(hb1, hb2)


@needs_numba
def test_near_hits_parity_and_empty():
    rng = rng_stream(3, 0)
    q = rng.uniform(-5, 5, (100, 3))
    p = rng.uniform(-5, 5, (80, 3))
    assert np.array_equal(kernels.near_hits_numpy(q, p, 1.5),
                          kernels.near_hits_numba(q, p, 1.5))
    assert not kernels.near_hits_numpy(q, p[:0], 1.5).any()
    assert not kernels.near_hits_numba(q, p[:0], 1.5).any()


@needs_numba
def test_batch_cross_hits_parity():
    rng = rng_stream(4, 0)
    pos = rng.uniform(-8, 8, (16, 24, 3))
    active = rng.random(16) < 0.8
    a = kernels.batch_cross_hits_numpy(pos, 10, 2.5, active)
    b = kernels.batch_cross_hits_numba(pos, 10, 2.5, active)
    assert np.array_equal(a, b)
    assert not a[~active].any()


def test_cross_hits_brute_oracle():
    rng = rng_stream(5, 0)
    pa = rng.uniform(-4, 4, (60, 3))
    pb = rng.uniform(-4, 4, (50, 3))
    radius = 1.2
    d = np.linalg.norm(pa[:, None] - pb[None, :], axis=-1)
    ha, hb = kernels.cross_hits(pa, pb, radius)
    assert np.array_equal(ha, (d <= radius).any(axis=1))
    assert np.array_equal(hb, (d <= radius).any(axis=0))


def test_ergodic_update_respects_cone():
    pos, vel, tu, g, ru = _step_inputs(400, seed=6)
    drift = np.array([0.4, 0.0, 0.0])
    kernels.ergodic_update(pos, vel, np.zeros(400), g, ru, drift, 1.0, 1.0,
                           1e6)
    # resampled velocities stay inside the unit ball around the origin
    speeds = np.sqrt((vel ** 2).sum(1))
    assert np.all(speeds <= 1.0 + 1e-12)
    # and inside the drift-centered sub-ball
    rel = np.sqrt(((vel - drift) ** 2).sum(1))
    assert np.all(rel <= 1.0 - 0.4 + 1e-12)
