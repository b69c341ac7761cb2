import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hrsim import (CycleHooks, CycleSchedule, Ensemble, OutOfRange, Phase,
                   TwoTimeHistory, hamiltonian_value, kappa, project_two_time,
                   rng_stream, run_cycle, semi_period, semi_period_real,
                   step_contractive, step_ergodic, step_expansive)
from hrsim.dynamics import DimensionMismatch


# ----------------------------------------------------------------- semi-period

def test_semi_period_basics():
    assert semi_period(0.0, 10) == 10
    assert semi_period(1.0, 10) == round(10 * math.e)
    with pytest.raises(ValueError):
        semi_period(-0.1, 10)
    with pytest.raises(OverflowError):
        semi_period(200.0, 10)


@settings(max_examples=100, deadline=None)
@given(mu1=st.floats(0.0, 20.0, allow_nan=False),
       mu2=st.floats(0.0, 20.0, allow_nan=False))
def test_semi_period_multiplicative(mu1, mu2):
    t_min = 10
    lhs = semi_period_real(mu1 + mu2, t_min) * t_min
    rhs = semi_period_real(mu1, t_min) * semi_period_real(mu2, t_min)
    assert abs(lhs - rhs) <= 1e-12 * abs(rhs)


def test_schedule_from_config(small_config):
    sched = CycleSchedule.from_config(small_config.with_(mu_a=0.0, mu_b=1.0))
    # the pair inherits the larger of the two semi-periods
    assert sched.semi_period == semi_period(1.0, small_config.t_min_steps)
    assert 0 < sched.ergodic_end < sched.semi_period
    assert sched.cycle_length == 2 * sched.semi_period


# ----------------------------------------------------------------------- kappa

def test_kappa_profile():
    sched = CycleSchedule(semi_period=10, ergodic_end=6)
    assert all(kappa(t, sched) == 0.0 for t in range(6))
    assert kappa(10, sched) == 1.0  # exact at the equilibrium point
    vals = [kappa(t, sched) for t in range(6, 11)]
    assert vals == sorted(vals)
    # expansive half mirrors the contractive one
    for s in range(1, 10):
        assert kappa(10 + s, sched) == kappa(10 - s, sched)
    with pytest.raises(OutOfRange):
        kappa(20, sched)
    with pytest.raises(OutOfRange):
        kappa(-1, sched)


def test_hamiltonian_vanishes_at_equilibrium():
    sched = CycleSchedule(semi_period=10, ergodic_end=6)
    u = np.linspace(-1, 1, 30)
    p = np.linspace(0.5, 2.0, 30)
    beta = np.full(30, 0.3)
    assert hamiltonian_value(u, p, 10, sched, beta) == 0.0
    assert hamiltonian_value(u, p, 0, sched, beta) == pytest.approx(
        float(np.dot(beta, p)))
    # callable drift field and shape checking
    assert hamiltonian_value(u, p, 0, sched, lambda x: 0.0 * x) == 0.0
    with pytest.raises(DimensionMismatch):
        hamiltonian_value(u, p[:10], 0, sched, beta)


# -------------------------------------------------------------------- stepping

def _spread(ens):
    # mean distance to the owning particle's barycenter, which the
    # contractive map rescales exactly
    total = 0.0
    for idx in (ens.idx_a, ens.idx_b):
        rel = ens.position[idx] - ens.position[idx].mean(0)
        total += float(np.sqrt((rel ** 2).sum(1)).sum())
    return total / ens.n


def test_ergodic_step_bounds(small_config):
    cfg = small_config.with_(randers_drift=(0.2, 0.0, 0.0))
    ens = Ensemble.initial(cfg)
    stream = rng_stream(cfg.seed, 0)
    for _ in range(50):
        prev = ens.position.copy()
        ens = step_ergodic(ens, stream, cfg)
        move = np.sqrt(((ens.position - prev) ** 2).sum(1))
        assert np.all(move <= cfg.lattice_spacing + 1e-12)
        speeds = np.sqrt((ens.velocity ** 2).sum(1))
        assert np.all(speeds <= 1.0 + 1e-12)
        assert np.all(np.abs(ens.position) <= cfg.spatial_extent)
    assert ens.t_step == 50


def test_ergodic_drift_bias(small_config):
    cfg = small_config.with_(n_a=2000, n_b=2000,
                             randers_drift=(0.3, 0.0, 0.0), turn_prob=1.0,
                             spatial_extent=1e6)
    ens = Ensemble.initial(cfg)
    ens = step_ergodic(ens, rng_stream(cfg.seed, 0), cfg)
    mean_v = ens.velocity.mean(axis=0)
    assert abs(mean_v[0] - 0.3) < 0.02
    assert abs(mean_v[1]) < 0.02 and abs(mean_v[2]) < 0.02


def test_contractive_step_is_lipschitz(small_config):
    sched = CycleSchedule(semi_period=10, ergodic_end=6, contraction_rate=0.2)
    ens = Ensemble.initial(small_config)
    ens.position[:] = rng_stream(1, 1).uniform(-5, 5, ens.position.shape)
    ens.t_step = 9  # kappa close to 1
    out = step_contractive(ens, sched, small_config)
    # global per-particle scaling: all pairwise distances shrink
    for idx in (ens.idx_a, ens.idx_b):
        before = np.linalg.norm(ens.position[idx][:, None]
                                - ens.position[idx][None, :], axis=-1)
        after = np.linalg.norm(out.position[idx][:, None]
                               - out.position[idx][None, :], axis=-1)
        assert np.all(after <= before + 1e-12)
    move = np.sqrt(((out.position - ens.position) ** 2).sum(1))
    assert np.all(move <= small_config.lattice_spacing + 1e-12)


def test_contractive_matches_scale_product_oracle(small_config):
    # with no clamping the spread contracts by prod(1 - kappa(t) * gamma)
    cfg = small_config.with_(contraction_rate=0.01)
    sched = CycleSchedule.from_config(cfg)
    ens = Ensemble.initial(cfg)
    ens.position[:] = rng_stream(2, 2).uniform(-3, 3, ens.position.shape)
    ens.t_step = sched.ergodic_end
    expected = _spread(ens)
    for t in range(sched.ergodic_end, sched.semi_period):
        expected *= 1.0 - sched.kappa(t) * cfg.contraction_rate
        ens = step_contractive(ens, sched, cfg)
    assert _spread(ens) == pytest.approx(expected, rel=1e-9)


def test_expansive_step_bounds(small_config):
    sched = CycleSchedule(semi_period=10, ergodic_end=6, contraction_rate=0.3)
    ens = Ensemble.initial(small_config)
    ens.position[:] = rng_stream(3, 3).uniform(-2, 2, ens.position.shape)
    ens.t_step = 12
    stream = rng_stream(3, 4)
    for t in range(12, 20):
        prev = ens.position.copy()
        ens = step_expansive(ens, stream, sched, small_config)
        move = np.sqrt(((ens.position - prev) ** 2).sum(1))
        assert np.all(move <= 2 * small_config.lattice_spacing + 1e-12)
        assert np.all(np.abs(ens.position) <= small_config.spatial_extent)


# ---------------------------------------------------------------------- cycles

def test_run_cycle_clocks(small_config):
    ens = Ensemble.initial(small_config)
    sched = CycleSchedule.from_config(small_config)
    seen = {Phase.ERGODIC: 0, Phase.CONTRACTIVE: 0, Phase.EXPANSIVE: 0}

    def count(phase):
        def hook(e, t_step):
            seen[phase] += 1
        return hook

    hooks = CycleHooks(ergodic=count(Phase.ERGODIC),
                       contractive=count(Phase.CONTRACTIVE),
                       expansive=count(Phase.EXPANSIVE))
    out = run_cycle(ens, small_config, hooks=hooks)
    assert out.tau_tick == 1
    assert out.t_step == 0
    assert seen[Phase.ERGODIC] == sched.ergodic_end
    assert seen[Phase.CONTRACTIVE] == sched.semi_period - sched.ergodic_end
    assert seen[Phase.EXPANSIVE] == sched.semi_period
    with pytest.raises(ValueError):
        bad = out.copy()
        bad.t_step = 3
        run_cycle(bad, small_config)


def test_run_cycle_deterministic(small_config):
    a = run_cycle(Ensemble.initial(small_config), small_config)
    b = run_cycle(Ensemble.initial(small_config), small_config)
    assert np.array_equal(a.position, b.position)
    assert np.array_equal(a.velocity, b.velocity)


def test_hook_replacement_propagates(small_config):
    def tag(e, t_step):
        out = e.copy()
        out.thermalized[:] = True
        return out

    out = run_cycle(Ensemble.initial(small_config), small_config,
                    hooks=CycleHooks(ergodic=tag))
    assert out.thermalized.all()


# --------------------------------------------------------------- two-time view

def test_projection_keeps_cycle_end_only():
    hist = TwoTimeHistory()
    for tau in range(3):
        for t in range(5):
            hist.record(t, tau, (tau, t))
    series = project_two_time(hist)
    assert series == {0: (0, 4), 1: (1, 4), 2: (2, 4)}


def test_projection_order_independent():
    hist = TwoTimeHistory()
    hist.record(4, 1, "late")
    hist.record(0, 1, "early")
    hist.record(2, 0, "zero")
    assert project_two_time(hist) == {0: "zero", 1: "late"}
