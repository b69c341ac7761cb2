import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hrsim import (BELL_STATES, EmergentState, Ensemble, Molecule, Particle,
                   average_velocities, bell_fidelity, check_commutators,
                   classify, concurrence, constraint_report,
                   entanglement_residual, repartition, residual_matrix,
                   rng_stream, run_cycle, satisfied_fraction,
                   thermalize_pairs)
from hrsim.dynamics import CycleHooks
from hrsim.emergence import (GridTooSmall, NotNormalized, SameParticle,
                             make_thermalize_hook)

POS = (0.0, 0.0, 0.0, 0.0)
V0 = (0.0, 0.0, 0.0)


def _mol(particle, weights, phases, index=0):
    return Molecule(index, particle, POS, V0, weights, phases)


# ------------------------------------------------------------------- residuals

def test_residual_complementary_classical_is_zero():
    a = Molecule.classical_molecule(0, Particle.A, POS, V0, channel=1)
    b = Molecule.classical_molecule(0, Particle.B, POS, V0, channel=2)
    assert entanglement_residual(a, b) == 0.0


def test_residual_same_channel_is_one():
    a = Molecule.classical_molecule(0, Particle.A, POS, V0, channel=1,
                                    weight=2.0)
    b = Molecule.classical_molecule(0, Particle.B, POS, V0, channel=1,
                                    weight=0.5)
    assert entanglement_residual(a, b) == pytest.approx(1.0)


def test_residual_same_particle_raises():
    a = _mol(Particle.A, (1.0, 0.0), (0.0, 0.0))
    with pytest.raises(SameParticle):
        entanglement_residual(a, a)


@settings(max_examples=50, deadline=None)
@given(w=st.lists(st.floats(0.01, 2.0), min_size=4, max_size=4),
       p=st.lists(st.floats(-math.pi, math.pi), min_size=4, max_size=4))
def test_residual_matches_determinant_oracle(w, p):
    a = _mol(Particle.A, (w[0], w[1]), (p[0], p[1]))
    b = _mol(Particle.B, (w[2], w[3]), (p[2], p[3]))
    det = (w[0] * w[2] * cmath.exp(1j * (p[0] + p[2]))
           + w[1] * w[3] * cmath.exp(1j * (p[1] + p[3])))
    norm = math.hypot(w[0], w[1]) * math.hypot(w[2], w[3])
    assert entanglement_residual(a, b) == pytest.approx(abs(det) / norm)


def test_residual_matrix_matches_pairwise(small_config):
    ens = Ensemble.initial(small_config)
    ens.weights[:] = rng_stream(5, 0).uniform(0.1, 1.0, ens.weights.shape)
    ens.phases[:] = rng_stream(5, 1).uniform(-3, 3, ens.phases.shape)
    mat = residual_matrix(ens)
    ia, ib = ens.idx_a, ens.idx_b
    for i in (0, 3, 7):
        for j in (1, 4, 15):
            expected = entanglement_residual(ens.molecule(ia[i]),
                                             ens.molecule(ib[j]))
            assert mat[i, j] == pytest.approx(expected)


def test_satisfied_fraction_blocked_matches_matrix(small_config):
    ens = Ensemble.initial(small_config.with_(n_a=600, n_b=40))
    therm = rng_stream(6, 0).random(ens.n) < 0.5
    ens.thermalized[:] = therm
    from hrsim.emergence import _apply_collective_channels
    _apply_collective_channels(ens, small_config)
    mat = residual_matrix(ens)
    assert satisfied_fraction(ens) == pytest.approx((mat < 1e-9).mean())


# -------------------------------------------------------------- thermalization

def test_thermalize_flags_only_coincident(small_config):
    ens = Ensemble.initial(small_config, center_a=(-4, 0, 0),
                           center_b=(4, 0, 0))
    # move one a-molecule next to one b-molecule
    ens.position[0] = (4.0, 0.5, 0.0)
    out = thermalize_pairs(ens, small_config)
    assert bool(out.thermalized[0])
    assert bool(out.thermalized[small_config.n_a])  # its b-partner
    assert out.thermalized.sum() == 1 + small_config.n_b
    # b-molecules sit within one coincidence radius of each other, so the
    # constraint spreads through that whole cloud but not to distant a's
    assert not out.thermalized[1:small_config.n_a].any()
    assert out.orientation == 1
    assert not ens.thermalized.any()  # input untouched


def test_thermalized_pairs_have_zero_residual(small_config):
    ens = Ensemble.initial(small_config)  # everyone at the source
    out = thermalize_pairs(ens, small_config)
    assert out.thermalized.all()
    assert satisfied_fraction(out) == 1.0
    rep = constraint_report(out)
    assert all(r < 1e-12 for r in rep.residuals.values())
    assert len(rep.residuals) == small_config.n_a * small_config.n_b


def test_satisfied_fraction_is_product_of_fractions(small_config):
    ens = Ensemble.initial(small_config)
    out = thermalize_pairs(ens, small_config)
    # un-thermalize part of each cloud by hand: the fraction factorizes
    out.thermalized[:8] = False
    out.weights[:8] = 1 / math.sqrt(2)
    out.phases[:8] = 0.0
    f_a = 8 / 16
    assert satisfied_fraction(out) == pytest.approx(f_a * 1.0)


def test_orientation_alternates_but_state_is_stable(small_config):
    ens = Ensemble.initial(small_config)
    one = thermalize_pairs(ens, small_config)
    two = thermalize_pairs(one, small_config)
    assert one.orientation != two.orientation
    # instantaneous channels flip, the cone-averaged state does not
    assert not np.array_equal(one.weights, two.weights)
    s1 = average_velocities(one)
    s2 = average_velocities(two)
    assert np.allclose(s1.amplitudes, s2.amplitudes)


def test_thermalize_requires_ergodic_phase(small_config):
    from hrsim.model import Phase
    ens = Ensemble.initial(small_config)
    ens.phase = Phase.CONTRACTIVE
    with pytest.raises(ValueError):
        thermalize_pairs(ens, small_config)


# ------------------------------------------------------------ emergent states

def test_emergent_state_normalization_contract():
    with pytest.raises(NotNormalized):
        EmergentState(np.ones((2, 2), dtype=complex))
    st_ok = EmergentState.from_unnormalized(np.ones((2, 2)))
    assert st_ok.norm2() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        EmergentState.from_unnormalized(np.zeros((2, 2)))


def test_json_schema():
    st_ = EmergentState(BELL_STATES["singlet"])
    d = st_.to_json_dict()
    assert set(d) == {"amps", "concurrence", "class"}
    assert len(d["amps"]) == 4
    assert all(len(pair) == 2 for pair in d["amps"])
    assert d["concurrence"] == pytest.approx(1.0)
    assert d["class"] == "singlet"


def test_fresh_ensemble_averages_to_balanced_product(small_config):
    ens = Ensemble.initial(small_config)
    state = average_velocities(ens)
    assert np.allclose(state.amplitudes, 0.5)
    assert concurrence(state) == pytest.approx(0.0, abs=1e-12)
    assert classify(state).label == "product"


def test_thermalized_ensemble_averages_to_singlet(small_config):
    out = thermalize_pairs(Ensemble.initial(small_config), small_config)
    state = average_velocities(out)
    assert bell_fidelity(state, "singlet") == pytest.approx(1.0)
    assert concurrence(state) == pytest.approx(1.0)
    assert classify(state).label == "singlet"


def test_bell_phase_selects_the_state(small_config):
    cfg = small_config.with_(bell_phase=0.0)
    out = thermalize_pairs(Ensemble.initial(cfg), cfg)
    state = average_velocities(out)
    assert classify(state).label == "psi_plus"


def test_empty_particle_raises(small_config):
    ens = Ensemble.initial(small_config)
    ens.particle[:] = 0  # no b-molecules left
    from hrsim.emergence import EmptyParticle
    with pytest.raises(EmptyParticle):
        average_velocities(ens)


def test_concurrence_matches_svd_oracle():
    rng = rng_stream(9, 9)
    for _ in range(20):
        amps = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        state = EmergentState.from_unnormalized(amps)
        s = np.linalg.svd(state.amplitudes, compute_uv=False)
        assert concurrence(state) == pytest.approx(2.0 * s[0] * s[1])


def test_classify_all_bell_states():
    for name, amps in BELL_STATES.items():
        assert classify(EmergentState(amps)).label == name
    tilted = EmergentState.from_unnormalized([[1.0, 0.0], [0.0, 0.5]])
    assert classify(tilted).label == "entangled_other"


# ---------------------------------------------------------------- repartition

def test_repartition_deterministic_in_settings(small_config):
    ens = Ensemble.initial(small_config, center_a=small_config.detector_1_pos,
                           center_b=small_config.detector_2_pos)
    a = repartition(ens, small_config, (0.3, 1.1))
    b = repartition(ens, small_config, (0.3, 1.1))
    c = repartition(ens, small_config, (0.9, 1.1))
    assert np.array_equal(a.partition, b.partition)
    assert not np.array_equal(a.partition, c.partition)
    assert set(np.unique(a.partition)) <= {1, 2}


def test_repartition_ignores_molecules_outside_regions(small_config):
    ens = Ensemble.initial(small_config, center_a=(0.0, 20.0, 0.0),
                          center_b=(0.0, -20.0, 0.0))
    out = repartition(ens, small_config, (0.3, 1.1))
    assert np.array_equal(out.partition, ens.partition)


# ------------------------------------------------------------ operator algebra

def test_commutators_vanish_and_canonical_converges():
    rep = check_commutators(101, 0.1)
    assert rep.position_position <= 1e-12
    assert rep.momentum_momentum <= 1e-12
    assert rep.position_cross_momentum <= 1e-12
    assert rep.canonical_residual_fine < rep.canonical_residual_coarse
    assert rep.convergence_order >= 1.9


def test_commutator_grid_too_small():
    with pytest.raises(GridTooSmall):
        check_commutators(4, 0.1)


# ----------------------------------------------------- cycle-level integration

def test_cycle_with_thermalization_hook(small_config):
    ens = Ensemble.initial(small_config)
    hooks = CycleHooks(ergodic=make_thermalize_hook(small_config))
    out = run_cycle(ens, small_config, hooks=hooks)
    assert out.thermalized.all()
    assert satisfied_fraction(out) == 1.0
    assert classify(average_velocities(out)).label == "singlet"
