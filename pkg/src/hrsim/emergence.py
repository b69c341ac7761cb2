"""Emergent quantum states from the sub-quantum ensemble.

Velocity averaging turns channel weights into a 2x2 amplitude matrix
over (particle-a channel, particle-b channel).  Coincidence interactions
during the ergodic window drive cross-particle pairs into complementary
classical channels tied to a collective orientation that alternates step
by step; the velocity-cone average of such a molecule is exactly
balanced, so a fully thermalized ensemble averages to a Bell state while
an undisturbed ensemble averages to the balanced product state.
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .config import SimConfig
from .model import Ensemble, Molecule, Phase
from .rng import rng_stream

CONSTRAINT_TOL = 1e-9

_BALANCED = 1.0 / math.sqrt(2.0)


class SameParticle(ValueError):
    pass


class EmptyParticle(ValueError):
    pass


class NotNormalized(ValueError):
    pass


class GridTooSmall(ValueError):
    pass


# ------------------------------------------------------------------ residuals

def entanglement_residual(mol_k: Molecule, mol_l: Molecule) -> float:
    """Absolute value of the pair's 2x2 channel determinant, normalized
    by the product of the molecules' weight norms.

    Vanishes exactly when the two determinant terms cancel; for classical
    molecules that happens iff their channels are complementary.
    """
    if mol_k.particle == mol_l.particle:
        raise SameParticle("both molecules belong to the same particle")
    n1k, n2k = mol_k.channel_weights
    p1k, p2k = mol_k.channel_phases
    n1l, n2l = mol_l.channel_weights
    p1l, p2l = mol_l.channel_phases
    det = n1k * n1l * cmath.exp(1j * (p1k + p1l)) \
        + n2k * n2l * cmath.exp(1j * (p2k + p2l))
    norm = math.hypot(n1k, n2k) * math.hypot(n1l, n2l)
    return abs(det) / norm


@dataclass(frozen=True)
class ConstraintReport:
    """Cross-particle residual summary."""

    residuals: dict
    satisfied_fraction: float


def residual_matrix(ensemble: Ensemble) -> np.ndarray:
    """(n_a, n_b) matrix of pair residuals, rows indexed by a-molecules."""
    ia, ib = ensemble.idx_a, ensemble.idx_b
    return kernels.residual_matrix(ensemble.weights[ia], ensemble.phases[ia],
                                   ensemble.weights[ib], ensemble.phases[ib])


def satisfied_fraction(ensemble: Ensemble, tol: float = CONSTRAINT_TOL) -> float:
    """Fraction of cross-particle pairs with residual below tol,
    computed in row blocks to keep the pair matrix out of memory."""
    ia, ib = ensemble.idx_a, ensemble.idx_b
    wb, pb = ensemble.weights[ib], ensemble.phases[ib]
    good = 0
    block = 512
    for lo in range(0, ia.size, block):
        rows = ia[lo:lo + block]
        mat = kernels.residual_matrix(ensemble.weights[rows],
                                      ensemble.phases[rows], wb, pb)
        good += int((mat < tol).sum())
    return good / (ia.size * ib.size)


def constraint_report(ensemble: Ensemble, tol: float = CONSTRAINT_TOL,
                      keep_residuals: bool = True) -> ConstraintReport:
    mat = residual_matrix(ensemble)
    residuals = {}
    if keep_residuals:
        ia, ib = ensemble.idx_a, ensemble.idx_b
        for i, k in enumerate(ia):
            for j, l in enumerate(ib):
                residuals[(int(k), int(l))] = float(mat[i, j])
    return ConstraintReport(residuals, float((mat < tol).mean()))


# -------------------------------------------------------------- thermalization

def thermalize_pairs(ensemble: Ensemble, config: SimConfig,
                     stream: np.random.Generator | None = None) -> Ensemble:
    """Interact every cross-particle pair currently in spacetime
    coincidence and re-draw the pair into a complementary configuration.

    Molecules hit this step join the thermalized pool: their classical
    channel tracks the collective orientation (a-molecules take the
    orientation channel, b-molecules its complement, so every thermalized
    cross pair has zero residual), their phases take the shared
    per-particle values whose sum selects the Bell sign, and their
    velocity-cone average becomes exactly balanced.  The orientation bit
    alternates on every call, which realizes the cone-filling channel
    flips that the averaging relies on.  Untouched molecules keep their
    prior assignments.
    """
    if ensemble.phase is not Phase.ERGODIC:
        raise ValueError("thermalize_pairs requires the ergodic phase")
    ens = ensemble.copy()
    ia, ib = ens.idx_a, ens.idx_b
    hit_a, hit_b = kernels.cross_hits(ens.position[ia], ens.position[ib],
                                      config.coincidence_radius)
    ens.thermalized[ia[hit_a]] = True
    ens.thermalized[ib[hit_b]] = True
    # the ergodic mixing also spreads an acquired constraint through a
    # particle's own cloud, one coincidence radius per step, so the
    # propagation speed stays finite
    for idx in (ia, ib):
        holders = idx[ens.thermalized[idx]]
        fresh = idx[~ens.thermalized[idx]]
        if holders.size and fresh.size:
            spread = kernels.near_hits(ens.position[fresh],
                                       ens.position[holders],
                                       config.coincidence_radius)
            ens.thermalized[fresh[spread]] = True
    ens.orientation ^= 1
    _apply_collective_channels(ens, config)
    return ens


def _apply_collective_channels(ens: Ensemble, config: SimConfig) -> None:
    """Rewrite thermalized molecules' instantaneous channels, shared
    phases and balanced cone averages in place."""
    therm = ens.thermalized
    if not therm.any():
        return
    is_a = ens.particle == 0
    # a-molecules occupy channel 1 when orientation == 0, else channel 2;
    # b-molecules always take the complement
    chan2 = np.where(is_a, ens.orientation, 1 - ens.orientation).astype(bool)
    sel = therm & ~chan2
    ens.weights[sel] = (1.0, 0.0)
    sel = therm & chan2
    ens.weights[sel] = (0.0, 1.0)
    ens.phases[therm, 0] = 0.0
    ens.phases[therm & is_a, 1] = config.bell_phase
    ens.phases[therm & ~is_a, 1] = 0.0
    ens.cone_weights[therm] = 0.5


def make_thermalize_hook(config: SimConfig):
    """Ergodic-phase hook for run_cycle."""
    def hook(ens: Ensemble, t_step: int) -> Ensemble:
        return thermalize_pairs(ens, config)
    return hook


# ------------------------------------------------------------ emergent states

@dataclass(frozen=True)
class EmergentState:
    """2x2 complex amplitude matrix psi[i][j] over channel pairs."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (2, 2):
            raise ValueError("amplitudes must be a 2x2 matrix")
        object.__setattr__(self, "amplitudes", amps)
        if abs(self.norm2() - 1.0) > 1e-12:
            raise NotNormalized(f"state norm^2 = {self.norm2()!r}")

    def norm2(self) -> float:
        return float((np.abs(self.amplitudes) ** 2).sum())

    @classmethod
    def from_unnormalized(cls, amps) -> "EmergentState":
        amps = np.asarray(amps, dtype=complex)
        norm = np.sqrt((np.abs(amps) ** 2).sum())
        if norm == 0:
            raise ValueError("cannot normalize a zero amplitude matrix")
        return cls(amps / norm)

    def to_json_dict(self) -> dict:
        amps = self.amplitudes
        return {
            "amps": [[float(amps[i, j].real), float(amps[i, j].imag)]
                     for i in (0, 1) for j in (0, 1)],
            "concurrence": concurrence(self),
            "class": classify(self).label,
        }


def average_velocities(ensemble: Ensemble) -> EmergentState:
    """Velocity-averaged quantum state of the two-particle system.

    Per particle and channel the amplitude is the cone-weighted sum of
    channel weight * phase factor over the particle's molecules.  The
    constraint-satisfying (thermalized) population contributes only the
    complementary cross terms psi[1][2], psi[2][1]; the unconstrained
    population contributes the plain product of its channel sums.
    """
    ia, ib = ensemble.idx_a, ensemble.idx_b
    if ia.size == 0 or ib.size == 0:
        raise EmptyParticle("need at least one molecule per particle")
    alpha_sat = np.zeros((2, 2), dtype=complex)   # [channel, particle]
    alpha_free = np.zeros((2, 2), dtype=complex)
    for p, idx in ((0, ia), (1, ib)):
        therm = ensemble.thermalized[idx]
        scale = 1.0 / math.sqrt(idx.size)
        cw = ensemble.cone_weights[idx] * np.exp(1j * ensemble.phases[idx])
        for c in (0, 1):
            alpha_sat[c, p] = scale * cw[therm, c].sum()
            alpha_free[c, p] = scale * cw[~therm, c].sum()
    psi = np.empty((2, 2), dtype=complex)
    for i in (0, 1):
        for j in (0, 1):
            cross = alpha_sat[i, 0] * alpha_sat[j, 1] if i != j else 0.0
            psi[i, j] = cross + alpha_free[i, 0] * alpha_free[j, 1]
    return EmergentState.from_unnormalized(psi)


def concurrence(state: EmergentState) -> float:
    """2 |psi11 psi22 - psi12 psi21|: 0 for products, 1 for Bell states."""
    if abs(state.norm2() - 1.0) > 1e-9:
        raise NotNormalized("state must be normalized")
    a = state.amplitudes
    return float(2.0 * abs(a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]))


_SQ2 = 1.0 / math.sqrt(2.0)

BELL_STATES = {
    "phi_plus": np.array([[_SQ2, 0.0], [0.0, _SQ2]], dtype=complex),
    "phi_minus": np.array([[_SQ2, 0.0], [0.0, -_SQ2]], dtype=complex),
    "psi_plus": np.array([[0.0, _SQ2], [_SQ2, 0.0]], dtype=complex),
    "singlet": np.array([[0.0, _SQ2], [-_SQ2, 0.0]], dtype=complex),
}


def bell_fidelity(state: EmergentState, which: str) -> float:
    target = BELL_STATES[which]
    return float(abs(np.vdot(target, state.amplitudes)) ** 2)


class StateKind(enum.Enum):
    PRODUCT = "product"
    BELL = "bell"
    ENTANGLED_OTHER = "entangled_other"


@dataclass(frozen=True)
class Classification:
    kind: StateKind
    bell: str | None = None

    @property
    def label(self) -> str:
        return self.bell if self.kind is StateKind.BELL else self.kind.value


def classify(state: EmergentState, tol: float = 1e-3) -> Classification:
    if concurrence(state) < tol:
        return Classification(StateKind.PRODUCT)
    for name in BELL_STATES:
        if bell_fidelity(state, name) > 1.0 - tol:
            return Classification(StateKind.BELL, name)
    return Classification(StateKind.ENTANGLED_OTHER)


# --------------------------------------------------------------- repartition

def repartition(ensemble: Ensemble, config: SimConfig, new_settings,
                stream: np.random.Generator | None = None) -> Ensemble:
    """Contextual re-draw of the detector partition for new settings.

    Only molecules currently inside a detector's coincidence region are
    up for relabeling, and the draw is a deterministic function of that
    detector's setting, so repeating the same settings reproduces the
    same partition.  Channel weights persist until molecules re-interact.
    """
    ens = ensemble.copy()
    detectors = (np.asarray(config.detector_1_pos),
                 np.asarray(config.detector_2_pos))
    for det_label, (setting, center) in enumerate(zip(new_settings, detectors),
                                                  start=1):
        d = np.sqrt(((ens.position - center) ** 2).sum(axis=1))
        region = d <= config.coincidence_radius
        idx = np.flatnonzero(region)
        if idx.size == 0:
            continue
        key = hash((round(float(setting), 12), det_label)) & ((1 << 63) - 1)
        draws = rng_stream(config.seed ^ key, det_label).random(ens.n)
        keep = draws[idx] < 0.5 + 0.5 * math.cos(2.0 * setting)
        ens.partition[idx] = np.where(keep, det_label, 3 - det_label)
    return ens


# ----------------------------------------------------------- operator algebra

@dataclass(frozen=True)
class CommutatorReport:
    position_position: float
    momentum_momentum: float
    position_cross_momentum: float
    canonical_residual_coarse: float
    canonical_residual_fine: float

    @property
    def convergence_order(self) -> float:
        return math.log2(self.canonical_residual_coarse
                         / self.canonical_residual_fine)


def _canonical_residual(n: int, spacing: float) -> float:
    """max |([x, p] - 1) v| on the interior for a Gaussian test vector,
    with x diagonal multiplication and p the central-difference shift."""
    x = spacing * (np.arange(n) - (n - 1) / 2.0)
    half_width = spacing * (n - 1) / 2.0
    sigma = half_width / 6.0
    v = np.exp(-x ** 2 / (2.0 * sigma ** 2))

    def p_op(f):
        out = np.zeros_like(f)
        out[1:-1] = -(f[2:] - f[:-2]) / (2.0 * spacing)
        return out

    comm = x * p_op(v) - p_op(x * v)
    return float(np.abs(comm[1:-1] - v[1:-1]).max())


def check_commutators(grid_size: int, spacing: float) -> CommutatorReport:
    """Verify the quantization algebra at discretization order.

    Coordinate operators are diagonal, momenta are central-difference
    generators on a grid.  Coordinate-coordinate and momentum-momentum
    commutators must vanish to rounding; the canonical commutator matches
    the identity to second order in the spacing.
    """
    if grid_size < 8:
        raise GridTooSmall("grid_size must be at least 8")
    n = grid_size
    x1 = spacing * (np.arange(n) - (n - 1) / 2.0)
    X, Y = np.meshgrid(x1, x1, indexing="ij")
    sigma = (spacing * (n - 1) / 2.0) / 6.0
    v = np.exp(-(X ** 2 + Y ** 2) / (2.0 * sigma ** 2))

    def px(f):
        out = np.zeros_like(f)
        out[1:-1, :] = -(f[2:, :] - f[:-2, :]) / (2.0 * spacing)
        return out

    def py(f):
        out = np.zeros_like(f)
        out[:, 1:-1] = -(f[:, 2:] - f[:, :-2]) / (2.0 * spacing)
        return out

    pos_pos = float(np.abs(X * (Y * v) - Y * (X * v)).max())
    mom_mom = float(np.abs(px(py(v)) - py(px(v))).max())
    cross = float(np.abs(X * py(v) - py(X * v)).max())
    coarse = _canonical_residual(n, spacing)
    fine = _canonical_residual(2 * n - 1, spacing / 2.0)
    return CommutatorReport(pos_pos, mom_mom, cross, coarse, fine)
