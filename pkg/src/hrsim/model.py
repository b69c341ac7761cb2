"""Shared domain types: molecules, ensembles, partitions.

The Ensemble stores the sub-quantum state as flat numpy arrays (one row
per molecule) so the stepping kernels can run over contiguous memory;
Molecule is the per-row value-type view used by the constraint and
emergence operations.

Channel-weight conventions
--------------------------
A molecule that has been drawn into the constraint-forming interactions
("thermalized") is classical: exactly one of its two channel weights is
nonzero at any instant.  Molecules that have not yet interacted carry the
balanced predecessor weights (1/sqrt2, 1/sqrt2) with a common phase,
which is the velocity-cone average of a classical degree of freedom that
has not been steered into either channel.  ``cone_weights`` holds the
velocity-cone averaged weights used when assembling emergent states; for
thermalized molecules it is exactly balanced, for fresh molecules it
coincides with the instantaneous weights.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .config import SimConfig

_BALANCED = 1.0 / math.sqrt(2.0)


class Particle(enum.Enum):
    A = 0
    B = 1


class Phase(enum.Enum):
    ERGODIC = "ergodic"
    CONTRACTIVE = "contractive"
    EXPANSIVE = "expansive"


class InvalidMolecule(ValueError):
    pass


@dataclass(frozen=True)
class Molecule:
    """One sub-quantum degree of freedom."""

    index: int
    particle: Particle
    position: tuple[float, float, float, float]  # (t-label, x1, x2, x3)
    velocity: tuple[float, float, float]
    channel_weights: tuple[float, float]
    channel_phases: tuple[float, float]

    def __post_init__(self):
        n1, n2 = self.channel_weights
        if n1 < 0 or n2 < 0:
            raise InvalidMolecule("channel weights must be nonnegative")
        if n1 == 0 and n2 == 0:
            raise InvalidMolecule("channel weights cannot both vanish")
        v = self.velocity
        if v[0] * v[0] + v[1] * v[1] + v[2] * v[2] > 1.0 + 1e-12:
            raise InvalidMolecule("speed bound violated: |velocity| > 1")

    @property
    def classical(self) -> bool:
        """True when exactly one channel weight is nonzero."""
        n1, n2 = self.channel_weights
        return (n1 == 0.0) != (n2 == 0.0)

    @classmethod
    def classical_molecule(cls, index, particle, position, velocity,
                           channel, weight=1.0, phase=0.0) -> "Molecule":
        """Classical constructor; rejects two-channel weight patterns."""
        if channel not in (1, 2):
            raise InvalidMolecule("channel must be 1 or 2")
        if weight <= 0:
            raise InvalidMolecule("classical weight must be positive")
        weights = (weight, 0.0) if channel == 1 else (0.0, weight)
        phases = (phase, 0.0) if channel == 1 else (0.0, phase)
        return cls(index, particle, position, velocity, weights, phases)


@dataclass(frozen=True)
class PartitionMap:
    """Contextual assignment of molecule index -> detector label {1, 2}."""

    assignment: tuple[int, ...]

    def __post_init__(self):
        if any(v not in (1, 2) for v in self.assignment):
            raise ValueError("partition labels must be 1 or 2")

    def label(self, index: int) -> int:
        return self.assignment[index]

    def __len__(self) -> int:
        return len(self.assignment)


@dataclass
class Ensemble:
    """Full sub-quantum state plus cycle phase and the two clocks.

    ``particle`` is 0 for A rows and 1 for B rows.  Positions are spatial;
    the t-label of every molecule is the shared fast-clock value
    ``t_step``.  Steps treat ensembles as values: they return modified
    copies and never mutate their input.
    """

    particle: np.ndarray        # (N,) uint8
    position: np.ndarray        # (N, 3) float64
    velocity: np.ndarray        # (N, 3) float64
    weights: np.ndarray         # (N, 2) float64, instantaneous channel weights
    phases: np.ndarray          # (N, 2) float64
    cone_weights: np.ndarray    # (N, 2) float64, velocity-cone averages
    thermalized: np.ndarray     # (N,) bool
    partition: np.ndarray       # (N,) uint8 detector labels in {1, 2}
    t_step: int = 0
    tau_tick: int = 0
    phase: Phase = Phase.ERGODIC
    orientation: int = 0        # collective channel orientation bit

    @property
    def n(self) -> int:
        return self.particle.shape[0]

    @property
    def idx_a(self) -> np.ndarray:
        return np.flatnonzero(self.particle == 0)

    @property
    def idx_b(self) -> np.ndarray:
        return np.flatnonzero(self.particle == 1)

    def copy(self) -> "Ensemble":
        return Ensemble(
            particle=self.particle.copy(), position=self.position.copy(),
            velocity=self.velocity.copy(), weights=self.weights.copy(),
            phases=self.phases.copy(), cone_weights=self.cone_weights.copy(),
            thermalized=self.thermalized.copy(), partition=self.partition.copy(),
            t_step=self.t_step, tau_tick=self.tau_tick, phase=self.phase,
            orientation=self.orientation,
        )

    def molecule(self, k: int) -> Molecule:
        return Molecule(
            index=k,
            particle=Particle(int(self.particle[k])),
            position=(float(self.t_step), *map(float, self.position[k])),
            velocity=tuple(map(float, self.velocity[k])),
            channel_weights=tuple(map(float, self.weights[k])),
            channel_phases=tuple(map(float, self.phases[k])),
        )

    def partition_map(self) -> PartitionMap:
        return PartitionMap(tuple(int(v) for v in self.partition))

    @classmethod
    def initial(cls, config: SimConfig, center_a=(0.0, 0.0, 0.0),
                center_b=(0.0, 0.0, 0.0)) -> "Ensemble":
        """Fresh ensemble: particle clouds at the given centers, at rest,
        balanced predecessor channel weights, partition by particle."""
        n = config.n_a + config.n_b
        particle = np.zeros(n, dtype=np.uint8)
        particle[config.n_a:] = 1
        position = np.empty((n, 3))
        position[:config.n_a] = np.asarray(center_a, dtype=float)
        position[config.n_a:] = np.asarray(center_b, dtype=float)
        ext = config.spatial_extent
        if np.any(np.abs(position) > ext):
            raise ValueError("initial centers outside the simulation box")
        return cls(
            particle=particle,
            position=position,
            velocity=np.zeros((n, 3)),
            weights=np.full((n, 2), _BALANCED),
            phases=np.zeros((n, 2)),
            cone_weights=np.full((n, 2), _BALANCED),
            thermalized=np.zeros(n, dtype=bool),
            partition=(particle + 1).astype(np.uint8),
        )

    @classmethod
    def from_molecules(cls, molecules, config: SimConfig | None = None) -> "Ensemble":
        """Build an ensemble from Molecule values (A rows first)."""
        mols = sorted(molecules, key=lambda m: (m.particle.value, m.index))
        n = len(mols)
        ens = cls(
            particle=np.array([m.particle.value for m in mols], dtype=np.uint8),
            position=np.array([m.position[1:] for m in mols], dtype=float),
            velocity=np.array([m.velocity for m in mols], dtype=float),
            weights=np.array([m.channel_weights for m in mols], dtype=float),
            phases=np.array([m.channel_phases for m in mols], dtype=float),
            cone_weights=np.array([m.channel_weights for m in mols], dtype=float),
            thermalized=np.array([m.classical for m in mols], dtype=bool),
            partition=np.array([m.particle.value + 1 for m in mols], dtype=np.uint8),
        )
        return ens
