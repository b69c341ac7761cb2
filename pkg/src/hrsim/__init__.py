"""Two-clock sub-quantum ensemble simulator.

Cyclic ergodic/contractive/expansive dynamics over molecule ensembles,
velocity-averaged emergent two-qubit states with a determinant
entanglement constraint, EPR/CHSH measurement experiments with a finite
correlation range, and concentration-of-measure demonstrations.
"""
from .backend import active_backend
from .concentration import (AllZeroProbabilities, ConcentrationReport,
                            SingleDim, SpreadReport,
                            collapse_concentration_demo, concentration_scan,
                            deviation_probability, hoeffding_bound,
                            lipschitz_constant_estimate)
from .config import (ConfigError, InvalidValue, MissingKey, SimConfig,
                     parse_config, serialize_config)
from .dynamics import (CycleHooks, CycleSchedule, OutOfRange, TwoTimeHistory,
                       hamiltonian_value, kappa, project_two_time, run_cycle,
                       semi_period, semi_period_real, step_contractive,
                       step_ergodic, step_expansive)
from .emergence import (BELL_STATES, CONSTRAINT_TOL, Classification,
                        CommutatorReport, ConstraintReport, EmergentState,
                        StateKind, average_velocities, bell_fidelity,
                        check_commutators, classify, concurrence,
                        constraint_report, entanglement_residual,
                        make_thermalize_hook, repartition, residual_matrix,
                        satisfied_fraction, thermalize_pairs)
from .experiments import (ChshResult, ContractViolation, CorrelationRecord,
                          DistanceExceedsBox, FactorizationReport,
                          InstantaneityRecord, NoSignalingReport, RangeScan,
                          bell_factorization_compare, chsh,
                          correlation_range_bound, instantaneity_check,
                          no_signaling_test, run_epr, scan_distance)
from .model import (Ensemble, InvalidMolecule, Molecule, Particle,
                    PartitionMap, Phase)
from .rng import rng_stream

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
