"""Measurement experiments on emergent two-particle states.

The Monte-Carlo engine prepares one fresh ensemble per trial at a common
source, thermalizes it through the ergodic window of a fundamental
cycle, assembles the emergent 2x2 state, rotates it into the detector
settings and samples one outcome pair.  On top of that sit the CHSH
estimator, the detector-separation scan probing the finite correlation
range, the slow-clock instantaneity check, the no-signaling marginal
comparison (with a deliberately broken sampler as negative control) and
a best-fit local factorized model for comparison with the simulated
correlations.
"""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from . import kernels
from .config import SimConfig
from .dynamics import CycleHooks, CycleSchedule, run_cycle
from .emergence import (EmergentState, average_velocities, classify,
                        concurrence, make_thermalize_hook, satisfied_fraction)
from .model import Ensemble
from .rng import rng_stream

_BALANCED = 1.0 / math.sqrt(2.0)
_EPR_BATCH = 1024
_SF_THRESHOLD = 0.99


class DistanceExceedsBox(ValueError):
    pass


class ContractViolation(RuntimeError):
    """An invariant the model guarantees was observed broken."""


# ------------------------------------------------------------ correlation runs

@dataclass(frozen=True)
class CorrelationRecord:
    """Coincidence counts for one pair of detector settings.

    ``counts[i][j]`` holds the number of trials with observer-1 outcome
    index i and observer-2 outcome index j, where index 0 codes +1 and
    index 1 codes -1.
    """

    setting_1: float
    setting_2: float
    counts: tuple
    trials: int

    @property
    def e_value(self) -> float:
        c = self.counts
        return (c[0][0] + c[1][1] - c[0][1] - c[1][0]) / self.trials

    @property
    def sigma(self) -> float:
        e = self.e_value
        return math.sqrt(max(1.0 - e * e, 1.0 / self.trials) / self.trials)

    def marginal_1(self) -> float:
        """P(observer-1 outcome = +1)."""
        return (self.counts[0][0] + self.counts[0][1]) / self.trials

    def as_dict(self) -> dict:
        return {"setting_1": self.setting_1, "setting_2": self.setting_2,
                "counts": [list(r) for r in self.counts],
                "trials": self.trials, "e_value": self.e_value,
                "sigma": self.sigma}


def _rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def measurement_probabilities(state: EmergentState, setting_1: float,
                              setting_2: float) -> np.ndarray:
    """Joint outcome-channel probabilities (2, 2) after rotating each
    factor into its detector's basis."""
    rotated = _rotation(setting_1) @ state.amplitudes @ _rotation(setting_2).T
    probs = np.abs(rotated) ** 2
    return probs / probs.sum()


def _stream_base(tag: str, *parts) -> int:
    """Stable 31-bit stream id from a tag and numeric parameters
    (process-independent, unlike built-in string hashing)."""
    text = tag + ":" + ",".join(repr(round(float(p), 12)) for p in parts)
    return zlib.crc32(text.encode()) & 0x7FFFFFFF


def _batch_states(config: SimConfig, schedule: CycleSchedule, batch: int,
                  stream: np.random.Generator) -> np.ndarray:
    """Run `batch` independent trials through the ergodic window and
    return their emergent amplitude matrices, shape (batch, 2, 2).

    Every trial starts all molecules at the shared source point; the
    contractive and expansive windows act as a deterministic global
    rescaling that leaves channel weights, thermalization flags and hence
    the emergent state untouched, so the engine elides them.
    """
    n_a, n_b = config.n_a, config.n_b
    n = n_a + n_b
    pos = np.zeros((batch, n, 3))
    vel = np.zeros((batch, n, 3))
    therm = np.zeros((batch, n), dtype=bool)
    drift = np.asarray(config.randers_drift, dtype=float)
    flat_pos = pos.reshape(batch * n, 3)
    flat_vel = vel.reshape(batch * n, 3)
    for _ in range(schedule.ergodic_end):
        turn_u = stream.random(batch * n)
        gauss = stream.standard_normal((batch * n, 3))
        rad_u = stream.random(batch * n)
        kernels.ergodic_update(flat_pos, flat_vel, turn_u, gauss, rad_u,
                               drift, config.turn_prob,
                               config.lattice_spacing, config.spatial_extent)
        if config.thermalize:
            active = ~therm.all(axis=1)
            hits = kernels.batch_cross_hits(pos, n_a,
                                            config.coincidence_radius, active)
            therm |= hits

    cnt_a = therm[:, :n_a].sum(axis=1).astype(float)
    cnt_b = therm[:, n_a:].sum(axis=1).astype(float)
    s_a = 0.5 * cnt_a / math.sqrt(n_a)
    s_b = 0.5 * cnt_b / math.sqrt(n_b)
    g_a = _BALANCED * (n_a - cnt_a) / math.sqrt(n_a)
    g_b = _BALANCED * (n_b - cnt_b) / math.sqrt(n_b)
    bell = np.exp(1j * config.bell_phase)
    psi = np.empty((batch, 2, 2), dtype=complex)
    psi[:, 0, 0] = g_a * g_b
    psi[:, 0, 1] = s_a * s_b + g_a * g_b
    psi[:, 1, 0] = bell * (s_a * s_b) + bell * (g_a * g_b)
    psi[:, 1, 1] = bell * (g_a * g_b)
    norms = np.sqrt((np.abs(psi) ** 2).sum(axis=(1, 2)))
    if np.any(norms == 0):
        raise ContractViolation("zero-amplitude emergent state in batch")
    return psi / norms[:, None, None]


def run_epr(config: SimConfig, setting_1: float, setting_2: float,
            broken_sampler: bool = False) -> CorrelationRecord:
    """Repeat the source-and-measure experiment config.trials times.

    Each trial prepares a fresh ensemble at the source, runs the ergodic
    window with coincidence thermalization (skipped when
    config.thermalize is off, which leaves the balanced product state as
    a classical control), rotates the emergent amplitudes into the
    detector settings and samples a single (+1/-1, +1/-1) outcome pair.

    ``broken_sampler`` substitutes a faulty observer-1 sampler whose
    outcome frequency tracks the *remote* setting -- the negative control
    for the no-signaling test.
    """
    schedule = CycleSchedule.from_config(config)
    base = _stream_base("epr", setting_1, setting_2,
                        1.0 if config.thermalize else 0.0,
                        1.0 if broken_sampler else 0.0)
    r1 = _rotation(setting_1)
    r2 = _rotation(setting_2)
    counts = np.zeros((2, 2), dtype=np.int64)
    done = 0
    batch_index = 0
    while done < config.trials:
        batch = min(_EPR_BATCH, config.trials - done)
        stream = rng_stream(config.seed, (base << 20) + batch_index)
        psi = _batch_states(config, schedule, batch, stream)
        rotated = np.einsum("ij,bjk,lk->bil", r1, psi, r2)
        probs = (np.abs(rotated) ** 2).reshape(batch, 4)
        probs /= probs.sum(axis=1, keepdims=True)
        cdf = probs.cumsum(axis=1)
        u = stream.random(batch)
        cell = (u[:, None] >= cdf).sum(axis=1)
        out1 = cell >> 1
        out2 = cell & 1
        if broken_sampler:
            p_plus = math.cos(setting_2) ** 2
            out1 = (stream.random(batch) >= p_plus).astype(np.int64)
        np.add.at(counts, (out1, out2), 1)
        done += batch
        batch_index += 1
    return CorrelationRecord(setting_1, setting_2,
                             tuple(tuple(int(v) for v in row) for row in counts),
                             config.trials)


# ----------------------------------------------------------------------- CHSH

@dataclass(frozen=True)
class ChshResult:
    angles: tuple
    records: tuple
    s_value: float
    sigma: float

    def as_dict(self) -> dict:
        return {"angles": list(self.angles), "s_value": self.s_value,
                "sigma": self.sigma,
                "records": [r.as_dict() for r in self.records]}


def chsh(config: SimConfig, angles) -> ChshResult:
    """CHSH statistic S = E(a,b) - E(a,b') + E(a',b) + E(a',b') from four
    correlation runs; angles are (a, a_prime, b, b_prime)."""
    angles = tuple(float(x) for x in angles)
    if len(angles) != 4:
        raise ValueError("chsh needs exactly four angles (a, a', b, b')")
    a, ap, b, bp = angles
    records = tuple(run_epr(config, s1, s2)
                    for s1, s2 in ((a, b), (a, bp), (ap, b), (ap, bp)))
    e = [r.e_value for r in records]
    s = abs(e[0] - e[1] + e[2] + e[3])
    sigma = math.sqrt(sum(r.sigma ** 2 for r in records))
    return ChshResult(angles, records, s, sigma)


# ------------------------------------------------------------- distance scan

@dataclass(frozen=True)
class RangeScan:
    distances: tuple
    concurrences: tuple
    satisfied_fractions: tuple
    classifications: tuple
    d_cor_bound: float

    def as_dict(self) -> dict:
        return {"distances": list(self.distances),
                "concurrences": list(self.concurrences),
                "satisfied_fractions": list(self.satisfied_fractions),
                "classifications": list(self.classifications),
                "d_cor_bound": self.d_cor_bound}


def correlation_range_bound(config: SimConfig) -> float:
    """d_cor <= c * T: molecules move at most one spacing per t-step, so
    no correlation forms beyond the distance light covers in T steps."""
    return CycleSchedule.from_config(config).semi_period * config.lattice_spacing


def _separated_config(config: SimConfig, distance: float) -> SimConfig:
    half = distance / 2.0
    if half + config.coincidence_radius > config.spatial_extent:
        raise DistanceExceedsBox(
            f"separation {distance} does not fit the simulation box")
    return config.with_(detector_1_pos=(-half, 0.0, 0.0),
                        detector_2_pos=(half, 0.0, 0.0))


def _run_separated(config: SimConfig, cycles: int):
    """Ensemble after `cycles` full cycles with clouds seeded at the two
    detector sites; yields the ensemble after every cycle."""
    hooks = CycleHooks(ergodic=make_thermalize_hook(config)
                       if config.thermalize else None)
    schedule = CycleSchedule.from_config(config)
    ens = Ensemble.initial(config, center_a=config.detector_1_pos,
                           center_b=config.detector_2_pos)
    for tick in range(cycles):
        stream = rng_stream(config.seed, 1 + tick)
        ens = run_cycle(ens, config, hooks=hooks, stream=stream,
                        schedule=schedule)
        yield ens


def scan_distance(config: SimConfig, distances) -> RangeScan:
    """Emergent entanglement as a function of detector separation.

    For each separation the particle clouds start at the two detector
    sites and evolve for config.tau_ticks cycles; the report carries the
    concurrence, the satisfied constraint fraction and the state class,
    plus the hard correlation-range bound c*T for reference.
    """
    distances = tuple(float(d) for d in distances)
    if not distances:
        raise ValueError("need at least one distance")
    concs, fracs, labels = [], [], []
    for d in distances:
        cfg = _separated_config(config, d)
        ens = None
        for ens in _run_separated(cfg, cfg.tau_ticks):
            pass
        state = average_velocities(ens)
        concs.append(concurrence(state))
        fracs.append(satisfied_fraction(ens))
        labels.append(classify(state).label)
    return RangeScan(distances, tuple(concs), tuple(fracs), tuple(labels),
                     correlation_range_bound(config))


# ------------------------------------------------------------- instantaneity

@dataclass(frozen=True)
class InstantaneityRecord:
    distance: float
    latency: int  # slow-clock ticks until the constraints saturate; 0 = never

    def as_dict(self) -> dict:
        return {"distance": self.distance, "latency": self.latency}


def instantaneity_check(config: SimConfig, distances) -> tuple:
    """Slow-clock latency of constraint formation per separation.

    On the tau clock the whole ergodic window of a cycle is a single
    tick, so any separation the exploration actually bridges must show
    the satisfied fraction jumping above 0.99 with latency exactly one.
    Separations must stay below half the correlation range so the bridge
    is geometrically possible within one window.
    """
    bound = correlation_range_bound(config)
    records = []
    for d in (float(x) for x in distances):
        if d > 0.5 * bound:
            raise ValueError(
                f"distance {d} exceeds half the correlation range {bound}")
        cfg = _separated_config(config, d)
        latency = 0
        for tick, ens in enumerate(_run_separated(cfg, cfg.tau_ticks), start=1):
            if satisfied_fraction(ens) >= _SF_THRESHOLD:
                latency = tick
                break
        records.append(InstantaneityRecord(d, latency))
    return tuple(records)


# --------------------------------------------------------------- no-signaling

@dataclass(frozen=True)
class NoSignalingReport:
    setting_1: float
    settings_2: tuple
    marginals: tuple
    delta_p: float
    sigma: float
    passed: bool

    def as_dict(self) -> dict:
        return {"setting_1": self.setting_1,
                "settings_2": list(self.settings_2),
                "marginals": list(self.marginals),
                "delta_p": self.delta_p, "sigma": self.sigma,
                "passed": self.passed}


def no_signaling_test(config: SimConfig, setting_1: float, settings_2,
                      broken_sampler: bool = False) -> NoSignalingReport:
    """Compare observer-1's outcome marginal across two remote settings.

    The marginal difference must stay within 3 sigma of zero; running
    with the broken sampler (whose local outcome rate leaks the remote
    setting) must trip the bound, validating the test's power.
    """
    settings_2 = tuple(float(x) for x in settings_2)
    if len(settings_2) != 2:
        raise ValueError("no_signaling_test needs exactly two remote settings")
    records = [run_epr(config, setting_1, s2, broken_sampler=broken_sampler)
               for s2 in settings_2]
    p = [r.marginal_1() for r in records]
    pbar = 0.5 * (p[0] + p[1])
    var = max(pbar * (1.0 - pbar), 1.0 / config.trials)
    sigma = math.sqrt(2.0 * var / config.trials)
    delta = abs(p[0] - p[1])
    return NoSignalingReport(setting_1, settings_2, tuple(p), delta, sigma,
                             delta <= 3.0 * sigma)


# --------------------------------------------------- local factorized models

@dataclass(frozen=True)
class FactorizationReport:
    angles: tuple
    simulated_e: tuple
    model_e: tuple
    fit_error: float
    s_simulated: float
    s_model: float

    def as_dict(self) -> dict:
        return {"angles": list(self.angles),
                "simulated_e": list(self.simulated_e),
                "model_e": list(self.model_e),
                "fit_error": self.fit_error,
                "s_simulated": self.s_simulated,
                "s_model": self.s_model}


def _chsh_of(e) -> float:
    return abs(e[0] - e[1] + e[2] + e[3])


def bell_factorization_compare(config: SimConfig, angles,
                               lambda_grid: int = 256) -> FactorizationReport:
    """Best factorized model P(a,b) = sum_lambda w(lambda) A(a) B(b)
    versus the simulated correlations.

    Any such model is a mixture of the 16 deterministic strategy pairs,
    so the optimal max-residual fit is a linear program over that
    simplex; the mixture is then snapped onto a uniform lambda grid of
    the requested size.  The model CHSH value can never exceed 2, so the
    fit error stays macroscopic whenever the simulation violates the
    bound.
    """
    if lambda_grid < 16:
        raise ValueError("lambda_grid must be at least 16")
    result = chsh(config, angles)
    e_sim = np.array([r.e_value for r in result.records])
    # strategy s = (A(a), A(a'), B(b), B(b')) over {+1, -1}^4
    signs = np.array([1.0, -1.0])
    strategies = np.array([(aa, aap, bb, bbp)
                           for aa in signs for aap in signs
                           for bb in signs for bbp in signs])
    # rows follow the record order (a,b), (a,b'), (a',b), (a',b')
    m = np.stack([strategies[:, 0] * strategies[:, 2],
                  strategies[:, 0] * strategies[:, 3],
                  strategies[:, 1] * strategies[:, 2],
                  strategies[:, 1] * strategies[:, 3]])
    n_s = strategies.shape[0]
    # variables: 16 weights + slack t; minimize t s.t. |M w - e| <= t
    c = np.zeros(n_s + 1)
    c[-1] = 1.0
    a_ub = np.block([[m, -np.ones((4, 1))], [-m, -np.ones((4, 1))]])
    b_ub = np.concatenate([e_sim, -e_sim])
    a_eq = np.zeros((1, n_s + 1))
    a_eq[0, :n_s] = 1.0
    lp = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0],
                 bounds=[(0, None)] * n_s + [(0, None)], method="highs")
    if not lp.success:
        raise RuntimeError(f"factorization fit failed: {lp.message}")
    w = np.maximum(lp.x[:n_s], 0.0)
    w /= w.sum()
    # snap the mixture onto the lambda grid: integer occupation counts
    scaled = w * lambda_grid
    base = np.floor(scaled).astype(int)
    short = lambda_grid - base.sum()
    order = np.argsort(scaled - base)[::-1]
    base[order[:short]] += 1
    wq = base / lambda_grid
    e_model = m @ wq
    fit_error = float(np.max(np.abs(e_model - e_sim)))
    return FactorizationReport(tuple(float(x) for x in angles),
                               tuple(float(x) for x in e_sim),
                               tuple(float(x) for x in e_model),
                               fit_error, _chsh_of(e_sim),
                               float(_chsh_of(e_model)))


# -------------------------------------------------------------- tabular output

def correlation_csv(records) -> str:
    lines = ["a,b,E,sigma,trials"]
    for r in records:
        lines.append(f"{r.setting_1!r},{r.setting_2!r},{r.e_value!r},"
                     f"{r.sigma!r},{r.trials}")
    return "\n".join(lines) + "\n"


def scan_csv(scan: RangeScan) -> str:
    lines = ["distance,concurrence,satisfied_fraction"]
    for d, c, f in zip(scan.distances, scan.concurrences,
                       scan.satisfied_fractions):
        lines.append(f"{d!r},{c!r},{f!r}")
    return "\n".join(lines) + "\n"
