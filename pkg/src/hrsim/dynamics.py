"""Fast-clock dynamics: semi-period law, cycle schedule, regime steps.

A fundamental cycle is 2T steps long: an ergodic window [0, t_e), a
contractive window [t_e, T) peaking at the equilibrium point t = T where
kappa = 1 and the Hamiltonian vanishes, and an expansive half [T, 2T)
whose kappa profile mirrors the contractive one.  Completing a cycle
advances the slow clock tau by one tick; projecting histories onto tau
discards all fast-clock detail.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .config import SimConfig
from .model import Ensemble, Phase
from .rng import rng_stream

_MAX_STEPS = 2 ** 62


class OutOfRange(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


def semi_period_real(mu: float, t_min_steps: int) -> float:
    """Real-valued semi-period t_min * e^mu.

    The exponential form makes the mass parameter additive under the
    multiplicative composition of semi-periods:
    T(mu1 + mu2) * t_min = T(mu1) * T(mu2).
    """
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    return t_min_steps * math.exp(mu)


def semi_period(mu: float, t_min_steps: int) -> int:
    """Semi-period in whole t-steps: round(t_min * e^mu), at least t_min."""
    t_real = semi_period_real(mu, t_min_steps)
    if t_real > _MAX_STEPS:
        raise OverflowError("semi-period exceeds representable step count")
    return max(t_min_steps, round(t_real))


def _smoothstep(s: float) -> float:
    return 3.0 * s * s - 2.0 * s * s * s


@dataclass(frozen=True)
class CycleSchedule:
    """Semi-period, ergodic window end and the kappa interpolation."""

    semi_period: int
    ergodic_end: int
    contraction_rate: float = 0.05

    def __post_init__(self):
        if not (0 < self.ergodic_end < self.semi_period):
            raise ValueError("need 0 < ergodic_end < semi_period")

    @classmethod
    def from_config(cls, config: SimConfig) -> "CycleSchedule":
        # a multi-particle system inherits the largest semi-period
        T = max(semi_period(config.mu_a, config.t_min_steps),
                semi_period(config.mu_b, config.t_min_steps))
        t_e = min(max(int(round(T * config.ergodic_fraction)), 1), T - 1)
        return cls(T, t_e, config.contraction_rate)

    @property
    def cycle_length(self) -> int:
        return 2 * self.semi_period

    def kappa(self, t_step: int) -> float:
        return kappa(t_step, self)

    def phase_of(self, t_step: int) -> Phase:
        if t_step < self.ergodic_end:
            return Phase.ERGODIC
        if t_step < self.semi_period:
            return Phase.CONTRACTIVE
        return Phase.EXPANSIVE


def kappa(t_step: int, schedule: CycleSchedule) -> float:
    """Contraction factor: 0 on the ergodic window, smoothstep up to
    exactly 1 at t = T, mirrored back to 0 on the expansive half."""
    T = schedule.semi_period
    t_e = schedule.ergodic_end
    if not (0 <= t_step < 2 * T):
        raise OutOfRange(f"t_step {t_step} outside cycle [0, {2 * T})")
    t = t_step if t_step <= T else 2 * T - t_step  # mirror the expansive half
    if t < t_e:
        return 0.0
    if t == T:
        return 1.0
    return _smoothstep((t - t_e) / (T - t_e))


def hamiltonian_value(u, p, t_step: int, schedule: CycleSchedule, beta) -> float:
    """(1 - kappa(t)) * sum_k beta^k(u) p_k with the on-shell convention
    that the caller has already identified dx/dt with the velocity rows."""
    u = np.asarray(u, dtype=float)
    p = np.asarray(p, dtype=float)
    b = np.asarray(beta(u) if callable(beta) else beta, dtype=float)
    if u.shape != p.shape or b.shape != p.shape:
        raise DimensionMismatch(
            f"u, p, beta must agree in shape: {u.shape}, {p.shape}, {b.shape}")
    k = kappa(t_step, schedule)
    if k == 1.0:
        return 0.0
    return (1.0 - k) * float(np.dot(b, p))


# ------------------------------------------------------------------ stepping

def _draw_step_randoms(stream: np.random.Generator, n: int):
    turn_u = stream.random(n)
    gauss = stream.standard_normal((n, 3))
    rad_u = stream.random(n)
    return turn_u, gauss, rad_u


def step_ergodic(ensemble: Ensemble, stream: np.random.Generator,
                 config: SimConfig) -> Ensemble:
    """One exploration step: drift-biased velocity resampling inside the
    causal cone, bounded displacement, reflecting walls."""
    ens = ensemble.copy()
    turn_u, gauss, rad_u = _draw_step_randoms(stream, ens.n)
    kernels.ergodic_update(ens.position, ens.velocity, turn_u, gauss, rad_u,
                           np.asarray(config.randers_drift, dtype=float),
                           config.turn_prob, config.lattice_spacing,
                           config.spatial_extent)
    ens.t_step += 1
    ens.phase = Phase.ERGODIC
    return ens


def _particle_barycenters(ens: Ensemble):
    out = {}
    for label, idx in ((0, ens.idx_a), (1, ens.idx_b)):
        out[label] = ens.position[idx].mean(axis=0)
    return out


def step_contractive(ensemble: Ensemble, schedule: CycleSchedule,
                     config: SimConfig) -> Ensemble:
    """Pull each particle's molecules toward their barycenter by a factor
    kappa * gamma, clamped so no molecule moves more than one spacing.
    The map is a global scale per particle, hence 1-Lipschitz."""
    ens = ensemble.copy()
    k = schedule.kappa(ens.t_step)
    gamma = schedule.contraction_rate
    if k * gamma > 0.0:
        for label, center in _particle_barycenters(ens).items():
            idx = ens.idx_a if label == 0 else ens.idx_b
            rel = ens.position[idx] - center
            r_max = float(np.sqrt((rel ** 2).sum(axis=1)).max())
            shrink = k * gamma
            if r_max > 0 and shrink * r_max > config.lattice_spacing:
                shrink = config.lattice_spacing / r_max
            ens.position[idx] = center + rel * (1.0 - shrink)
            ens.velocity[idx] = -rel * shrink / config.lattice_spacing
    else:
        ens.velocity[:] = 0.0
    ens.t_step += 1
    ens.phase = Phase.CONTRACTIVE
    return ens


def step_expansive(ensemble: Ensemble, stream: np.random.Generator,
                   schedule: CycleSchedule, config: SimConfig) -> Ensemble:
    """Diffuse away from the barycenter with rate mirroring the
    contractive profile: a (1 - kappa)-weighted exploration step plus a
    kappa-weighted outward radial push, total displacement <= spacing."""
    ens = ensemble.copy()
    k = schedule.kappa(ens.t_step)
    gamma = schedule.contraction_rate
    turn_u, gauss, rad_u = _draw_step_randoms(stream, ens.n)
    kernels.ergodic_update(ens.position, ens.velocity, turn_u, gauss, rad_u,
                           np.asarray(config.randers_drift, dtype=float),
                           config.turn_prob,
                           config.lattice_spacing * (1.0 - k),
                           config.spatial_extent)
    if k * gamma > 0.0:
        spacing = config.lattice_spacing
        for label, center in _particle_barycenters(ens).items():
            idx = ens.idx_a if label == 0 else ens.idx_b
            rel = ens.position[idx] - center
            r = np.sqrt((rel ** 2).sum(axis=1))
            push = np.minimum(gamma * r, spacing) * k
            safe_r = np.where(r > 0, r, 1.0)
            ens.position[idx] = ens.position[idx] + rel * (push / safe_r)[:, None]
        ext = config.spatial_extent
        np.clip(ens.position, -ext, ext, out=ens.position)
        ens.velocity *= (1.0 - k)
    ens.t_step += 1
    ens.phase = Phase.EXPANSIVE
    return ens


# ------------------------------------------------------------------- cycles

Hook = Callable[[Ensemble, int], Optional[Ensemble]]


@dataclass
class CycleHooks:
    """Per-phase observers; each may return a replacement ensemble."""

    ergodic: Optional[Hook] = None
    contractive: Optional[Hook] = None
    expansive: Optional[Hook] = None

    def get(self, phase: Phase) -> Optional[Hook]:
        return {Phase.ERGODIC: self.ergodic,
                Phase.CONTRACTIVE: self.contractive,
                Phase.EXPANSIVE: self.expansive}[phase]


def run_cycle(ensemble: Ensemble, config: SimConfig,
              hooks: CycleHooks | None = None,
              stream: np.random.Generator | None = None,
              schedule: CycleSchedule | None = None) -> Ensemble:
    """Advance exactly one fundamental cycle (2T steps) and bump tau.

    The phase sequence is ergodic [0, t_e), contractive [t_e, T),
    expansive [T, 2T).  Hooks run after each step of their phase and may
    substitute the ensemble (the thermalization hook does).
    """
    if ensemble.t_step != 0:
        raise ValueError("run_cycle requires t_step == 0")
    schedule = schedule or CycleSchedule.from_config(config)
    if stream is None:
        stream = rng_stream(config.seed, 1 + ensemble.tau_tick)
    hooks = hooks or CycleHooks()
    ens = ensemble
    for t in range(schedule.cycle_length):
        phase = schedule.phase_of(t)
        ens.t_step = t
        ens.phase = phase
        if phase is Phase.ERGODIC:
            ens = step_ergodic(ens, stream, config)
        elif phase is Phase.CONTRACTIVE:
            ens = step_contractive(ens, schedule, config)
        else:
            ens = step_expansive(ens, stream, schedule, config)
        hook = hooks.get(phase)
        if hook is not None:
            replacement = hook(ens, ens.t_step)
            if replacement is not None:
                ens = replacement
    ens.t_step = 0
    ens.tau_tick += 1
    ens.phase = Phase.ERGODIC
    return ens


# ------------------------------------------------------------- two-time view

@dataclass
class TwoTimeHistory:
    """Ordered (t_step, tau_tick, value) samples of some observable."""

    samples: list = field(default_factory=list)

    def record(self, t_step: int, tau_tick: int, value) -> None:
        self.samples.append((t_step, tau_tick, value))

    def sorted_samples(self):
        return sorted(self.samples, key=lambda s: (s[1], s[0]))


def project_two_time(history: TwoTimeHistory) -> dict:
    """Project (t, tau) onto tau: keep only each cycle's terminal sample.

    The fast-clock detail is irrecoverable from the result.
    """
    series: dict[int, object] = {}
    for t_step, tau_tick, value in history.sorted_samples():
        series[tau_tick] = value  # later t_steps overwrite earlier ones
    return series
