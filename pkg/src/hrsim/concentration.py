"""Concentration-of-measure demonstrations.

Empirically exhibits that 1-Lipschitz observables of high-dimensional
ensembles are nearly constant: deviation probabilities from the
empirical median decay exponentially with the dimension, and one
fundamental cycle concentrates the positional spread at the equilibrium
point t = T.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import SimConfig
from .dynamics import CycleHooks, CycleSchedule, run_cycle
from .model import Ensemble
from .rng import rng_stream


class AllZeroProbabilities(RuntimeError):
    """Epsilon too large / too few samples to resolve the tail."""


class SingleDim(ValueError):
    pass


@dataclass(frozen=True)
class ConcentrationReport:
    dims: tuple
    epsilon: float
    deviation_probs: tuple
    fitted_slope: float
    fit_r2: float


def lipschitz_constant_estimate(f, n: int, samples: int,
                                stream: np.random.Generator) -> float:
    """Sampled lower bound on the Lipschitz constant of f over the
    uniform cube [-1, 1]^n with Euclidean distance."""
    if samples < 2:
        raise ValueError("need at least 2 samples")
    x = stream.uniform(-1.0, 1.0, size=(samples, n))
    y = stream.uniform(-1.0, 1.0, size=(samples, n))
    fx = np.asarray(f(x), dtype=float)
    fy = np.asarray(f(y), dtype=float)
    dist = np.sqrt(((x - y) ** 2).sum(axis=1))
    ok = dist > 0
    return float(np.max(np.abs(fx[ok] - fy[ok]) / dist[ok]))


def deviation_probability(f, n: int, epsilon: float, samples: int,
                          stream: np.random.Generator) -> float:
    """Monte-Carlo estimate of P(|f - empirical median| > epsilon) under
    the uniform product measure on [-1, 1]^n."""
    if samples < 100:
        raise ValueError("need at least 100 samples")
    # draw in blocks to bound memory; the stream consumes the identical
    # sequence regardless of the block size
    block = max(1, (1 << 22) // n)
    chunks = []
    done = 0
    while done < samples:
        b = min(block, samples - done)
        chunks.append(np.asarray(f(stream.uniform(-1.0, 1.0, size=(b, n))),
                                 dtype=float))
        done += b
    vals = np.concatenate(chunks)
    med = float(np.median(vals))
    return float((np.abs(vals - med) > epsilon).mean())


def concentration_scan(f, dims, epsilon: float, samples: int,
                       stream: np.random.Generator) -> ConcentrationReport:
    """Deviation probability per dimension plus a log-linear fit in N.

    The fit uses only dimensions with nonzero empirical probability; the
    slope must come out negative for concentrating observables.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) == 0:
        raise ValueError("dims must be nonempty")
    if len(dims) < 2:
        raise SingleDim("cannot fit a slope to fewer than two dimensions")
    if any(b <= a for a, b in zip(dims, dims[1:])):
        raise ValueError("dims must be strictly increasing")
    probs = tuple(deviation_probability(f, n, epsilon, samples, stream)
                  for n in dims)
    xs = [n for n, p in zip(dims, probs) if p > 0]
    ys = [math.log(p) for p in probs if p > 0]
    if len(xs) < 2:
        raise AllZeroProbabilities(
            "fewer than two dimensions with nonzero deviation probability")
    slope, intercept = np.polyfit(xs, ys, 1)
    fit = slope * np.asarray(xs) + intercept
    ss_res = float(((np.asarray(ys) - fit) ** 2).sum())
    ss_tot = float(((np.asarray(ys) - np.mean(ys)) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return ConcentrationReport(dims, epsilon, probs, float(slope), float(r2))


def hoeffding_bound(n: int, epsilon: float) -> float:
    """2 exp(-n eps^2 / 2): tail oracle for the mean-coordinate
    observable on the uniform cube."""
    return 2.0 * math.exp(-n * epsilon * epsilon / 2.0)


# ------------------------------------------------------------- collapse demo

@dataclass(frozen=True)
class SpreadReport:
    spread_start: float
    spread_ergodic_end: float
    spread_equilibrium: float
    spread_cycle_end: float

    def as_tuple(self):
        return (self.spread_start, self.spread_ergodic_end,
                self.spread_equilibrium, self.spread_cycle_end)


def _spread(ens: Ensemble) -> float:
    total = 0.0
    for idx in (ens.idx_a, ens.idx_b):
        rel = ens.position[idx] - ens.position[idx].mean(axis=0)
        total += float(np.sqrt((rel ** 2).sum(axis=1)).sum())
    return total / ens.n


def collapse_concentration_demo(config: SimConfig) -> SpreadReport:
    """One fundamental cycle on a scattered ensemble; the positional
    spread at the equilibrium point t = T is the minimum of the four
    checkpoints (start, ergodic end, T, cycle end)."""
    schedule = CycleSchedule.from_config(config)
    stream = rng_stream(config.seed, 7)
    ens = Ensemble.initial(config)
    ens.position[:] = stream.uniform(-config.spatial_extent / 2.0,
                                     config.spatial_extent / 2.0,
                                     size=ens.position.shape)
    checkpoints = {}

    def record(e: Ensemble, t_step: int):
        if t_step in (schedule.ergodic_end, schedule.semi_period,
                      schedule.cycle_length):
            checkpoints[t_step] = _spread(e)

    hooks = CycleHooks(ergodic=record, contractive=record, expansive=record)
    start = _spread(ens)
    run_cycle(ens, config, hooks=hooks, stream=stream, schedule=schedule)
    return SpreadReport(start,
                        checkpoints[schedule.ergodic_end],
                        checkpoints[schedule.semi_period],
                        checkpoints[schedule.cycle_length])
