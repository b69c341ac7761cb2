"""Simulation configuration: parsing, validation and serialization.

The config file format is plain text, one ``key = value`` per line.
Vector-valued keys take comma-separated triples, ``#`` starts a comment.
All lengths are in lattice spacings with c = 1; all times are in
fundamental t-steps (one step = one tick of the fast clock).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

Vec3 = tuple[float, float, float]


class ConfigError(ValueError):
    """Base class for configuration problems."""


class MissingKey(ConfigError):
    def __init__(self, key: str):
        super().__init__(f"missing required config key: {key!r}")
        self.key = key


class InvalidValue(ConfigError):
    def __init__(self, message: str):
        super().__init__(message)


_REQUIRED_KEYS = (
    "n_a", "n_b", "mu_a", "mu_b", "t_min_steps", "lattice_spacing",
    "spatial_extent", "detector_1_pos", "detector_2_pos",
    "coincidence_radius", "randers_drift", "tau_ticks", "seed", "trials",
)

_OPTIONAL_KEYS = (
    "ergodic_fraction", "contraction_rate", "turn_prob", "bell_phase",
    "thermalize",
)


@dataclass(frozen=True)
class SimConfig:
    """All model constants and experiment parameters.

    Required fields mirror the config-file keys one to one.  The trailing
    block are tunables of the cycle dynamics with documented defaults:
    the split of the semi-period into ergodic/contractive windows, the
    per-step contraction rate, the direction-persistence of the ergodic
    walk and the shared relative phase selecting the emergent Bell state
    (0 gives the symmetric state, pi the singlet).
    """

    n_a: int
    n_b: int
    mu_a: float
    mu_b: float
    t_min_steps: int
    lattice_spacing: float
    spatial_extent: float
    detector_1_pos: Vec3
    detector_2_pos: Vec3
    coincidence_radius: float
    randers_drift: Vec3
    tau_ticks: int
    seed: int
    trials: int
    ergodic_fraction: float = 0.6
    contraction_rate: float = 0.05
    turn_prob: float = 0.125
    bell_phase: float = math.pi
    thermalize: bool = True

    def __post_init__(self):
        _validate(self)

    def with_(self, **kw) -> "SimConfig":
        return replace(self, **kw)


def _norm3(v: Vec3) -> float:
    return math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])


def _validate(cfg: SimConfig) -> None:
    for name in ("n_a", "n_b", "t_min_steps", "tau_ticks", "trials"):
        v = getattr(cfg, name)
        if not isinstance(v, int) or v < 1:
            raise InvalidValue(f"{name} must be a positive integer, got {v!r}")
    for name in ("mu_a", "mu_b"):
        if getattr(cfg, name) < 0:
            raise InvalidValue(f"{name} must be nonnegative")
    for name in ("lattice_spacing", "spatial_extent", "coincidence_radius"):
        if getattr(cfg, name) <= 0:
            raise InvalidValue(f"{name} must be positive")
    if _norm3(cfg.randers_drift) >= 1.0:
        raise InvalidValue("randers_drift norm >= 1")
    if cfg.coincidence_radius < cfg.lattice_spacing:
        raise InvalidValue("coincidence_radius < lattice_spacing")
    if not (0.0 < cfg.ergodic_fraction < 1.0):
        raise InvalidValue("ergodic_fraction must lie in (0, 1)")
    if not (0.0 <= cfg.contraction_rate <= 1.0):
        raise InvalidValue("contraction_rate must lie in [0, 1]")
    if not (0.0 < cfg.turn_prob <= 1.0):
        raise InvalidValue("turn_prob must lie in (0, 1]")
    if not (-(2 ** 63) <= cfg.seed < 2 ** 64):
        raise InvalidValue("seed must fit in 64 bits")


_VEC_KEYS = {"detector_1_pos", "detector_2_pos", "randers_drift"}
_INT_KEYS = {"n_a", "n_b", "t_min_steps", "tau_ticks", "seed", "trials"}
_BOOL_KEYS = {"thermalize"}


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    try:
        if key in _VEC_KEYS:
            parts = [p.strip() for p in raw.split(",")]
            if len(parts) != 3:
                raise ValueError("expected 3 components")
            return tuple(float(p) for p in parts)
        if key in _INT_KEYS:
            return int(raw, 0)
        if key in _BOOL_KEYS:
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError("expected a boolean")
        return float(raw)
    except ValueError as exc:
        raise InvalidValue(f"bad value for {key!r}: {raw!r} ({exc})") from None


def parse_config(text: str) -> SimConfig:
    """Parse a ``key = value`` document into a validated SimConfig."""
    known = set(_REQUIRED_KEYS) | set(_OPTIONAL_KEYS)
    seen: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidValue(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = line.split("=", 1)
        key = key.strip()
        if key not in known:
            raise InvalidValue(f"line {lineno}: unknown config key {key!r}")
        if key in seen:
            raise InvalidValue(f"line {lineno}: duplicate config key {key!r}")
        seen[key] = _parse_value(key, raw)
    for key in _REQUIRED_KEYS:
        if key not in seen:
            raise MissingKey(key)
    return SimConfig(**seen)  # type: ignore[arg-type]


def serialize_config(cfg: SimConfig) -> str:
    """Inverse of parse_config: parse_config(serialize_config(c)) == c."""
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if f.name in _VEC_KEYS:
            lines.append(f"{f.name} = {v[0]!r},{v[1]!r},{v[2]!r}")
        elif f.name in _BOOL_KEYS:
            lines.append(f"{f.name} = {'true' if v else 'false'}")
        else:
            lines.append(f"{f.name} = {v!r}")
    return "\n".join(lines) + "\n"
