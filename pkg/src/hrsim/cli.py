"""Command line interface.

Every subcommand reads a ``key = value`` config file, runs one
experiment and writes JSON or CSV to --out (default stdout).

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration
error, 3 model-contract violation (a guaranteed invariant observed
broken, e.g. a signaling marginal or a non-vanishing commutator).
"""
from __future__ import annotations

import argparse
import json
import math
import sys

from .backend import active_backend
from .concentration import (collapse_concentration_demo, concentration_scan,
                            hoeffding_bound)
from .config import ConfigError, SimConfig, parse_config
from .dynamics import CycleHooks, CycleSchedule, run_cycle
from .emergence import (average_velocities, check_commutators,
                        make_thermalize_hook, satisfied_fraction)
from .experiments import (ContractViolation, bell_factorization_compare, chsh,
                          correlation_csv, correlation_range_bound,
                          instantaneity_check, no_signaling_test, run_epr,
                          scan_csv, scan_distance)
from .model import Ensemble
from .rng import rng_stream

_CHSH_DEFAULT = (0.0, math.pi / 4, math.pi / 8, 3 * math.pi / 8)

TRAJECTORY_HEADER = "tau,t,k,particle,x1,x2,x3,v1,v2,v3,n1,n2,phi1,phi2"


def _floats(text: str) -> tuple:
    try:
        return tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError as exc:
        raise ConfigError(f"bad numeric list {text!r}: {exc}") from None


def _ints(text: str) -> tuple:
    try:
        return tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError as exc:
        raise ConfigError(f"bad integer list {text!r}: {exc}") from None


def _load_config(args) -> SimConfig:
    if not args.config:
        raise ConfigError("--config is required for this command")
    try:
        with open(args.config) as fh:
            cfg = parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {args.config!r}: {exc}") from None
    if args.seed is not None:
        cfg = cfg.with_(seed=args.seed)
    if getattr(args, "trials", None) is not None:
        cfg = cfg.with_(trials=args.trials)
    return cfg


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_json(args, payload: dict) -> None:
    _emit(args, json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- subcommands

def _cmd_simulate(args) -> int:
    cfg = _load_config(args)
    schedule = CycleSchedule.from_config(cfg)
    ens = Ensemble.initial(cfg, center_a=cfg.detector_1_pos,
                           center_b=cfg.detector_2_pos)
    rows = []

    def dump(e: Ensemble, t_step: int):
        for k in range(e.n):
            vals = (*e.position[k], *e.velocity[k], *e.weights[k],
                    *e.phases[k])
            rows.append(f"{e.tau_tick},{t_step},{k},{int(e.particle[k])},"
                        + ",".join(repr(float(v)) for v in vals))

    therm = make_thermalize_hook(cfg) if cfg.thermalize else None

    def ergodic_hook(e, t_step):
        out = therm(e, t_step) if therm else None
        dump(out if out is not None else e, t_step)
        return out

    hooks = CycleHooks(ergodic=ergodic_hook, contractive=dump, expansive=dump)
    dump(ens, 0)
    for tick in range(cfg.tau_ticks):
        ens = run_cycle(ens, cfg, hooks=hooks,
                        stream=rng_stream(cfg.seed, 1 + tick),
                        schedule=schedule)
    if args.format == "csv":
        _emit(args, TRAJECTORY_HEADER + "\n" + "\n".join(rows) + "\n")
    else:
        state = average_velocities(ens)
        _emit_json(args, {
            "backend": active_backend(),
            "tau_ticks": ens.tau_tick,
            "cycle_length": schedule.cycle_length,
            "satisfied_fraction": satisfied_fraction(ens),
            "state": state.to_json_dict(),
            "seed": cfg.seed,
        })
    return 0


def _cmd_epr(args) -> int:
    cfg = _load_config(args)
    angles = _floats(args.angles) if args.angles else (0.0, math.pi / 8)
    if len(angles) != 2:
        raise ConfigError("epr needs --angles setting1,setting2")
    record = run_epr(cfg, angles[0], angles[1])
    if args.format == "csv":
        _emit(args, correlation_csv([record]))
    else:
        _emit_json(args, dict(record.as_dict(), seed=cfg.seed))
    return 0


def _cmd_chsh(args) -> int:
    cfg = _load_config(args)
    angles = _floats(args.angles) if args.angles else _CHSH_DEFAULT
    result = chsh(cfg, angles)
    if args.format == "csv":
        _emit(args, correlation_csv(result.records))
    else:
        _emit_json(args, dict(result.as_dict(), seed=cfg.seed,
                              trials=cfg.trials))
    return 0


def _cmd_scan_distance(args) -> int:
    cfg = _load_config(args)
    bound = correlation_range_bound(cfg)
    distances = (_floats(args.distances) if args.distances
                 else tuple(f * bound for f in (0.1, 0.5, 1.0, 2.0, 4.0)))
    scan = scan_distance(cfg, distances)
    if args.format == "csv":
        _emit(args, scan_csv(scan))
    else:
        _emit_json(args, dict(scan.as_dict(), seed=cfg.seed))
    return 0


def _cmd_instantaneity(args) -> int:
    cfg = _load_config(args)
    bound = correlation_range_bound(cfg)
    distances = (_floats(args.distances) if args.distances
                 else tuple(f * bound for f in (0.1, 0.2, 0.3, 0.4)))
    records = instantaneity_check(cfg, distances)
    if args.format == "csv":
        lines = ["distance,latency"]
        lines += [f"{r.distance!r},{r.latency}" for r in records]
        _emit(args, "\n".join(lines) + "\n")
    else:
        _emit_json(args, {"records": [r.as_dict() for r in records],
                          "d_cor_bound": bound, "seed": cfg.seed})
    return 0


def _cmd_no_signaling(args) -> int:
    cfg = _load_config(args)
    angles = (_floats(args.angles) if args.angles
              else (0.0, 0.0, math.pi / 4))
    if len(angles) != 3:
        raise ConfigError(
            "no-signaling needs --angles local,remote_first,remote_second")
    report = no_signaling_test(cfg, angles[0], angles[1:],
                               broken_sampler=args.broken)
    _emit_json(args, dict(report.as_dict(), seed=cfg.seed,
                          broken_sampler=args.broken))
    if not report.passed:
        raise ContractViolation(
            f"marginal shift {report.delta_p} exceeds 3 sigma {3 * report.sigma}")
    return 0


def _cmd_bell_compare(args) -> int:
    cfg = _load_config(args)
    angles = _floats(args.angles) if args.angles else _CHSH_DEFAULT
    report = bell_factorization_compare(cfg, angles,
                                        lambda_grid=args.lambda_grid)
    if args.format == "csv":
        lines = ["pair,e_simulated,e_model"]
        pairs = ("a-b", "a-bp", "ap-b", "ap-bp")
        for p, es, em in zip(pairs, report.simulated_e, report.model_e):
            lines.append(f"{p},{es!r},{em!r}")
        _emit(args, "\n".join(lines) + "\n")
    else:
        _emit_json(args, dict(report.as_dict(), seed=cfg.seed))
    return 0


def _cmd_concentration(args) -> int:
    cfg = _load_config(args)
    dims = _ints(args.dims)
    samples = args.trials if args.trials is not None else 200_000

    def mean_coord(x):
        return x.mean(axis=1)

    report = concentration_scan(mean_coord, dims, args.epsilon, samples,
                                rng_stream(cfg.seed, 11))
    spreads = collapse_concentration_demo(cfg)
    _emit_json(args, {
        "dims": list(report.dims),
        "epsilon": report.epsilon,
        "deviation_probs": list(report.deviation_probs),
        "hoeffding_bounds": [hoeffding_bound(n, args.epsilon)
                             for n in report.dims],
        "fitted_slope": report.fitted_slope,
        "fit_r2": report.fit_r2,
        "cycle_spreads": {
            "start": spreads.spread_start,
            "ergodic_end": spreads.spread_ergodic_end,
            "equilibrium": spreads.spread_equilibrium,
            "cycle_end": spreads.spread_cycle_end,
        },
        "seed": cfg.seed,
    })
    return 0


def _cmd_algebra_check(args) -> int:
    report = check_commutators(args.grid_size, args.spacing)
    _emit_json(args, {
        "position_position": report.position_position,
        "momentum_momentum": report.momentum_momentum,
        "position_cross_momentum": report.position_cross_momentum,
        "canonical_residual_coarse": report.canonical_residual_coarse,
        "canonical_residual_fine": report.canonical_residual_fine,
        "convergence_order": report.convergence_order,
    })
    tol = 1e-12
    if (report.position_position > tol or report.momentum_momentum > tol
            or report.position_cross_momentum > tol
            or report.convergence_order < 1.9):
        raise ContractViolation("quantization algebra check failed")
    return 0


# --------------------------------------------------------------------- driver

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hrsim",
        description="Two-clock sub-quantum ensemble simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, helptext):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="path to key = value config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--trials", type=int, help="override config trials")
        p.set_defaults(func=func)
        return p

    add("simulate", _cmd_simulate,
        "run cycles and dump the trajectory or final state")
    p = add("epr", _cmd_epr, "one correlation run at two detector settings")
    p.add_argument("--angles", help="setting1,setting2 in radians")
    p = add("chsh", _cmd_chsh, "CHSH statistic from four correlation runs")
    p.add_argument("--angles", help="a,a_prime,b,b_prime in radians")
    p = add("scan-distance", _cmd_scan_distance,
            "entanglement versus detector separation")
    p.add_argument("--distances", help="comma-separated separations")
    p = add("instantaneity", _cmd_instantaneity,
            "slow-clock latency of constraint formation")
    p.add_argument("--distances", help="comma-separated separations")
    p = add("no-signaling", _cmd_no_signaling,
            "marginal invariance under the remote setting")
    p.add_argument("--angles", help="local,remote_first,remote_second")
    p.add_argument("--broken", action="store_true",
                   help="use the deliberately leaky sampler (negative control)")
    p = add("bell-compare", _cmd_bell_compare,
            "best local factorized model versus simulation")
    p.add_argument("--angles", help="a,a_prime,b,b_prime in radians")
    p.add_argument("--lambda-grid", type=int, default=256,
                   help="hidden-variable grid size for the fitted mixture")
    p = add("concentration", _cmd_concentration,
            "concentration-of-measure scan and cycle collapse demo")
    p.add_argument("--dims", default="50,100,200,400",
                   help="comma-separated ensemble dimensions")
    p.add_argument("--epsilon", type=float, default=0.15,
                   help="deviation threshold")
    p = add("algebra-check", _cmd_algebra_check,
            "verify the emergent quantization algebra")
    p.add_argument("--grid-size", type=int, default=201)
    p.add_argument("--spacing", type=float, default=0.05)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ContractViolation as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
