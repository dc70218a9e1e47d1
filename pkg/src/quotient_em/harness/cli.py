"""Command-line entry point.

Subcommands: gen-data, run <experiment>, bounds <name>, list, verify-all.
Exit codes: 0 pass, 1 check failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

from .. import __version__
from ..errors import ConfigError, QuotientEmError
from .. import bounds as bnd
from ..ipm import ipm_deviation_bound
from .config import apply_overrides, coerce_value, parse_config_file
from .datagen import generate_data
from .experiments import REGISTRY, run_registered
from .report import RunReport, to_json, utc_now, write_report

__all__ = ["main", "BOUNDS_REGISTRY"]


def _float_list(v):
    if isinstance(v, (int, float)):
        return [float(v)]
    return [float(x) for x in v]


BOUNDS_REGISTRY = {
    "perturbed-envelope": (
        {"gamma": 0.5, "delta": 0.1, "e0": 0.0, "horizon": 10},
        lambda p: bnd.perturbed_envelope(p["gamma"], p["delta"], p["e0"], int(p["horizon"])),
    ),
    "inexact-envelope": (
        {"gamma": 0.5, "e0": 0.0, "eps": (0.1, 0.1, 0.1)},
        lambda p: bnd.inexact_envelope(p["gamma"], p["e0"], _float_list(p["eps"])),
    ),
    "delta-from-gradients": (
        {"lam": 1.0, "sup_grad_dev": 0.1},
        lambda p: bnd.delta_from_gradients(p["lam"], p["sup_grad_dev"]),
    ),
    "argmax-shift": (
        {"lam": 1.0, "eps": 0.1},
        lambda p: bnd.argmax_shift_bound(p["lam"], p["eps"]),
    ),
    "function-gap-shift": (
        {"lam": 1.0, "delta_sup": 0.1},
        lambda p: bnd.function_gap_shift_bound(p["lam"], p["delta_sup"]),
    ),
    "approx-stationary-shift": (
        {"lam": 1.0, "eta": 0.1},
        lambda p: bnd.approx_stationary_shift_bound(p["lam"], p["eta"]),
    ),
    "covering": (
        {"p": 2, "lip": 1.0, "radius": 1.0, "eps": 1.0},
        lambda p: bnd.covering_bound(int(p["p"]), p["lip"], p["radius"], p["eps"]),
    ),
    "ball-covering": (
        {"p": 2, "radius": 1.0, "rho": 0.5},
        lambda p: bnd.ball_covering_bound(int(p["p"]), p["radius"], p["rho"]),
    ),
    "dudley-covering": (
        {"p": 2, "lip": 1.0, "radius": 1.0, "diam": 1.0, "n": 100, "constant": 24.0},
        lambda p: bnd.dudley_bound(
            lambda eps: int(p["p"]) * math.log(1.0 + 2.0 * p["lip"] * p["radius"] / eps),
            p["diam"], int(p["n"]), p["constant"],
        ),
    ),
    "matrix-bernstein-tail": (
        {"v": 1.0, "r": 1.0, "d": 4, "t": 1.0},
        lambda p: bnd.matrix_bernstein_tail(p["v"], p["r"], int(p["d"]), p["t"]),
    ),
    "matrix-bernstein-hp": (
        {"v": 1.0, "r": 1.0, "d": 4, "delta_prob": 0.05},
        lambda p: bnd.matrix_bernstein_hp(p["v"], p["r"], int(p["d"]), p["delta_prob"]),
    ),
    "bousquet": (
        {"ez": 0.1, "v": 1.0, "b": 1.0, "n": 100, "t": 2.0},
        lambda p: bnd.bousquet_bound(p["ez"], p["v"], p["b"], int(p["n"]), p["t"]),
    ),
    "ipm-deviation": (
        {"kind": "feature", "n": 100, "t": 2.0, "bound": 1.0, "kappa": 1.0},
        lambda p: ipm_deviation_bound(
            str(p["kind"]), int(p["n"]), p["t"], bound=p["bound"], kappa=p["kappa"]
        ),
    ),
    "ipm-to-orbit-rate": (
        {"ipm_value": 0.1, "c": 1.0},
        lambda p: bnd.ipm_to_orbit_rate(p["ipm_value"], p["c"]),
    ),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quotient-em",
        description="Quotient-aware EM experiments and bound calculators.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command")

    sub.add_parser("list", help="print registered experiment names")

    run_p = sub.add_parser("run", help="run one experiment and write its report")
    run_p.add_argument("experiment")
    run_p.add_argument("--config", default=None)
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--out", default=None)
    run_p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    run_p.add_argument("--no-plots", action="store_true")

    gen_p = sub.add_parser("gen-data", help="generate a dataset CSV")
    gen_p.add_argument("--config", default=None)
    gen_p.add_argument("--seed", type=int, default=None)
    gen_p.add_argument("--out", default=None)
    gen_p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")

    bounds_p = sub.add_parser("bounds", help="evaluate a named bound calculator")
    bounds_p.add_argument("name")
    bounds_p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    bounds_p.add_argument("--out", default=None)

    verify_p = sub.add_parser("verify-all", help="run the full acceptance suite")
    verify_p.add_argument("--seed", type=int, default=None)
    verify_p.add_argument("--out", default=None)
    verify_p.add_argument("--no-plots", action="store_true")
    return parser


def _load_config(path) -> dict:
    return parse_config_file(path) if path else {}


def _experiment_params(cfg: dict, overrides) -> dict:
    params = {
        key[len("param."):]: value for key, value in cfg.items() if key.startswith("param.")
    }
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, _, value = item.partition("=")
        params[key.strip()] = coerce_value(value)
    return params


def _run_one(name: str, seed: int, out_dir: Path, params: dict, plots: bool) -> tuple:
    start = time.time()
    started = utc_now()
    used_params, result = run_registered(name, seed, out=out_dir, overrides=params, plots=plots)
    report = RunReport(
        experiment=name,
        criterion=REGISTRY[name].criterion,
        seed=seed,
        config={f"param.{k}": v for k, v in used_params.items()},
        checks=result.checks,
        verdict="pass" if result.passed else "fail",
        artifacts=[str(Path(a).name) for a in result.artifacts],
        library_version=__version__,
        started_utc=started,
        wall_clock_s=time.time() - start,
        extras=result.extras,
    )
    path = write_report(report, out_dir)
    return report, path


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    name = args.experiment
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    out_dir = Path(args.out or cfg.get("out") or Path("runs") / name)
    params = _experiment_params(cfg, args.override)
    report, path = _run_one(name, seed, out_dir, params, plots=not args.no_plots)
    for check in report.checks:
        state = "pass" if check.passed else "FAIL"
        nums = ", ".join(f"{k}={v}" for k, v in list(check.numbers.items())[:4])
        print(f"[{report.criterion}] {check.name}: {state} ({nums})")
    print(f"verdict: {report.verdict}  report: {path}")
    return 0 if report.verdict == "pass" else 1


def cmd_gen_data(args) -> int:
    cfg = apply_overrides(_load_config(args.config), args.override)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    out = Path(args.out or cfg.get("out") or "dataset.csv")
    data = generate_data(cfg, seed)
    data.to_csv(out)
    print(f"wrote {data.n} x {data.d} dataset to {out}")
    return 0


def cmd_bounds(args) -> int:
    if args.name not in BOUNDS_REGISTRY:
        known = ", ".join(sorted(BOUNDS_REGISTRY))
        raise ConfigError(f"unknown bound {args.name!r}; valid names: {known}")
    defaults, fn = BOUNDS_REGISTRY[args.name]
    params = dict(defaults)
    for item in args.override or []:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, _, value = item.partition("=")
        key = key.strip()
        if key not in params:
            raise ConfigError(f"bound {args.name!r} has no parameter {key!r}; valid: {sorted(params)}")
        params[key] = coerce_value(value)
    value = fn(params)
    payload = {"name": args.name, "inputs": params, "value": value}
    print(to_json(payload))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"bound_{args.name}.json").write_text(to_json(payload) + "\n")
    return 0


def cmd_verify_all(args) -> int:
    seed = args.seed if args.seed is not None else 0
    base = Path(args.out or "runs/verify-all")
    rows = []
    all_pass = True
    for name in REGISTRY:
        report, _ = _run_one(name, seed, base / name, {}, plots=not args.no_plots)
        ok = report.verdict == "pass"
        all_pass = all_pass and ok
        rows.append((REGISTRY[name].criterion, name, report.verdict, report.wall_clock_s))
        print(f"[{REGISTRY[name].criterion}] {name}: {report.verdict} ({report.wall_clock_s:.1f}s)")
    print("-" * 56)
    print(f"acceptance suite: {'PASS' if all_pass else 'FAIL'} "
          f"({sum(1 for r in rows if r[2] == 'pass')}/{len(rows)} experiments)")
    return 0 if all_pass else 1


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage()
        return 2
    try:
        if args.command == "list":
            for name, exp in REGISTRY.items():
                print(f"{exp.criterion:4s} {name}")
            return 0
        if args.command == "run":
            return cmd_run(args)
        if args.command == "gen-data":
            return cmd_gen_data(args)
        if args.command == "bounds":
            return cmd_bounds(args)
        if args.command == "verify-all":
            return cmd_verify_all(args)
        parser.print_usage()
        return 2
    except ConfigError as ex:
        print(f"config error: {ex}", file=sys.stderr)
        return 2
    except QuotientEmError as ex:
        print(f"error: {type(ex).__name__}: {ex}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
