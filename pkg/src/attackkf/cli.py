"""Command-line entry point.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical failure.
Errors are printed to stderr as one JSON object per line.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .attacks import classify_attack
from .config import ConfigError, load_config
from .files import DataFileError, read_measurements, write_json, write_table
from .filtering import proposed_kf_rtss, standard_kf_rtss
from .harness import METHODS, TRANSIENT_S, RunError, run_monte_carlo, simulate_run
from .models import DimensionError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fail(code, kind, message, **extra):
    print(json.dumps({"error": kind, "message": str(message), **extra}), file=sys.stderr)
    return code


def _load(args):
    cfg = load_config(args.config)
    ex = cfg.execution
    if getattr(args, "seed", None) is not None:
        ex.base_seed = args.seed
    if getattr(args, "runs", None) is not None:
        if args.runs < 1:
            raise UsageError("--runs must be >= 1")
        ex.runs = args.runs
    if getattr(args, "methods", None):
        ms = [m.strip() for m in args.methods.split(",") if m.strip()]
        bad = [m for m in ms if m not in METHODS]
        if bad or not ms:
            raise UsageError(f"--methods: unknown {bad}; choose from {','.join(METHODS)}")
        ex.methods = tuple(m for m in METHODS if m in ms)
    if getattr(args, "out", None):
        ex.out = args.out
    return cfg


def _outdir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_simulate(args) -> int:
    cfg = _load(args)
    sc, ex = cfg.scenario, cfg.execution
    traj, Y, reals = simulate_run(sc, ex.base_seed, 0)
    out = _outdir(ex.out)
    steps = range(1, sc.horizon + 1)
    n_x, n_z = sc.model.n_x, sc.model.n_z
    write_table(out / "truth", ["step"] + [f"x{i + 1}" for i in range(n_x)],
                ([k, *x] for k, x in zip(steps, traj.states)), ex.format)
    write_table(out / "measurements", ["step"] + [f"y{i + 1}" for i in range(n_z)],
                ([k, *y] for k, y in zip(steps, Y)), ex.format)
    write_table(out / "attacks", ["step", "xi_b", "xi_c", "xi_a", "xi_m", "attack_type"],
                ([k, r.xi_b, r.xi_c, r.xi_a, r.xi_m, classify_attack(r).value] for k, r in zip(steps, reals)),
                ex.format)
    return EXIT_OK


def _belief_rows(means, covs):
    for k, (m, P) in enumerate(zip(means, covs), start=1):
        yield [k, *m, *np.diag(P)]


def cmd_estimate(args) -> int:
    cfg = _load(args)
    sc, ex = cfg.scenario, cfg.execution
    src = args.measurements or ex.measurements
    if not src:
        raise UsageError("estimate needs a measurement file (argument or execution.measurements)")
    Y = read_measurements(src, n_z=sc.model.n_z)
    if args.estimator == "standard":
        records, sm = standard_kf_rtss(sc.init_estimator, Y, sc.model, singular=ex.singular)
    else:
        records, sm = proposed_kf_rtss(sc.init_estimator, Y, sc.theta, joseph=args.joseph, singular=ex.singular)
    fm = np.array([r.posterior.mean for r in records])
    fP = np.array([r.posterior.cov for r in records])
    n_x = sc.model.n_x
    header = ["step"] + [f"x{i + 1}" for i in range(n_x)] + [f"P{i + 1}{i + 1}" for i in range(n_x)]
    out = _outdir(ex.out)
    write_table(out / "filtered", header, _belief_rows(fm, fP), ex.format)
    write_table(out / "smoothed", header, _belief_rows(sm.means(), sm.covs()), ex.format)
    if args.full_cov:
        write_json(out / "covariances.json", {
            "filtered": [P.tolist() for P in fP],
            "smoothed": [P.tolist() for P in sm.covs()],
            "skipped_updates": [k for k, r in enumerate(records, start=1) if r.skipped_update],
        })
    return EXIT_OK


def cmd_benchmark(args) -> int:
    cfg = _load(args)
    sc, ex = cfg.scenario, cfg.execution
    t0 = time.perf_counter()
    res = run_monte_carlo(sc, ex.runs, ex.methods, ex.base_seed, singular=ex.singular)
    wall = time.perf_counter() - t0
    out = _outdir(ex.out)
    header = ["step", "time_s"]
    for m in res.methods:
        header += [f"{m}_pos_rmse", f"{m}_vel_rmse"]
    rows = []
    for k in range(sc.horizon):
        row = [k + 1, res.times[k]]
        for m in res.methods:
            row += [res.pos_rmse[m][k], res.vel_rmse[m][k]]
        rows.append(row)
    write_table(out / "rmse", header, rows, ex.format)
    write_json(out / "summary.json", {
        "runs": res.runs,
        "base_seed": res.base_seed,
        "transient_s": TRANSIENT_S,
        "methods": res.summary(),
    })
    # wall time is kept apart so summary.json stays byte-reproducible
    write_json(out / "timing.json", {"wall_time_s": wall})
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(json.dumps({"valid": False, "violations": e.violations}, indent=2))
        return EXIT_USAGE
    print(json.dumps({"valid": True, "scenario": cfg.source, "violations": []}, indent=2))
    return EXIT_OK


def build_parser():
    p = _Parser(prog="attackkf", description="Attack-aware Kalman filtering and smoothing.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def common(sp, seed=True):
        sp.add_argument("--config", required=True, help="YAML/JSON run configuration")
        sp.add_argument("--out", help="output directory (overrides execution.out)")
        if seed:
            sp.add_argument("--seed", type=int, help="base seed (overrides execution.base_seed)")

    sp = sub.add_parser("simulate", help="simulate truth, attacked measurements and attack log")
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("estimate", help="filter and smooth a measurement file")
    common(sp, seed=False)
    sp.add_argument("measurements", nargs="?", help="CSV with columns step,y1..yn")
    sp.add_argument("--estimator", choices=("proposed", "standard"), default="proposed")
    sp.add_argument("--full-cov", action="store_true", help="also write full covariances as JSON")
    sp.add_argument("--joseph", action="store_true", help="Joseph-form covariance update")
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("benchmark", help="Monte Carlo RMSE comparison")
    common(sp)
    sp.add_argument("--runs", type=int)
    sp.add_argument("--methods", help=f"comma-separated subset of {','.join(METHODS)}")
    sp.set_defaults(func=cmd_benchmark)

    sp = sub.add_parser("validate", help="validate a configuration file")
    sp.add_argument("--config", required=True)
    sp.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command != "validate" and not Path(args.config).is_file():
            return _fail(EXIT_USAGE, "config", f"config file not found: {args.config}")
        if args.command == "validate" and not Path(args.config).is_file():
            return _fail(EXIT_USAGE, "io", f"cannot read config: {args.config}")
        return args.func(args)
    except UsageError as e:
        return _fail(EXIT_USAGE, "usage", e)
    except ConfigError as e:
        return _fail(EXIT_USAGE, "config", e, violations=e.violations)
    except DataFileError as e:
        return _fail(EXIT_DATA, "data", e, line=e.line)
    except DimensionError as e:
        return _fail(EXIT_DATA, "data", e)
    except RunError as e:
        return _fail(EXIT_NUMERIC, "numerical", e, run=e.run, step=e.step)
    except np.linalg.LinAlgError as e:
        return _fail(EXIT_NUMERIC, "numerical", e, step=getattr(e, "step", None))
    except OSError as e:
        return _fail(EXIT_USAGE, "io", f"{e.strerror or e}: {e.filename or ''}".strip())


if __name__ == "__main__":
    sys.exit(main())
