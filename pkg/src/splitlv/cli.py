"""Command-line front end: ``splitlv <subcommand> --config PATH``.

Every subcommand writes comma-separated files (header row, LF endings,
shortest round-trip float formatting) into the output directory.  Exit codes:
0 success, 2 configuration or validation error, 3 numerical overflow.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .analysis import moment_supremum, strong_error_studies
from .brownian import generate_path, path_layout
from .config import ExperimentConfig, load_config
from .errors import ConfigError, NonDiagonalGammaError, NumericalOverflow, ParameterError
from .geometry import phase_area_experiment, random_trials
from .integrators import Scheme, integrate_trajectory

log = logging.getLogger("splitlv")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_OVERFLOW = 3

SUBCOMMANDS = ("simulate", "converge", "sympcheck", "moments", "phasearea")


def fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    log.info("wrote %s", path)


def _trajectory_rows(record):
    for k, (x, y) in enumerate(zip(record.xs, record.ys)):
        yield [record.times[k], *x, *y, record.positivity_ok[k]]


def cmd_simulate(cfg: ExperimentConfig, out: Path, workers: int) -> int:
    p, d = cfg.params, cfg.params.d
    header = ["t", *(f"x_{i + 1}" for i in range(d)), *(f"y_{i + 1}" for i in range(d)), "positivity_ok"]
    horizon, level = path_layout(cfg.horizon, min(cfg.h, cfg.h_ref))
    status = EXIT_OK
    for k in range(cfg.simulate_paths):
        path = generate_path(cfg.master_seed, k, horizon, level, p.m)
        runs = [(s.value, s, cfg.h) for s in cfg.schemes] + [("reference", Scheme.STRANG, cfg.h_ref)]
        for label, scheme, h in runs:
            record = integrate_trajectory(p, cfg.initial_state, scheme, h, path, t_end=cfg.horizon)
            write_csv(out / f"trajectory_{label}_{k}.csv", header, _trajectory_rows(record))
            if record.overflow_at is not None:
                log.error("%s overflowed at step %d on path %d", label, record.overflow_at, k)
                status = EXIT_OVERFLOW
            elif not record.positivity_ok.all():
                log.warning("%s left the positive orthant on path %d", label, k)
    return status


def cmd_converge(cfg: ExperimentConfig, out: Path, workers: int) -> int:
    log.info("converge: %d paths, reference h = 2^-%d", cfg.n_paths, cfg.reference_level)
    reports = strong_error_studies(
        cfg.params, cfg.initial_state, cfg.schemes, cfg.step_sizes, cfg.h_ref, cfg.horizon,
        cfg.n_paths, cfg.master_seed, workers=workers,
    )
    summary = []
    for scheme, rep in reports.items():
        write_csv(out / f"converge_{scheme.value}.csv", ["h", "rms_error"], zip(rep.step_sizes, rep.rms_errors))
        summary.append([scheme.value, rep.fitted_slope, rep.fitted_intercept, rep.n_paths, rep.n_excluded,
                        rep.warning, rep.reference_h, rep.master_seed])
        print(f"{scheme.value}: slope={rep.fitted_slope:.4f} intercept={rep.fitted_intercept:.4f} "
              f"paths={rep.n_paths} excluded={rep.n_excluded}")
    write_csv(out / "converge_summary.csv",
              ["scheme", "slope", "intercept", "n_paths", "n_excluded", "warning", "reference_h", "master_seed"],
              summary)
    return EXIT_OK


def cmd_sympcheck(cfg: ExperimentConfig, out: Path, workers: int) -> int:
    sc = cfg.sympcheck
    rows = list(random_trials(cfg.params, cfg.schemes, sc.trials, cfg.master_seed,
                              sc.min_level, sc.max_level, sc.em_level))
    write_csv(out / "sympcheck.csv", ["trial", "scheme", "h", "relative_residual"],
              ([t, s.value, h, r] for t, s, h, r in rows))
    for scheme in cfg.schemes:
        vals = np.array([r for _, s, _, r in rows if s is scheme])
        print(f"{scheme.value}: max relative residual={np.nanmax(vals):.3e} "
              f"undefined={int(np.isnan(vals).sum())}")
    return EXIT_OK


def cmd_moments(cfg: ExperimentConfig, out: Path, workers: int) -> int:
    for scheme in cfg.schemes:
        rep = moment_supremum(cfg.params, cfg.initial_state, scheme, cfg.h, cfg.horizon, cfg.n_paths,
                              cfg.master_seed, cfg.moment_order, workers=workers)
        write_csv(out / f"moments_{scheme.value}.csv", ["t", "moment_x", "moment_y"],
                  zip(rep.times, rep.moment_x, rep.moment_y))
        print(f"{scheme.value}: p={rep.p:g} sup E|X|^p={rep.sup_x:.6g} sup E|Y|^p={rep.sup_y:.6g} "
              f"sigma2_zero={rep.sigma2_zero} excluded={rep.n_excluded}")
    return EXIT_OK


def cmd_phasearea(cfg: ExperimentConfig, out: Path, workers: int) -> int:
    pa = cfg.phase_area
    if pa is None:
        raise ConfigError("config has no phase_area block")
    series = phase_area_experiment(cfg.params, pa.start_states(), cfg.schemes, pa.h, pa.h_ref, pa.horizon,
                                   cfg.master_seed)
    names = [s.value for s in cfg.schemes]
    header = ["t", *(f"S_{n}" for n in names), "S_ref", *(f"err_{n}" for n in names)]
    rows = (
        [t, *(series.areas[s][i] for s in cfg.schemes), series.reference_areas[i],
         *(series.abs_error[s][i] for s in cfg.schemes)]
        for i, t in enumerate(series.times)
    )
    write_csv(out / "phasearea.csv", header, rows)
    for scheme, step in series.overflow_at.items():
        log.warning("%s overflowed at coarse step %d; later areas are NaN", scheme.value, step)
    for scheme in cfg.schemes:
        print(f"{scheme.value}: mean |S_n - S_R| on [6, 10] = {series.mean_abs_error(scheme, 6.0, 10.0):.6g}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "converge": cmd_converge,
    "sympcheck": cmd_sympcheck,
    "moments": cmd_moments,
    "phasearea": cmd_phasearea,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splitlv", description=__doc__.splitlines()[0])
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="experiment JSON file")
    parser.add_argument("--scheme", help="run only this scheme (strang, lie, em)")
    parser.add_argument("--paths", type=int, help="override the number of sample paths")
    parser.add_argument("--seed", type=int, help="override master_seed")
    parser.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--out", help="output directory (default: output_dir from the config)")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config)
        overrides = {"master_seed": args.seed, "output_dir": args.out}
        if args.scheme:
            overrides["schemes"] = (Scheme.parse(args.scheme),)
        if args.paths is not None:
            if args.paths < 1:
                raise ConfigError("--paths must be positive")
            key = "simulate_paths" if args.subcommand == "simulate" else "n_paths"
            overrides[key] = args.paths
        if args.seed is not None and not 0 <= args.seed < 2**63:
            raise ConfigError("--seed must be in [0, 2**63)")
        cfg = cfg.with_overrides(**overrides)
        if args.workers < 1:
            raise ConfigError("--workers must be positive")
        log.info("%s: config %s", args.subcommand, args.config)
        return COMMANDS[args.subcommand](cfg, Path(cfg.output_dir), args.workers)
    except (ConfigError, ParameterError, NonDiagonalGammaError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    except NumericalOverflow as exc:
        log.error("%s", exc)
        return EXIT_OVERFLOW


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
