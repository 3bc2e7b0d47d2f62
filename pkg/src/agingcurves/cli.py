"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd

from . import io
from .config import RunConfig, load_config
from .estimate import estimate
from .evaluation import bootstrap_curves, rmse_by_age, shape_based_distance
from .exceptions import AgingCurveError, DataError, NumericalError
from .imputation import ImputationConfig, impute_panel
from .numerics import AgeGrid
from .panel import observed_fraction_by_age, presets
from .simulation import (SimulationConfig, generate_mask, run_factorial, simulate_masked_panel,
                         simulate_panel, target_counts)
from .validation import check_spec

log = logging.getLogger("agingcurves")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _cutoff(text):
    try:
        month, day = (int(p) for p in text.split("-"))
        return month, day
    except ValueError:
        raise argparse.ArgumentTypeError("expected MM-DD") from None


def _seasons(text):
    try:
        first, last = (int(p) for p in text.split("-"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected FIRST-LAST start years") from None
    if first > last:
        raise argparse.ArgumentTypeError("season range is reversed")
    return first, last


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="root seed (required for stochastic commands)")
    common.add_argument("--config", type=Path, help="TOML run configuration")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    source = argparse.ArgumentParser(add_help=False)
    g = source.add_argument_group("panel source")
    g.add_argument("--panel", type=Path, help="panel CSV (player_id, age, value, observed)")
    g.add_argument("--records", type=Path, help="player-season CSV")
    g.add_argument("--positions", help="comma-separated positions to keep")
    g.add_argument("--min-birth-date", type=io.parse_date)
    g.add_argument("--seasons", type=_seasons, help="inclusive range such as 1988-2019")
    g.add_argument("--age-cutoff", type=_cutoff, default=(1, 31),
                   help="MM-DD reference date for season ages (default 01-31)")
    g.add_argument("--t-min", type=int, default=18)
    g.add_argument("--t-max", type=int, default=40)

    fit = argparse.ArgumentParser(add_help=False)
    fit.add_argument("--spline-df", type=int, default=6)
    fit.add_argument("--boundary-quantile", type=float, default=0.75)
    fit.add_argument("--pool-size", type=int, help="observable pool size (default: rows)")

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--n-players", type=int)
    sim.add_argument("--omega", type=float)
    sim.add_argument("--sigma-gamma", type=float)

    parser = _Parser(prog="agingcurves", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common, sim], help="simulate a panel and its truth")
    p.add_argument("--full-only", action="store_true", help="skip the masked panel")

    p = sub.add_parser("mask", parents=[common], help="apply performance-driven missingness")
    p.add_argument("--panel", type=Path, required=True)

    p = sub.add_parser("estimate", parents=[common, source, fit], help="fit curves")
    p.add_argument("--spec", action="append", help="spec name; repeatable (default: all)")

    p = sub.add_parser("impute", parents=[common, source, fit], help="complete a panel")
    p.add_argument("--spec", default="spline:trunc:fixed")

    p = sub.add_parser("evaluate", parents=[common], help="score curves against a truth")
    p.add_argument("--curves", type=Path, required=True, nargs="+")
    p.add_argument("--truth", type=Path, required=True)

    p = sub.add_parser("sweep", parents=[common], help="factorial simulation study")
    p.add_argument("--replications", type=int, help="override the config")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("bootstrap", parents=[common, source, fit], help="bootstrap curves")
    p.add_argument("--spec", action="append", required=True)
    p.add_argument("-B", "--draws", type=int, default=100)

    sub.add_parser("summary", parents=[common, source], help="observed fraction by age")
    return parser


def _require_seed(args):
    if args.seed is None:
        raise UsageError(f"{args.command} needs --seed")
    return args.seed


def _run_config(args) -> RunConfig:
    return load_config(args.config) if args.config else RunConfig(SimulationConfig())


def _sim_config(args) -> SimulationConfig:
    base = _run_config(args).base
    over = {k: getattr(args, k) for k in ("n_players", "omega", "sigma_gamma")
            if getattr(args, k, None) is not None}
    return replace(base, seed=_require_seed(args), **over)


def _load_panel(args):
    if (args.panel is None) == (args.records is None):
        raise UsageError("give exactly one of --panel or --records")
    grid = AgeGrid(args.t_min, args.t_max)
    if args.panel is not None:
        return io.read_panel(args.panel, grid)
    records = io.load_records(args.records)
    positions = args.positions.split(",") if args.positions else None
    return io.build_panel(records, grid, positions, args.min_birth_date, args.seasons,
                          args.age_cutoff)


def _specs(args, names):
    kw = dict(spline_df=args.spline_df, boundary_quantile=args.boundary_quantile)
    if not names:
        return presets(**kw)
    return [check_spec(n, **kw) for n in names]


def cmd_simulate(args, out):
    config = _sim_config(args)
    rng = np.random.default_rng(config.seed)
    if args.full_only:
        full, truth = simulate_panel(config, rng)
    else:
        masked, full, truth, diag = simulate_masked_panel(config, rng)
        io.write_panel(masked, out / "panel.csv")
    io.write_panel(full, out / "panel_full.csv")
    io.write_truth_curve(truth.true_curve, out / "truth_curve.csv")
    io.write_truth_players(truth, full.player_ids, out / "truth_players.csv")


def cmd_mask(args, out):
    config = _run_config(args).base
    panel = io.read_panel(args.panel, config.grid)
    pi = config.schedule()
    mask, _ = generate_mask(panel, pi, np.random.default_rng(_require_seed(args)))
    io.write_panel(panel.with_mask(mask), out / "panel.csv")
    counts = target_counts(panel.n_players, pi)
    frame = pd.DataFrame({"age": config.grid.ages, "pi": pi, "target_count": counts})
    io.write_frame(frame, out / "mask_counts.csv")


def cmd_estimate(args, out):
    panel = _load_panel(args)
    specs = _specs(args, args.spec)
    stochastic = any(s.data != "obs" for s in specs)
    seed = _require_seed(args) if stochastic else args.seed
    root = np.random.SeedSequence(seed)
    curves = {}
    for i, spec in enumerate(specs):
        rng = np.random.default_rng(np.random.SeedSequence(root.entropy, spawn_key=(i,)))
        curves[spec.name] = estimate(panel, spec, args.pool_size, rng).curve
    io.write_curves(curves, out / "curves.csv")


def cmd_impute(args, out):
    panel = _load_panel(args)
    spec = _specs(args, [args.spec])[0]
    rng = np.random.default_rng(_require_seed(args))
    completed, trace = impute_panel(panel, spec, ImputationConfig.for_spec(spec), rng,
                                    args.pool_size)
    io.write_panel(completed, out / "panel_completed.csv")
    rows, cols = trace.missing_cells
    frame = pd.DataFrame({
        "player_id": [panel.player_ids[r] for r in rows],
        "age": panel.grid.ages[cols],
        "boundary": trace.boundary[cols],
        "first_pass_mean": trace.first_pass_means,
        "second_pass_mean": trace.second_pass_means,
        "imputed": trace.imputed,
    })
    io.write_frame(frame, out / "imputation_trace.csv")


def cmd_evaluate(args, out):
    truth = io.read_truth_curve(args.truth)
    per_spec = {}
    for path in args.curves:
        for name, curve in io.read_curves(path).items():
            per_spec.setdefault(name, []).append(curve)
    rmse_rows, sbd_rows = [], []
    for name in sorted(per_spec):
        curves = per_spec[name]
        for age, v in zip(truth.ages, rmse_by_age(curves, truth)):
            rmse_rows.append((name, int(age), v, len(curves)))
        for i, c in enumerate(curves):
            sbd_rows.append((name, i, shape_based_distance(c, truth)))
    io.write_frame(pd.DataFrame(rmse_rows, columns=["spec", "age", "rmse", "n_curves"]),
                   out / "rmse.csv")
    io.write_frame(pd.DataFrame(sbd_rows, columns=["spec", "curve", "sbd"]), out / "sbd.csv")


def cmd_sweep(args, out):
    if args.config is None:
        raise UsageError("sweep needs --config")
    run = load_config(args.config)
    seed = run.base.seed if args.seed is None else args.seed

    def progress(cell, rep):
        log.info("%s replication %d done", cell.label, rep)

    report = run_factorial(run.base, run.sweep, run.specs, args.replications, seed,
                           progress, n_jobs=args.jobs)
    io.write_frame(report.to_frame(), out / "report.csv")
    io.write_frame(report.rmse_table_by_n(), out / "rmse_by_n.csv")
    io.write_frame(report.sbd_frame(), out / "sbd.csv")
    summary = report.summary()
    summary["seed"] = seed
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")


def cmd_bootstrap(args, out):
    panel = _load_panel(args)
    specs = _specs(args, args.spec)
    root = np.random.SeedSequence(_require_seed(args))
    rows, sd_rows = [], []
    for i, spec in enumerate(specs):
        seq = np.random.SeedSequence(root.entropy, spawn_key=(i,))
        curves = bootstrap_curves(panel, spec, args.draws, seq, args.pool_size)
        ok = [c for c in curves if c is not None]
        for b, c in enumerate(curves):
            if c is None:
                rows.extend((spec.name, b, int(a), None, None) for a in panel.grid.ages)
            else:
                counts = c.support_counts if c.support_counts is not None else [None] * c.grid.K
                rows.extend((spec.name, b, int(a), float(g), None if n is None else int(n))
                            for a, g, n in zip(c.ages, c.g, counts))
        sd = (np.std([c.g for c in ok], axis=0, ddof=1) if len(ok) > 1
              else np.full(panel.grid.K, np.nan))
        sd_rows.extend((spec.name, int(a), v, len(ok)) for a, v in zip(panel.grid.ages, sd))
    io._write(out / "bootstrap_curves.csv", ("spec", "draw", "age", "g_hat", "support_count"),
              rows)
    io.write_frame(pd.DataFrame(sd_rows, columns=["spec", "age", "sd", "n_ok"]),
                   out / "bootstrap_sd.csv")


def cmd_summary(args, out):
    panel = _load_panel(args)
    frame = pd.DataFrame({
        "age": panel.grid.ages,
        "n_observed": panel.observed_count(),
        "n_players": panel.n_players,
        "fraction": observed_fraction_by_age(panel),
    })
    io.write_frame(frame, out / "observed_fraction.csv")


COMMANDS = {
    "simulate": cmd_simulate,
    "mask": cmd_mask,
    "estimate": cmd_estimate,
    "impute": cmd_impute,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "bootstrap": cmd_bootstrap,
    "summary": cmd_summary,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args, args.out)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"agingcurves: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"agingcurves: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, OSError) as exc:
        print(f"agingcurves: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (AgingCurveError, np.linalg.LinAlgError) as exc:
        print(f"agingcurves: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
