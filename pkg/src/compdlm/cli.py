"""Command-line interface.

Subcommands::

    compdlm simulate --config cfg.ini --out DIR [--seed N]
    compdlm stratify --data units.csv --factor 2 --out DIR
    compdlm causal   --config cfg.ini --data panel.csv --out DIR [--seed N] [--samples N]
    compdlm filter   --config cfg.ini --data panel.csv --out DIR

All commands are deterministic given (inputs, config, seed) and write
plot-ready CSV tables plus a JSON manifest sufficient to reproduce them.
Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
error.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .causal import DEFAULT_PROBS, CausalSpec, run_causal
from .compositional import CompState
from .config import RunConfig, load_config
from .datagen import simulate, svd_stratify
from .dataset import (
    load_dataset,
    load_unit_panel,
    write_csv,
    write_json,
    write_labels,
    write_panel,
)
from .errors import (
    ConfigError,
    DataError,
    FilterError,
    InputError,
    InvalidDofError,
    InvalidScaleError,
)
from .mvdlm import NiwState, filter_run, initial_state

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

_PROB_COLUMNS = [f"p{int(round(100 * p)):02d}" for p in DEFAULT_PROBS]


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _initial_comp_state(config: RunConfig, values: np.ndarray, qc: int) -> CompState:
    q = values.shape[1]
    spec = config.model_spec(q)
    if config.warmup > 0:
        init = initial_state(spec, values[: config.warmup], c0_scale=config.c0_scale,
                             n0=config.n0, d0_scale=config.d0_scale)
    else:
        init = NiwState(M=np.zeros((spec.p, q)), C=config.c0_scale * np.eye(spec.p),
                        n=config.n0, D=config.d0_scale * np.eye(q))
    return CompState.from_niw(init, qc)


def _quantile_rows(ensembles, times, series_names, column_offset=0, transform=None):
    """Long-format quantile rows (time, series, p05..p95) from draw dicts."""
    rows = []
    for t in sorted(ensembles):
        draws = ensembles[t]
        for j, name in enumerate(series_names):
            values = np.quantile(draws[:, column_offset + j], DEFAULT_PROBS)
            if transform is not None:
                values = transform(values)
            rows.append([int(times[t - 1]), name, *[float(v) for v in values]])
    return rows


def _write_table(path, rows):
    write_csv(path, ["time", "series", *_PROB_COLUMNS], rows)


def cmd_simulate(args) -> int:
    config = load_config(args.config)
    sim_cfg = config.sim
    if args.seed is not None:
        sim_cfg = replace(sim_cfg, seed=args.seed)
    rng = np.random.default_rng(sim_cfg.seed)
    out = simulate(sim_cfg, rng)
    os.makedirs(args.out, exist_ok=True)
    times = np.arange(1, sim_cfg.T_total + 1)
    observed_path = os.path.join(args.out, "observed.csv")
    counterfactual_path = os.path.join(args.out, "counterfactual.csv")
    truth_path = os.path.join(args.out, "truth.json")
    write_panel(observed_path, times, out.names, out.observed)
    write_panel(counterfactual_path, times, out.names[sim_cfg.qc :], out.counterfactual_e)
    write_json(truth_path, {
        "version": __version__,
        "seed": sim_cfg.seed,
        "sigma": out.sigma.tolist(),
        "sigma_scale": np.asarray(sim_cfg.sigma_scale).tolist(),
        "shock_scales": list(sim_cfg.shock),
        "shock_draw": out.shock_draw.tolist(),
        "intervention_time": sim_cfg.T_intervention,
        "config": config.echo()["sim"],
    })
    print(f"wrote {observed_path}, {counterfactual_path}, {truth_path}")
    return EXIT_OK


def cmd_stratify(args) -> int:
    units, values = load_unit_panel(args.data)
    labels = svd_stratify(values, args.factor)
    os.makedirs(args.out, exist_ok=True)
    labels_path = os.path.join(args.out, "labels.csv")
    write_labels(labels_path, units, labels)
    print(f"wrote {labels_path}")
    return EXIT_OK


def cmd_causal(args) -> int:
    config = load_config(args.config)
    seed = args.seed if args.seed is not None else config.seed
    nsamples = args.samples if args.samples is not None else config.nsamples
    panel = load_dataset(args.data, log_scale=config.log_scale)
    names = config.controls + config.experimental
    panel = panel.reordered(names)
    qc = len(config.controls)
    warmup = config.warmup
    if warmup >= panel.n_times:
        raise DataError(f"warm-up window ({warmup} rows) consumes the whole dataset")
    values = panel.values[warmup:]
    times = panel.times[warmup:]
    positions = np.nonzero(times == config.t)[0]
    if positions.size == 0:
        raise DataError(
            f"intervention time t={config.t} is not in the analysis window "
            f"(times {int(times[0])}..{int(times[-1])})"
        )
    t_pos = int(positions[0]) + 1
    spec = CausalSpec(
        comp=config.comp_spec(),
        T=t_pos,
        oam_delta=config.oam_delta,
        oam_beta=config.oam_beta,
        effect_mode=config.effect_mode,
        log_scale=config.log_scale,
        nsamples=nsamples,
    )
    init = _initial_comp_state(config, panel.values, qc)
    rng = np.random.default_rng(seed)
    run = run_causal(spec, values, init, rng)

    os.makedirs(args.out, exist_ok=True)
    e_names = config.experimental
    # Forecast tables are reported on the data's original scale.
    unlog = np.exp if config.log_scale else None
    outputs = {}
    outputs["counterfactual_forecast.csv"] = _quantile_rows(
        run.forecasts_e0, times, e_names, column_offset=qc, transform=unlog)
    outputs["oam_forecast.csv"] = _quantile_rows(
        run.forecasts_e1, times, e_names, column_offset=qc, transform=unlog)
    outputs["effect.csv"] = _quantile_rows(run.effects, times, e_names)
    if config.log_scale:
        outputs["lift.csv"] = _quantile_rows(run.lift(), times, e_names)
    for filename, rows in outputs.items():
        _write_table(os.path.join(args.out, filename), rows)
    manifest_path = os.path.join(args.out, "manifest.json")
    write_json(manifest_path, {
        "command": "causal",
        "version": __version__,
        "seed": seed,
        "nsamples": nsamples,
        "effect_mode": config.effect_mode,
        "log_scale": config.log_scale,
        "warmup_rows": warmup,
        "intervention_time": config.t,
        "intervention_row": t_pos,
        "series_order": list(names),
        "data": {"path": os.path.abspath(args.data), "sha256": _sha256(args.data)},
        "config": config.echo(),
        "outputs": sorted(outputs),
    })
    print(f"wrote {', '.join(sorted(outputs))}, manifest.json in {args.out}")
    return EXIT_OK


def cmd_filter(args) -> int:
    config = load_config(args.config)
    panel = load_dataset(args.data, log_scale=config.log_scale)
    spec = config.model_spec(panel.n_series)
    warmup = config.warmup
    if warmup >= panel.n_times:
        raise DataError(f"warm-up window ({warmup} rows) consumes the whole dataset")
    if warmup > 0:
        init = initial_state(spec, panel.values[:warmup], c0_scale=config.c0_scale,
                             n0=config.n0, d0_scale=config.d0_scale)
    else:
        init = NiwState(M=np.zeros((spec.p, panel.n_series)),
                        C=config.c0_scale * np.eye(spec.p), n=config.n0,
                        D=config.d0_scale * np.eye(panel.n_series))
    steps = filter_run(spec, init, panel.values[warmup:])
    times = panel.times[warmup:]
    rows = []
    for step in steps:
        quantiles = step.forecast.marginal_quantiles(DEFAULT_PROBS)
        if config.log_scale:
            quantiles = np.exp(quantiles)
        for j, name in enumerate(panel.names):
            rows.append([int(times[step.t - 1]), name,
                         *[float(v) for v in quantiles[:, j]]])
    os.makedirs(args.out, exist_ok=True)
    table_path = os.path.join(args.out, "filter_forecast.csv")
    _write_table(table_path, rows)
    manifest_path = os.path.join(args.out, "manifest.json")
    write_json(manifest_path, {
        "command": "filter",
        "version": __version__,
        "warmup_rows": warmup,
        "log_scale": config.log_scale,
        "data": {"path": os.path.abspath(args.data), "sha256": _sha256(args.data)},
        "config": config.echo(),
        "outputs": ["filter_forecast.csv"],
    })
    print(f"wrote {table_path}, {manifest_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="compdlm",
        description="Compositional dynamic linear models for counterfactual causal prediction.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic intervention experiment")
    sim.add_argument("--config", default=None, help="configuration file (defaults used if omitted)")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--seed", type=int, default=None, help="override the configured seed")
    sim.set_defaults(func=cmd_simulate)

    strat = sub.add_parser("stratify", help="median-split units by a singular-factor loading")
    strat.add_argument("--data", required=True, help="units-by-time panel CSV")
    strat.add_argument("--factor", type=int, default=2, help="1-based singular factor index")
    strat.add_argument("--out", required=True, help="output directory")
    strat.set_defaults(func=cmd_stratify)

    causal = sub.add_parser("causal", help="run the counterfactual/OAM causal analysis")
    causal.add_argument("--config", default=None, help="configuration file")
    causal.add_argument("--data", required=True, help="dataset CSV (time + series columns)")
    causal.add_argument("--out", required=True, help="output directory")
    causal.add_argument("--seed", type=int, default=None, help="override the configured seed")
    causal.add_argument("--samples", type=int, default=None, help="Monte-Carlo draws per step")
    causal.set_defaults(func=cmd_causal)

    filt = sub.add_parser("filter", help="plain MVDLM filter diagnostics")
    filt.add_argument("--config", default=None, help="configuration file")
    filt.add_argument("--data", required=True, help="dataset CSV (time + series columns)")
    filt.add_argument("--out", required=True, help="output directory")
    filt.set_defaults(func=cmd_filter)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"compdlm: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvalidScaleError, InvalidDofError, FilterError) as exc:
        print(f"compdlm: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except InputError as exc:
        print(f"compdlm: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"compdlm: i/o error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
