"""Shared builders for CLI and acceptance fixtures."""

import os

import numpy as np

from compdlm.datagen import SimConfig, simulate
from compdlm.dataset import write_panel


def make_lift_dataset(path, lift=0.10, seed=101, T_total=42, T=30, noise_scale=2e-6,
                      state_var=1e-6):
    """Write a revenue-like dataset with a planted multiplicative post-T effect.

    A smooth low-noise log-revenue panel is generated with no intervention
    shock; treated revenue is the counterfactual times (1 + lift) from time T
    on. Returns the simulation output (log scale).
    """
    cfg = SimConfig(
        T_total=T_total,
        T_intervention=T,
        shock=(0.0, 0.0),
        sigma_scale=noise_scale * np.eye(4),
        state_var=state_var,
        init_level=0.0,
        init_growth=0.004,
        seed=seed,
    )
    sim = simulate(cfg, np.random.default_rng(seed))
    revenue = np.exp(sim.observed)
    revenue[T - 1 :, cfg.qc :] *= 1.0 + lift
    write_panel(path, np.arange(1, T_total + 1), sim.names, revenue)
    return sim


def write_config(path, **overrides):
    """Write an INI config; overrides are {section: {key: value}}."""
    lines = []
    for section, entries in overrides.items():
        lines.append(f"[{section}]")
        for key, value in entries.items():
            lines.append(f"{key} = {value}")
        lines.append("")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines))
    return path


def read_table(path):
    """Read a quantile table back as (header, list-of-row-lists)."""
    with open(path, encoding="utf-8") as handle:
        rows = [line.rstrip("\n").split(",") for line in handle if line.strip()]
    return rows[0], rows[1:]
