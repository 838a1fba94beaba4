"""Run configuration: a flat, sectioned key=value text file.

Every key has a default, so an empty (or absent) file is a valid
configuration. Defaults follow the package's reference analysis: damped
linear growth with r=0.95, discounts delta=0.8 / beta=0.95, one-time OAM
drop to delta=0.7 / beta=0.85, and a vague initial belief C0=5I, n0=10,
D0=I with the level row of M0 set from a 5-row warm-up window.

Example::

    [model]
    p = 2
    r = 0.95
    delta = 0.8
    beta = 0.95

    [partition]
    controls = C1,C2
    experimental = E1,E2

    [causal]
    t = 30
    oam_delta = 0.7
    oam_beta = 0.85
    effect_mode = realized-vs-counterfactual
    log_scale = false
    nsamples = 5000
    seed = 0

    [init]
    c0_scale = 5
    n0 = 10
    d0_scale = 1
    warmup = 5

    [simulate]
    q = 4
    qc = 2
    t_total = 60
    t = 30
    shock = 2.0,0.5
    seed = 17
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass

import numpy as np

from .causal import EFFECT_MODES, REALIZED_VS_COUNTERFACTUAL
from .compositional import CompSpec
from .datagen import SimConfig, default_sigma_scale
from .errors import ConfigError
from .mvdlm import ModelSpec

__all__ = ["RunConfig", "load_config"]

_DEFAULTS = {
    "model": {
        "p": "2",
        "r": "0.95",
        "f": "",
        "g": "",
        "delta": "0.8",
        "beta": "0.95",
        "delta_e": "",
        "beta_e": "",
    },
    "partition": {
        "controls": "C1,C2",
        "experimental": "E1,E2",
    },
    "causal": {
        "t": "30",
        "oam_delta": "0.7",
        "oam_beta": "0.85",
        "effect_mode": REALIZED_VS_COUNTERFACTUAL,
        "log_scale": "false",
        "nsamples": "5000",
        "seed": "0",
    },
    "init": {
        "c0_scale": "5",
        "n0": "10",
        "d0_scale": "1",
        "warmup": "5",
    },
    "simulate": {
        "q": "4",
        "qc": "2",
        "r": "0.95",
        "t_total": "60",
        "t": "30",
        "sigma_dof": "4",
        "sigma_scale": "0.5",
        "state_var": "0.01",
        "shock": "2.0,0.5",
        "init_level": "0.0",
        "init_growth": "0.1",
        "seed": "17",
    },
}


def _parse_float(section, key, raw):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a number") from None


def _parse_int(section, key, raw):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not an integer") from None


def _parse_bool(section, key, raw):
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"[{section}] {key} = {raw!r} is not a boolean")


def _parse_floats(section, key, raw):
    try:
        return tuple(float(tok) for tok in raw.split(",") if tok.strip() != "")
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a comma-separated number list") from None


def _parse_matrix(section, key, raw):
    try:
        rows = [
            [float(tok) for tok in line.split(",")]
            for line in raw.split(";")
            if line.strip() != ""
        ]
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a ';'-row matrix") from None
    return np.asarray(rows, dtype=float)


def _parse_names(section, key, raw):
    names = tuple(tok.strip() for tok in raw.split(",") if tok.strip() != "")
    if not names:
        raise ConfigError(f"[{section}] {key} must list at least one series name")
    if len(set(names)) != len(names):
        raise ConfigError(f"[{section}] {key} has duplicate names")
    return names


@dataclass(frozen=True)
class RunConfig:
    """Resolved configuration values for the CLI commands."""

    p: int
    r: float
    F: np.ndarray | None
    G: np.ndarray | None
    delta: float
    beta: float
    delta_e: float
    beta_e: float
    controls: tuple
    experimental: tuple
    t: int
    oam_delta: float
    oam_beta: float
    effect_mode: str
    log_scale: bool
    nsamples: int
    seed: int
    c0_scale: float
    n0: float
    d0_scale: float
    warmup: int
    sim: SimConfig

    def model_spec(self, q: int) -> ModelSpec:
        """Model for q series: explicit F/G when given, else damped trend."""
        if self.F is not None and self.G is not None:
            return ModelSpec(p=self.p, q=q, F=self.F, G=self.G,
                             delta=self.delta, beta=self.beta)
        return ModelSpec.damped_trend(q, r=self.r, delta=self.delta, beta=self.beta)

    def comp_spec(self) -> CompSpec:
        q = len(self.controls) + len(self.experimental)
        return CompSpec(base=self.model_spec(q), qc=len(self.controls),
                        qe=len(self.experimental), delta_e=self.delta_e,
                        beta_e=self.beta_e)

    def echo(self) -> dict:
        """JSON-serializable echo of every resolved value."""
        payload = {}
        for key, value in self.__dict__.items():
            if isinstance(value, np.ndarray):
                payload[key] = value.tolist()
            elif isinstance(value, SimConfig):
                payload[key] = {
                    "q": value.q, "qc": value.qc, "r": value.r,
                    "T_total": value.T_total, "T_intervention": value.T_intervention,
                    "sigma_dof": value.sigma_dof,
                    "sigma_scale": np.asarray(value.sigma_scale).tolist(),
                    "state_var": value.state_var, "shock": list(value.shock),
                    "init_level": list(value.init_level),
                    "init_growth": list(value.init_growth), "seed": value.seed,
                }
            elif isinstance(value, tuple):
                payload[key] = list(value)
            else:
                payload[key] = value
        return payload


def _read_sections(path) -> dict:
    merged = {section: dict(defaults) for section, defaults in _DEFAULTS.items()}
    if path is None:
        return merged
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as handle:
            parser.read_file(handle)
    except (configparser.Error, OSError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    for section in parser.sections():
        if section not in merged:
            raise ConfigError(f"unknown config section [{section}]")
        for key, value in parser.items(section):
            if key not in merged[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            merged[section][key] = value
    return merged


def load_config(path=None) -> RunConfig:
    """Load a configuration file (or the pure defaults when ``path`` is None)."""
    sections = _read_sections(path)
    model = sections["model"]
    part = sections["partition"]
    causal = sections["causal"]
    init = sections["init"]
    sim = sections["simulate"]

    p = _parse_int("model", "p", model["p"])
    r = _parse_float("model", "r", model["r"])
    F = None
    G = None
    if model["f"].strip() or model["g"].strip():
        if not (model["f"].strip() and model["g"].strip()):
            raise ConfigError("[model] f and g must be given together")
        F = np.asarray(_parse_floats("model", "f", model["f"]), dtype=float)
        G = _parse_matrix("model", "g", model["g"])
    delta = _parse_float("model", "delta", model["delta"])
    beta = _parse_float("model", "beta", model["beta"])
    delta_e = _parse_float("model", "delta_e", model["delta_e"]) if model["delta_e"].strip() else delta
    beta_e = _parse_float("model", "beta_e", model["beta_e"]) if model["beta_e"].strip() else beta

    controls = _parse_names("partition", "controls", part["controls"])
    experimental = _parse_names("partition", "experimental", part["experimental"])
    overlap = set(controls) & set(experimental)
    if overlap:
        raise ConfigError(f"series listed as both control and experimental: {sorted(overlap)}")

    effect_mode = causal["effect_mode"].strip()
    if effect_mode not in EFFECT_MODES:
        raise ConfigError(
            f"[causal] effect_mode = {effect_mode!r}; expected one of {EFFECT_MODES}"
        )

    sim_q = _parse_int("simulate", "q", sim["q"])
    sim_qc = _parse_int("simulate", "qc", sim["qc"])
    raw_scale = sim["sigma_scale"].strip()
    if ";" in raw_scale or "," in raw_scale:
        sigma_scale = _parse_matrix("simulate", "sigma_scale", raw_scale)
    else:
        level = _parse_float("simulate", "sigma_scale", raw_scale)
        sigma_scale = default_sigma_scale(sim_q, sim_qc, level=level)
    init_level = _parse_floats("simulate", "init_level", sim["init_level"])
    init_growth = _parse_floats("simulate", "init_growth", sim["init_growth"])
    try:
        sim_config = SimConfig(
            q=sim_q,
            qc=sim_qc,
            r=_parse_float("simulate", "r", sim["r"]),
            T_total=_parse_int("simulate", "t_total", sim["t_total"]),
            T_intervention=_parse_int("simulate", "t", sim["t"]),
            sigma_dof=_parse_float("simulate", "sigma_dof", sim["sigma_dof"]),
            sigma_scale=sigma_scale,
            state_var=_parse_float("simulate", "state_var", sim["state_var"]),
            shock=_parse_floats("simulate", "shock", sim["shock"]),
            init_level=init_level if len(init_level) > 1 else init_level[0],
            init_growth=init_growth if len(init_growth) > 1 else init_growth[0],
            seed=_parse_int("simulate", "seed", sim["seed"]),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid [simulate] section: {exc}") from exc

    config = RunConfig(
        p=p,
        r=r,
        F=F,
        G=G,
        delta=delta,
        beta=beta,
        delta_e=delta_e,
        beta_e=beta_e,
        controls=controls,
        experimental=experimental,
        t=_parse_int("causal", "t", causal["t"]),
        oam_delta=_parse_float("causal", "oam_delta", causal["oam_delta"]),
        oam_beta=_parse_float("causal", "oam_beta", causal["oam_beta"]),
        effect_mode=effect_mode,
        log_scale=_parse_bool("causal", "log_scale", causal["log_scale"]),
        nsamples=_parse_int("causal", "nsamples", causal["nsamples"]),
        seed=_parse_int("causal", "seed", causal["seed"]),
        c0_scale=_parse_float("init", "c0_scale", init["c0_scale"]),
        n0=_parse_float("init", "n0", init["n0"]),
        d0_scale=_parse_float("init", "d0_scale", init["d0_scale"]),
        warmup=_parse_int("init", "warmup", init["warmup"]),
        sim=sim_config,
    )
    _validate(config)
    return config


def _validate(config: RunConfig) -> None:
    for label, value in (("delta", config.delta), ("beta", config.beta),
                         ("delta_e", config.delta_e), ("beta_e", config.beta_e),
                         ("oam_delta", config.oam_delta), ("oam_beta", config.oam_beta)):
        if not 0.0 < value <= 1.0:
            raise ConfigError(f"discount {label} must lie in (0, 1], got {value}")
    if config.t < 2:
        raise ConfigError(f"[causal] t must be > 1, got {config.t}")
    if config.nsamples < 1:
        raise ConfigError(f"[causal] nsamples must be >= 1, got {config.nsamples}")
    if config.warmup < 0:
        raise ConfigError(f"[init] warmup must be >= 0, got {config.warmup}")
    if config.n0 <= 0 or config.c0_scale <= 0 or config.d0_scale <= 0:
        raise ConfigError("[init] c0_scale, n0 and d0_scale must all be > 0")
    if config.F is not None:
        if config.F.shape[0] != config.p or config.G.shape != (config.p, config.p):
            raise ConfigError(
                f"[model] F/G shapes {config.F.shape}/{config.G.shape} do not match p={config.p}"
            )
