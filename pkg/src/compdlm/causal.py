"""Counterfactual engine.

Runs the shared compositional filter up to the intervention, then forks the
conditional branch: the counterfactual branch (e0) thereafter sees only the
control observations, while the outcome adaptive branch (e1) keeps updating
on the realized treated outcomes, with a one-time discount drop at the
intervention step. Both branches condition on the same control margin.
Forecast ensembles, per-step effect ensembles and percent-lift transforms
summarize the causal comparison.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .compositional import (
    CompSpec,
    CompState,
    _draw_parameters,
    _evolve_cniw,
    _update_cniw,
    comp_evolve,
    comp_forecast_k_step,
    comp_forecast_mc,
)
from .errors import InputError, ModeError
from .matvar import CniwParams
from .mvdlm import NiwState, _evolve_niw, _update_niw

__all__ = [
    "REALIZED_VS_COUNTERFACTUAL",
    "PREDICTIVE_VS_PREDICTIVE",
    "EFFECT_MODES",
    "DEFAULT_PROBS",
    "CausalSpec",
    "CausalRun",
    "QuantileSummary",
    "run_causal",
    "predictive_effect",
    "filtered_effect",
    "lift_transform",
    "lookahead_effect",
    "summarize",
]

REALIZED_VS_COUNTERFACTUAL = "realized-vs-counterfactual"
PREDICTIVE_VS_PREDICTIVE = "predictive-vs-predictive"
EFFECT_MODES = (REALIZED_VS_COUNTERFACTUAL, PREDICTIVE_VS_PREDICTIVE)

DEFAULT_PROBS = (0.05, 0.25, 0.5, 0.75, 0.95)


@dataclass(frozen=True)
class CausalSpec:
    """Causal analysis configuration on top of a compositional model.

    ``T`` is the intervention time index (1-based row of the analysis data);
    the experimental columns at t >= T hold realized treated outcomes and
    are fed only to the e1 branch. ``oam_delta``/``oam_beta`` are the
    one-time discounts used in the e1 evolution into time T alone.
    """

    comp: CompSpec
    T: int
    oam_delta: float = 0.7
    oam_beta: float = 0.85
    effect_mode: str = REALIZED_VS_COUNTERFACTUAL
    log_scale: bool = False
    nsamples: int = 5000

    def __post_init__(self):
        if self.T < 2:
            raise InputError(f"intervention time T must be > 1, got {self.T}")
        for label, value in (("oam_delta", self.oam_delta), ("oam_beta", self.oam_beta)):
            if not 0.0 < value <= 1.0:
                raise InputError(f"discount {label} must lie in (0, 1], got {value}")
        if self.effect_mode not in EFFECT_MODES:
            raise ModeError(
                f"unknown effect_mode {self.effect_mode!r}; expected one of {EFFECT_MODES}"
            )
        if self.nsamples < 1:
            raise InputError(f"nsamples must be >= 1, got {self.nsamples}")


@dataclass(frozen=True)
class QuantileSummary:
    """Empirical quantiles of an ensemble: ``values[i, j]`` is the
    ``probs[i]`` quantile of series/column j."""

    probs: tuple
    values: np.ndarray


@dataclass
class CausalRun:
    """Trajectories and Monte-Carlo ensembles from :func:`run_causal`.

    Lists are indexed by time (entry ``t-1`` belongs to time t); ensemble
    dicts are keyed by time. Pre-intervention, the e0 and e1 entries are the
    same objects.
    """

    spec: CausalSpec
    data: np.ndarray
    c_priors: list = field(default_factory=list)
    c_posts: list = field(default_factory=list)
    e0_priors: list = field(default_factory=list)
    e0_posts: list = field(default_factory=list)
    e1_priors: list = field(default_factory=list)
    e1_posts: list = field(default_factory=list)
    forecasts_e0: dict = field(default_factory=dict)
    forecasts_e1: dict = field(default_factory=dict)
    effects: dict = field(default_factory=dict)

    @property
    def n_times(self) -> int:
        return self.data.shape[0]

    @property
    def post_times(self) -> range:
        return range(self.spec.T, self.n_times + 1)

    def prior_state(self, t: int, branch: str = "e0") -> CompState:
        e = self.e0_priors if branch == "e0" else self.e1_priors
        return CompState(c=self.c_priors[t - 1], e=e[t - 1])

    def posterior_state(self, t: int, branch: str = "e0") -> CompState:
        e = self.e0_posts if branch == "e0" else self.e1_posts
        return CompState(c=self.c_posts[t - 1], e=e[t - 1])

    def lift(self) -> dict:
        """Per-time percent-lift ensembles; requires a log-scale model."""
        if not self.spec.log_scale:
            raise ModeError("lift is only defined when the model is on the log scale")
        return {t: lift_transform(draws) for t, draws in self.effects.items()}


def predictive_effect(e1_source, e0_ensemble, mode: str = REALIZED_VS_COUNTERFACTUAL) -> np.ndarray:
    """Effect ensemble ``y_e1 - y_e0`` at one time point.

    In realized-vs-counterfactual mode ``e1_source`` is the realized treated
    vector and each effect draw is ``realized - e0_draw``; in
    predictive-vs-predictive mode it is an e1 forecast ensemble paired with
    the e0 ensemble draw-by-draw.
    """
    e0 = np.atleast_2d(np.asarray(e0_ensemble, dtype=float))
    if e0.size == 0:
        raise InputError("empty counterfactual ensemble")
    if mode == REALIZED_VS_COUNTERFACTUAL:
        realized = np.asarray(e1_source, dtype=float).reshape(-1)
        if realized.shape[0] != e0.shape[1]:
            raise InputError(
                f"realized vector has length {realized.shape[0]}, expected {e0.shape[1]}"
            )
        return realized[None, :] - e0
    if mode == PREDICTIVE_VS_PREDICTIVE:
        e1 = np.atleast_2d(np.asarray(e1_source, dtype=float))
        if e1.size == 0:
            raise InputError("empty treated-branch ensemble")
        if e1.shape != e0.shape:
            raise InputError(f"ensemble shapes differ: {e1.shape} vs {e0.shape}")
        return e1 - e0
    raise ModeError(f"unknown effect mode {mode!r}")


def run_causal(spec: CausalSpec, data, init: CompState, rng: np.random.Generator,
               *, forecast_pre_intervention: bool = True) -> CausalRun:
    """Run the full counterfactual analysis over ``data`` (T_total-by-q).

    Rows before T update a single compositional filter on the full vector.
    From T on: the shared control margin updates on the control block, the
    e0 branch keeps its prior (controls-only updating), and the e1 branch
    updates on the full row, after a one-time dropped-discount evolution
    into time T. One-step forecast ensembles for both branches and effect
    ensembles (per ``spec.effect_mode``) are emitted at each t >= T.
    """
    data = np.atleast_2d(np.asarray(data, dtype=float))
    comp = spec.comp
    base = comp.base
    n_times = data.shape[0]
    if data.shape[1] != base.q:
        raise InputError(f"data must be T x {base.q}, got {data.shape}")
    if spec.T > n_times:
        raise InputError(f"intervention time T={spec.T} exceeds data length {n_times}")
    if not np.all(np.isfinite(data[:, : comp.qc])):
        raise InputError("control columns contain non-finite values")
    if not np.all(np.isfinite(data[:, comp.qc :])):
        raise InputError("experimental columns contain non-finite values")
    if init.q != base.q or init.qc != comp.qc:
        raise InputError("initial state partition does not match the spec")

    e0_rng, e1_rng = rng.spawn(2)
    run = CausalRun(spec=spec, data=data.copy())
    F, G = base.F, base.G
    qc = comp.qc
    c_cur: NiwState = init.c
    e0_cur: CniwParams = init.e
    e1_cur: CniwParams = init.e

    for t in range(1, n_times + 1):
        c_pri = _evolve_niw(c_cur, G, base.delta, base.beta, base.q)
        e0_pri = _evolve_cniw(e0_cur, G, comp.delta_e, comp.beta_e)
        if t < spec.T:
            e1_pri = e0_pri
        elif t == spec.T:
            e1_pri = _evolve_cniw(e1_cur, G, spec.oam_delta, spec.oam_beta)
        else:
            e1_pri = _evolve_cniw(e1_cur, G, comp.delta_e, comp.beta_e)

        if t >= spec.T or forecast_pre_intervention:
            draws0 = comp_forecast_mc(CompState(c=c_pri, e=e0_pri), F, spec.nsamples, e0_rng)
            if t < spec.T:
                draws1 = draws0
            else:
                draws1 = comp_forecast_mc(CompState(c=c_pri, e=e1_pri), F, spec.nsamples, e1_rng)
            run.forecasts_e0[t] = draws0
            run.forecasts_e1[t] = draws1
            if t >= spec.T:
                if spec.effect_mode == REALIZED_VS_COUNTERFACTUAL:
                    source = data[t - 1, qc:]
                else:
                    source = draws1[:, qc:]
                run.effects[t] = predictive_effect(source, draws0[:, qc:], spec.effect_mode)

        y = data[t - 1]
        c_cur = _update_niw(c_pri, F, y[:qc])
        if t < spec.T:
            e0_cur = _update_cniw(e0_pri, F, y)
            e1_cur = e0_cur
        else:
            e0_cur = e0_pri
            e1_cur = _update_cniw(e1_pri, F, y)

        run.c_priors.append(c_pri)
        run.c_posts.append(c_cur)
        run.e0_priors.append(e0_pri)
        run.e0_posts.append(e0_cur)
        run.e1_priors.append(e1_pri)
        run.e1_posts.append(e1_cur)
    return run


def filtered_effect(post: CompState, F, y_c, realized_e1, nsamples: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Filtered causal effect at time t, given the controls-only posterior.

    Parameters are drawn from the time-t posterior, counterfactual outcomes
    from ``y_e0' ~ N(F'Theta_e + (y_c' - F'Theta_c)Gamma_e', Psi_e)`` at the
    observed ``y_c``, and the effect is ``realized - y_e0``.
    """
    if nsamples < 1:
        raise InputError(f"nsamples must be >= 1, got {nsamples}")
    F = np.asarray(F, dtype=float).reshape(-1)
    y_c = np.asarray(y_c, dtype=float).reshape(-1)
    realized = np.asarray(realized_e1, dtype=float).reshape(-1)
    if y_c.shape[0] != post.qc or realized.shape[0] != post.qe:
        raise InputError("conditioning/realized vectors do not match the partition")
    theta_c, _, theta_e, gamma, psi_root = _draw_parameters(post, rng, nsamples)
    f_c = np.einsum("npk,p->nk", theta_c, F)
    mean_e = np.einsum("npk,p->nk", theta_e, F)
    mean_e = mean_e + np.einsum("nek,nk->ne", gamma, y_c[None, :] - f_c)
    y_e0 = mean_e + np.einsum("nej,nj->ne", psi_root,
                              rng.standard_normal((nsamples, post.qe)))
    return realized[None, :] - y_e0


def lift_transform(effect_ensemble) -> np.ndarray:
    """Percent lift ``100 (exp(effect) - 1)`` for log-scale models."""
    draws = np.asarray(effect_ensemble, dtype=float)
    if draws.size == 0:
        raise InputError("empty effect ensemble")
    return 100.0 * np.expm1(draws)


def lookahead_effect(e0_post: CompState, e1_post: CompState, spec: CompSpec, k: int,
                     nsamples: int, rng: np.random.Generator, *,
                     effect_mode: str = PREDICTIVE_VS_PREDICTIVE, realized=None,
                     e1_discounts=None) -> np.ndarray:
    """Multi-horizon effect ensembles from a common forecast origin.

    Both branches are evolved one step and forecast ``k`` steps ahead;
    ``e1_discounts=(delta, beta)`` applies a one-time drop to the e1
    evolution into the first horizon (the later recursion reverts to the
    spec's values). Returns draws of shape (k, nsamples, qe). In
    realized-vs-counterfactual mode ``realized`` must hold the k-by-qe
    treated outcomes over the horizon.
    """
    if effect_mode not in EFFECT_MODES:
        raise ModeError(f"unknown effect mode {effect_mode!r}")
    rng0, rng1 = rng.spawn(2)
    qc = spec.qc
    prior0 = comp_evolve(e0_post, spec)
    draws0 = comp_forecast_k_step(prior0, spec, k, nsamples, rng0)
    if effect_mode == REALIZED_VS_COUNTERFACTUAL:
        realized = np.atleast_2d(np.asarray(realized, dtype=float))
        if realized.shape != (k, spec.qe):
            raise InputError(
                f"realized outcomes must be {k} x {spec.qe}, got {realized.shape}"
            )
        return realized[:, None, :] - draws0[:, :, qc:]
    if e1_discounts is not None:
        drop_delta, drop_beta = e1_discounts
        prior1 = comp_evolve(e1_post, replace(spec, delta_e=drop_delta, beta_e=drop_beta))
    else:
        prior1 = comp_evolve(e1_post, spec)
    draws1 = comp_forecast_k_step(prior1, spec, k, nsamples, rng1)
    return draws1[:, :, qc:] - draws0[:, :, qc:]


def summarize(ensemble, probs=DEFAULT_PROBS) -> QuantileSummary:
    """Empirical per-column quantiles of an ensemble of draws."""
    draws = np.asarray(ensemble, dtype=float)
    if draws.size == 0:
        raise InputError("empty ensemble")
    if draws.ndim == 1:
        draws = draws[:, None]
    probs_arr = np.asarray(probs, dtype=float)
    if probs_arr.ndim != 1 or probs_arr.size == 0:
        raise InputError("probs must be a non-empty 1-D sequence")
    if np.any(probs_arr <= 0) or np.any(probs_arr >= 1) or np.any(np.diff(probs_arr) <= 0):
        raise InputError("probs must be strictly increasing within (0, 1)")
    values = np.quantile(draws, probs_arr, axis=0)
    return QuantileSummary(probs=tuple(float(p) for p in probs_arr), values=values)
