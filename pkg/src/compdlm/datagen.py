"""Synthetic data generation and pre-intervention stratification helpers.

``simulate`` produces a damped-linear-growth multivariate panel with a
one-time state shock on the experimental series at the intervention, keeping
the unshocked counterfactual path alongside the treated path.
``svd_stratify`` splits panel units into Hi/Lo groups by their loadings on a
chosen singular factor of the (column-centered) unit-by-time matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._linalg import as_matrix, chol_spd, frozen_array
from .errors import InputError
from .matvar import IwParams, iw_sample

__all__ = [
    "SimConfig",
    "SimOutput",
    "default_sigma_scale",
    "simulate",
    "svd_stratify",
    "aggregate_groups",
]

# Relative singular-value floor below which a factor counts as rank-deficient.
_RANK_RTOL = 1e-10


def default_sigma_scale(q: int, qc: int, *, level: float = 0.5) -> np.ndarray:
    """Default IW scale for the noise-variance draw.

    A correlation-style matrix in which controls and all but the first
    experimental series are strongly dependent (0.6) while the first
    experimental series is only weakly tied to the rest (0.15), scaled by
    ``level``. With the default layout the first experimental series plays
    the weakly-correlated role and the remaining ones the strongly-correlated
    role.
    """
    if not 1 <= qc < q:
        raise InputError(f"qc={qc} out of range for q={q}")
    corr = np.full((q, q), 0.6)
    weak = qc  # first experimental series
    corr[weak, :] = 0.15
    corr[:, weak] = 0.15
    np.fill_diagonal(corr, 1.0)
    return level * corr


@dataclass(frozen=True)
class SimConfig:
    """Generator settings for the damped-linear-growth experiment."""

    q: int = 4
    qc: int = 2
    r: float = 0.95
    T_total: int = 60
    T_intervention: int = 30
    sigma_dof: float = 4.0
    sigma_scale: np.ndarray | None = None
    state_var: float = 0.01
    shock: tuple = (2.0, 0.5)
    init_level: tuple | float = 0.0
    init_growth: tuple | float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.qc < self.q:
            raise InputError(f"qc={self.qc} out of range for q={self.q}")
        if not 0.0 < self.r <= 1.0:
            raise InputError(f"damping factor r must lie in (0, 1], got {self.r}")
        if not 1 <= self.T_intervention < self.T_total:
            raise InputError(
                f"need 1 <= T_intervention < T_total, got {self.T_intervention}, {self.T_total}"
            )
        if self.state_var <= 0:
            raise InputError(f"state_var must be > 0, got {self.state_var}")
        scale = self.sigma_scale
        if scale is None:
            scale = default_sigma_scale(self.q, self.qc)
        scale = as_matrix(scale, "sigma_scale")
        if scale.shape[0] != self.q:
            raise InputError(f"sigma_scale must be {self.q} x {self.q}, got {scale.shape}")
        object.__setattr__(self, "sigma_scale", frozen_array(scale))
        shock = np.asarray(self.shock, dtype=float).reshape(-1)
        if shock.shape[0] != self.qe:
            raise InputError(f"shock must have one scale per experimental series ({self.qe})")
        if np.any(shock < 0):
            raise InputError("shock scales must be non-negative")
        object.__setattr__(self, "shock", tuple(float(s) for s in shock))
        for name in ("init_level", "init_growth"):
            try:
                value = np.broadcast_to(np.asarray(getattr(self, name), dtype=float),
                                        (self.q,)).copy()
            except ValueError as exc:
                raise InputError(f"{name} must be a scalar or length-{self.q} vector") from exc
            object.__setattr__(self, name, tuple(float(v) for v in value))

    @property
    def qe(self) -> int:
        return self.q - self.qc

    @property
    def names(self) -> tuple:
        return tuple(f"C{i + 1}" for i in range(self.qc)) + tuple(
            f"E{i + 1}" for i in range(self.qe)
        )


@dataclass(frozen=True)
class SimOutput:
    """Simulated panel: treated observations, the untreated counterfactual
    experimental path, true states for both paths, and the drawn noise
    variance. Pre-intervention the two paths coincide exactly."""

    config: SimConfig
    observed: np.ndarray          # T_total x q, treated path in experimental columns
    counterfactual_e: np.ndarray  # T_total x qe, untreated experimental outcomes
    treated_e: np.ndarray         # T_total x qe, equal to observed[:, qc:]
    states: np.ndarray            # T_total x p x q, untreated-path states
    states_treated: np.ndarray    # T_total x p x q
    sigma: np.ndarray             # drawn cross-series variance (constant over time)
    shock_draw: np.ndarray        # p x qe state shock applied at the intervention
    names: tuple = field(default=())


def simulate(cfg: SimConfig, rng: np.random.Generator) -> SimOutput:
    """Generate one replicate of the damped-linear-growth experiment.

    States follow ``Theta_t = G Theta_{t-1} + Omega_t`` with
    ``Omega_t ~ MN(0, W, Sigma)`` and observations ``y_t' = F'Theta_t +
    nu_t'`` with ``nu_t ~ N(0, Sigma)``; ``Sigma`` is drawn once from
    ``IW(sigma_dof, sigma_scale)`` and held constant. At the intervention
    the treated path adds an independent normal state shock (per-series
    standard deviations ``cfg.shock``, both state rows) to the experimental
    columns and evolves forward with the same innovations, so the treated
    minus counterfactual difference is the deterministic damped propagation
    of the shock.
    """
    p = 2
    q, qc, qe = cfg.q, cfg.qc, cfg.qe
    G = np.array([[1.0, cfg.r], [0.0, cfg.r]])
    F = np.array([1.0, 0.0])
    sigma = iw_sample(IwParams(cfg.sigma_dof, cfg.sigma_scale), rng)
    sigma_root = chol_spd(sigma, name="drawn sigma")
    w_root = np.sqrt(cfg.state_var) * np.eye(p)

    theta = np.vstack([np.asarray(cfg.init_level), np.asarray(cfg.init_growth)])
    states = np.empty((cfg.T_total, p, q))
    observed = np.empty((cfg.T_total, q))
    for t in range(cfg.T_total):
        innovation = w_root @ rng.standard_normal((p, q)) @ sigma_root.T
        theta = G @ theta + innovation
        noise = sigma_root @ rng.standard_normal(q)
        states[t] = theta
        observed[t] = theta.T @ F + noise

    shock_draw = rng.standard_normal((p, qe)) * np.asarray(cfg.shock)[None, :]
    delta = np.zeros((p, q))
    delta[:, qc:] = shock_draw
    states_treated = states.copy()
    treated_obs = observed.copy()
    offset = delta
    for t in range(cfg.T_intervention - 1, cfg.T_total):
        states_treated[t] = states[t] + offset
        treated_obs[t] = observed[t] + offset.T @ F
        offset = G @ offset

    out_observed = treated_obs.copy()
    out_observed[:, :qc] = observed[:, :qc]
    return SimOutput(
        config=cfg,
        observed=frozen_array(out_observed),
        counterfactual_e=frozen_array(observed[:, qc:]),
        treated_e=frozen_array(treated_obs[:, qc:]),
        states=frozen_array(states),
        states_treated=frozen_array(states_treated),
        sigma=frozen_array(sigma),
        shock_draw=frozen_array(shock_draw),
        names=cfg.names,
    )


def svd_stratify(panel, factor_index: int, *, split: str = "median") -> np.ndarray:
    """Label panel units Hi/Lo by their loading on one singular factor.

    The unit-by-time panel is column-centered (per-time mean across units
    removed) before the singular value decomposition; unit loadings on the
    requested factor (1-based) are split at the median, ties going to Lo.
    """
    panel = np.atleast_2d(np.asarray(panel, dtype=float))
    if panel.shape[0] < 2:
        raise InputError("need at least 2 units to stratify")
    if not np.all(np.isfinite(panel)):
        raise InputError("panel contains non-finite values")
    if split != "median":
        raise InputError(f"unsupported split rule {split!r}")
    if factor_index < 1:
        raise InputError(f"factor_index must be >= 1, got {factor_index}")
    centered = panel - panel.mean(axis=0, keepdims=True)
    u, s, _ = np.linalg.svd(centered, full_matrices=False)
    top = s[0] if s.size else 0.0
    if factor_index > s.size or s[factor_index - 1] <= _RANK_RTOL * max(top, 1e-300):
        raise InputError(
            f"factor {factor_index} exceeds the effective rank of the centered panel"
        )
    loadings = u[:, factor_index - 1] * s[factor_index - 1]
    cutoff = np.median(loadings)
    return np.where(loadings > cutoff, "Hi", "Lo")


def aggregate_groups(panel, labels):
    """Per-group per-time arithmetic means of panel units.

    Returns ``(group_names, means)`` with groups in sorted label order and
    ``means`` of shape (n_groups, n_times).
    """
    panel = np.atleast_2d(np.asarray(panel, dtype=float))
    labels = np.asarray(labels)
    if labels.shape[0] != panel.shape[0]:
        raise InputError(
            f"got {labels.shape[0]} labels for {panel.shape[0]} units; every unit needs one"
        )
    groups = sorted(set(labels.tolist()))
    means = np.empty((len(groups), panel.shape[1]))
    for i, group in enumerate(groups):
        members = panel[labels == group]
        if members.shape[0] == 0:
            raise InputError(f"group {group!r} has no units")
        means[i] = members.mean(axis=0)
    return groups, means
