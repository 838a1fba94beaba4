"""Compositional NIW-CNIW filtering.

The control margin carries a standard NIW belief while the experimental
block carries a CNIW belief conditional on the control states. The two
evolve with independent discount pairs, update conjugately on full
observations, and reduce exactly to the standard MVDLM filter when the
discounts match and the initial CNIW parameters are the NIW-implied ones.

Conditional d.o.f. evolution uses the dimension of ``Psi_e`` itself,
``s_e* = beta_e s_e - (1 - beta_e)(qe - 1)``: this is the matrix-beta
deflation for a qe-dimensional variance (Wishart d.o.f. scale exactly by
``beta_e``) and is the unique choice under which the evolved conditional
d.o.f. stays equal to ``n* + qc``, i.e. under which the full-observation
filter reproduces the standard MVDLM trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import chol_spd, frozen_array, symmetrize
from .errors import DegenerateDofError, InputError, ModeError, PartitionError
from .matvar import (
    CniwParams,
    IwParams,
    _cniw_sample_batch,
    _iw_root_batch,
    cniw_conditional_laws,
    niw_to_cniw,
)
from .mvdlm import ModelSpec, NiwState, _evolve_niw, _update_niw

__all__ = [
    "CompSpec",
    "CompState",
    "CompStep",
    "comp_evolve",
    "comp_update_full",
    "comp_update_c_only",
    "comp_forecast_mc",
    "comp_forecast_k_step",
    "comp_filter_run",
]


@dataclass(frozen=True)
class CompSpec:
    """Compositional model: shared structure ``base`` plus the series
    partition (qc controls, qe experimental) and the conditional-branch
    discounts ``delta_e``, ``beta_e``."""

    base: ModelSpec
    qc: int
    qe: int
    delta_e: float
    beta_e: float

    def __post_init__(self):
        if self.qc < 1 or self.qe < 1:
            raise PartitionError(
                f"both blocks need at least one series, got qc={self.qc}, qe={self.qe};"
                " use the plain MVDLM filter for an unpartitioned model"
            )
        if self.qc + self.qe != self.base.q:
            raise PartitionError(
                f"qc + qe = {self.qc + self.qe} does not match q = {self.base.q}"
            )
        for label, value in (("delta_e", self.delta_e), ("beta_e", self.beta_e)):
            if not 0.0 < value <= 1.0:
                raise InputError(f"discount {label} must lie in (0, 1], got {value}")

    @classmethod
    def matched(cls, base: ModelSpec, qc: int) -> "CompSpec":
        """Partitioned spec with conditional discounts equal to the base ones."""
        return cls(base=base, qc=qc, qe=base.q - qc,
                   delta_e=base.delta, beta_e=base.beta)


@dataclass(frozen=True)
class CompState:
    """Recoupled belief: NIW on the control margin, CNIW on the
    experimental conditional."""

    c: NiwState
    e: CniwParams

    def __post_init__(self):
        if self.c.q != self.e.qc:
            raise PartitionError(
                f"control margin has {self.c.q} series but CNIW partition is qc={self.e.qc}"
            )
        if self.c.p != self.e.p:
            raise InputError(
                f"state dimensions disagree: margin p={self.c.p}, conditional p={self.e.p}"
            )

    @property
    def p(self) -> int:
        return self.c.p

    @property
    def q(self) -> int:
        return self.e.q

    @property
    def qc(self) -> int:
        return self.e.qc

    @property
    def qe(self) -> int:
        return self.e.qe

    @classmethod
    def from_niw(cls, state: NiwState, qc: int) -> "CompState":
        """Map a full NIW belief into compositional form (the reduction-mode
        initialization): the c-margin keeps ``(M_c, C, n, D_c)`` and the
        conditional takes the NIW-implied CNIW parameters."""
        margin = NiwState(M=state.M[:, :qc], C=state.C, n=state.n, D=state.D[:qc, :qc])
        return cls(c=margin, e=niw_to_cniw(state.M, state.C, state.n, state.D, qc))


@dataclass(frozen=True)
class CompStep:
    t: int
    prior: CompState
    posterior: CompState


def _evolve_cniw(e: CniwParams, G: np.ndarray, delta_e: float, beta_e: float) -> CniwParams:
    """Discount evolution of the conditional branch: ``Z* = G Z``,
    ``C_e* = G C_e G'/delta_e``, ``s_e* = beta_e s_e - (1-beta_e)(qe-1)``,
    ``H* = beta_e H``."""
    s_star = beta_e * e.s_e - (1.0 - beta_e) * (e.qe - 1)
    if s_star <= 0:
        raise DegenerateDofError(
            f"evolved d.o.f. s_e* = {s_star:.6g} <= 0 (beta_e={beta_e}, s_e={e.s_e}, qe={e.qe})"
        )
    return CniwParams(
        Z=G @ e.Z,
        C_e=symmetrize(G @ e.C_e @ G.T / delta_e),
        s_e=s_star,
        H=beta_e * e.H,
        qc=e.qc,
    )


def _update_cniw(e: CniwParams, F: np.ndarray, y: np.ndarray) -> CniwParams:
    """Conjugate CNIW update on a full observation.

    With ``z' = y' - F'Z*`` (the full q-vector, control entries included)
    and ``A_e = C_e* F / v_e``, ``v_e = 1 + F'C_e*F``: ``Z = Z* + A_e z'``,
    ``C_e = C_e* - A_e A_e' v_e``, ``s_e = s_e* + 1``, ``H = H* + z z'/v_e``.
    """
    z = y - e.Z.T @ F
    v_e = 1.0 + float(F @ e.C_e @ F)
    adaptive = e.C_e @ F / v_e
    return CniwParams(
        Z=e.Z + np.outer(adaptive, z),
        C_e=symmetrize(e.C_e - np.outer(adaptive, adaptive) * v_e),
        s_e=e.s_e + 1.0,
        H=symmetrize(e.H + np.outer(z, z) / v_e),
        qc=e.qc,
    )


def comp_evolve(post: CompState, spec: CompSpec) -> CompState:
    """Evolve both branches to the time t prior.

    The c-margin uses the base discounts with the *full* model dimension q
    in its d.o.f. deflation (its law is the margin of the full matrix-beta
    process); the conditional branch uses ``(delta_e, beta_e)``.
    """
    base = spec.base
    margin = _evolve_niw(post.c, base.G, base.delta, base.beta, base.q)
    return CompState(c=margin, e=_evolve_cniw(post.e, base.G, spec.delta_e, spec.beta_e))


def comp_update_full(prior: CompState, F, y) -> CompState:
    """Posterior on observing the full q-vector ``y``: standard NIW update
    of the c-margin on ``y_c`` plus the CNIW update on the full ``y``."""
    F = np.asarray(F, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != prior.q:
        raise InputError(f"observation has length {y.shape[0]}, expected {prior.q}")
    if not np.all(np.isfinite(y)):
        raise InputError("observation contains non-finite values")
    qc = prior.qc
    return CompState(
        c=_update_niw(prior.c, F, y[:qc]),
        e=_update_cniw(prior.e, F, y),
    )


def comp_update_c_only(prior: CompState, F, y_c) -> CompState:
    """Posterior when only the controls are observed: the c-margin updates
    as usual and the conditional branch is returned unchanged (the time-t
    posterior for the e|c-parameters is the time-t prior)."""
    F = np.asarray(F, dtype=float).reshape(-1)
    y_c = np.asarray(y_c, dtype=float).reshape(-1)
    if y_c.shape[0] != prior.qc:
        raise InputError(f"control observation has length {y_c.shape[0]}, expected {prior.qc}")
    if not np.all(np.isfinite(y_c)):
        raise InputError("observation contains non-finite values")
    return CompState(c=_update_niw(prior.c, F, y_c), e=prior.e)


def _draw_parameters(prior: CompState, rng: np.random.Generator, size: int):
    """Vectorized joint parameter draws from a compositional belief.

    Returns ``(theta_c, root_c, theta_e, gamma, psi_root)`` where
    ``Sigma_c,i = root_c_i root_c_i'`` and ``Psi_i = psi_root_i psi_root_i'``.
    """
    c, e = prior.c, prior.e
    _, root_c = _iw_root_batch(IwParams(c.n, c.D), rng, size)
    chol_col = chol_spd(c.C, name="column variance C")
    noise = rng.standard_normal((size, c.p, c.q))
    theta_c = c.M + chol_col @ noise @ root_c.transpose(0, 2, 1)
    theta_e, gamma, _, psi_root = _cniw_sample_batch(e, theta_c, rng)
    return theta_c, root_c, theta_e, gamma, psi_root


def _draw_observations(F, theta_c, root_c, theta_e, gamma, psi_root,
                       rng: np.random.Generator) -> np.ndarray:
    """Compositional observation draws given parameter draws; (size, q)."""
    size = theta_c.shape[0]
    qc = theta_c.shape[2]
    qe = theta_e.shape[2]
    f_c = np.einsum("npk,p->nk", theta_c, F)
    y_c = f_c + np.einsum("nkj,nj->nk", root_c, rng.standard_normal((size, qc)))
    f_e = np.einsum("npk,p->nk", theta_e, F)
    f_e = f_e + np.einsum("nek,nk->ne", gamma, y_c - f_c)
    y_e = f_e + np.einsum("nej,nj->ne", psi_root, rng.standard_normal((size, qe)))
    return np.hstack([y_c, y_e])


def comp_forecast_mc(prior: CompState, F, nsamples: int, rng: np.random.Generator) -> np.ndarray:
    """Monte-Carlo one-step forecast draws, shape (nsamples, q).

    Each draw samples ``(Theta_c, Sigma_c)`` from the NIW margin,
    ``(Theta_e, Gamma_e, Psi_e)`` from the CNIW conditional, then composes
    ``y_c' ~ N(F'Theta_c, Sigma_c)`` and
    ``y_e' ~ N(F'Theta_e + (y_c' - F'Theta_c)Gamma_e', Psi_e)``.
    """
    if nsamples < 1:
        raise InputError(f"nsamples must be >= 1, got {nsamples}")
    F = np.asarray(F, dtype=float).reshape(-1)
    if F.shape[0] != prior.p:
        raise InputError(f"F has length {F.shape[0]}, expected {prior.p}")
    theta_c, root_c, theta_e, gamma, psi_root = _draw_parameters(prior, rng, nsamples)
    return _draw_observations(F, theta_c, root_c, theta_e, gamma, psi_root, rng)


def comp_forecast_k_step(prior: CompState, spec: CompSpec, k: int, nsamples: int,
                         rng: np.random.Generator, *, vol_policy: str = "fixed") -> np.ndarray:
    """Multi-step forecast draws, shape (k, nsamples, q).

    States propagate through ``Theta_t = G Theta_{t-1} + Omega_t`` with the
    innovation variance materialized from the deterministic filter-side
    recursion: ``C_h = G C_{h-1} G'/delta`` and ``W_h = (1 - delta) C_h``
    (same for the conditional branch with ``delta_e``). Under the default
    ``vol_policy="fixed"`` the variance parameters ``(Sigma_c, Gamma_e,
    Psi_e)`` are drawn once per path and held over the horizon;
    ``vol_policy="redraw"`` re-draws them at each step from the
    discount-deflated laws.
    """
    if k < 1:
        raise InputError(f"horizon k must be >= 1, got {k}")
    if vol_policy not in ("fixed", "redraw"):
        raise ModeError(f"unknown vol_policy {vol_policy!r}; use 'fixed' or 'redraw'")
    base = spec.base
    F, G = base.F, base.G
    cur = prior
    theta_c, root_c, theta_e, gamma, psi_root = _draw_parameters(cur, rng, nsamples)
    out = np.empty((k, nsamples, prior.q))
    out[0] = _draw_observations(F, theta_c, root_c, theta_e, gamma, psi_root, rng)
    col_c = prior.c.C
    col_e = prior.e.C_e
    for h in range(1, k):
        col_c = symmetrize(G @ col_c @ G.T / base.delta)
        col_e = symmetrize(G @ col_e @ G.T / spec.delta_e)
        if vol_policy == "redraw":
            cur = comp_evolve(cur, spec)
            size = nsamples
            _, root_c = _iw_root_batch(IwParams(cur.c.n, cur.c.D), rng, size)
            gamma_mean, _, psi_params = cniw_conditional_laws(cur.e)
            _, psi_root = _iw_root_batch(psi_params, rng, size)
            chol_hc = chol_spd(cur.e.H[: cur.qc, : cur.qc], name="CNIW block H_c")
            noise = rng.standard_normal((size, cur.qe, cur.qc))
            right = np.linalg.solve(
                np.broadcast_to(chol_hc.T, (size, cur.qc, cur.qc)),
                noise.transpose(0, 2, 1),
            ).transpose(0, 2, 1)
            gamma = gamma_mean + psi_root @ right
        drift_c = G @ theta_c
        if base.delta < 1.0:
            w_root = np.sqrt(1.0 - base.delta) * chol_spd(col_c, name="propagated C")
            drift_c = drift_c + w_root @ rng.standard_normal(theta_c.shape) @ root_c.transpose(0, 2, 1)
        new_theta_c = drift_c
        drift_e = G @ theta_e + (new_theta_c - G @ theta_c) @ gamma.transpose(0, 2, 1)
        if spec.delta_e < 1.0:
            we_root = np.sqrt(1.0 - spec.delta_e) * chol_spd(col_e, name="propagated C_e")
            drift_e = drift_e + we_root @ rng.standard_normal(theta_e.shape) @ psi_root.transpose(0, 2, 1)
        theta_c, theta_e = new_theta_c, drift_e
        out[h] = _draw_observations(F, theta_c, root_c, theta_e, gamma, psi_root, rng)
    return out


def comp_filter_run(spec: CompSpec, init: CompState, data) -> list[CompStep]:
    """Evolve/update over fully observed rows; returns the trajectory."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if data.shape[1] != spec.base.q:
        raise InputError(f"data must be T x {spec.base.q}, got {data.shape}")
    steps = []
    state = init
    for t, y in enumerate(data, start=1):
        prior = comp_evolve(state, spec)
        state = comp_update_full(prior, spec.base.F, y)
        steps.append(CompStep(t=t, prior=prior, posterior=state))
    return steps
