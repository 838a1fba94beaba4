"""Standard multivariate DLM forward filter with discount evolution.

The model for a q-vector series ``y_t`` is ``y_t' = F' Theta_t + nu_t'`` with
``nu_t ~ N(0, Sigma_t)`` and ``Theta_t = G Theta_{t-1} + Omega_t``. State
uncertainty is discounted by ``delta`` (so the evolved column variance is
``G C G' / delta``) and the volatility matrix follows the matrix-beta
process implied by discount ``beta``, which maps ``(n, D)`` to
``(beta n - (1 - beta)(q - 1), beta D)`` and preserves the harmonic mean
``D / (n + q - 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from ._linalg import as_matrix, chol_spd, frozen_array, symmetrize
from .errors import (
    CompDlmError,
    DegenerateDofError,
    FilterError,
    InputError,
    InvalidDofError,
)

__all__ = [
    "ModelSpec",
    "NiwState",
    "TForecast",
    "FilterStep",
    "evolve",
    "forecast_one_step",
    "update",
    "filter_run",
    "initial_state",
]


@dataclass(frozen=True)
class ModelSpec:
    """Structural definition: dimensions, regression vector F, transition G,
    and the state/volatility discount factors."""

    p: int
    q: int
    F: np.ndarray
    G: np.ndarray
    delta: float = 0.8
    beta: float = 0.95

    def __post_init__(self):
        F = np.asarray(self.F, dtype=float).reshape(-1)
        G = as_matrix(self.G, "state transition G")
        if F.shape[0] != self.p or G.shape != (self.p, self.p):
            raise InputError(
                f"F/G shapes {F.shape}/{G.shape} do not conform with p={self.p}"
            )
        if self.q < 1:
            raise InputError(f"series count q must be >= 1, got {self.q}")
        for label, value in (("delta", self.delta), ("beta", self.beta)):
            if not 0.0 < value <= 1.0:
                raise InputError(f"discount {label} must lie in (0, 1], got {value}")
        object.__setattr__(self, "F", frozen_array(F))
        object.__setattr__(self, "G", frozen_array(G))

    @classmethod
    def damped_trend(cls, q: int, r: float = 0.95, delta: float = 0.8, beta: float = 0.95):
        """Damped linear growth form: F = (1, 0)', G = [[1, r], [0, r]]."""
        if not 0.0 < r <= 1.0:
            raise InputError(f"damping factor r must lie in (0, 1], got {r}")
        return cls(p=2, q=q, F=np.array([1.0, 0.0]),
                   G=np.array([[1.0, r], [0.0, r]]), delta=delta, beta=beta)


@dataclass(frozen=True)
class NiwState:
    """Matrix normal-inverse Wishart belief ``(M, C, n, D)``: mean M (p-by-k),
    column variance C (p-by-p), d.o.f. n and scale D (k-by-k)."""

    M: np.ndarray
    C: np.ndarray
    n: float
    D: np.ndarray

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.M, dtype=float))
        C = as_matrix(self.C, "column variance C")
        D = as_matrix(self.D, "scale D")
        if M.shape != (C.shape[0], D.shape[0]):
            raise InputError(
                f"state mean shape {M.shape} does not conform with C {C.shape}, D {D.shape}"
            )
        if not np.isfinite(self.n) or self.n <= 0:
            raise InvalidDofError(f"state d.o.f. n must be > 0, got {self.n}")
        chol_spd(C, name="column variance C")
        chol_spd(D, name="scale D")
        object.__setattr__(self, "M", frozen_array(M))
        object.__setattr__(self, "C", frozen_array(C))
        object.__setattr__(self, "n", float(self.n))
        object.__setattr__(self, "D", frozen_array(D))

    @property
    def p(self) -> int:
        return self.M.shape[0]

    @property
    def q(self) -> int:
        return self.M.shape[1]

    def harmonic_mean(self) -> np.ndarray:
        """Harmonic mean ``D / (n + q - 1)`` of the IW component."""
        return self.D / (self.n + self.q - 1)


@dataclass(frozen=True)
class TForecast:
    """One-step multivariate-T forecast: location ``f``, scalar
    ``qscale = 1 + F'C*F``, scale matrix factor ``S = D*/n*`` and d.o.f."""

    f: np.ndarray
    qscale: float
    S: np.ndarray
    dof: float

    def mean(self) -> np.ndarray:
        return np.asarray(self.f)

    def cov(self) -> np.ndarray:
        """Forecast covariance ``qscale * S * dof / (dof - 2)``; needs dof > 2."""
        if self.dof <= 2:
            raise InvalidDofError(f"forecast covariance needs dof > 2, got {self.dof}")
        return self.qscale * self.S * self.dof / (self.dof - 2.0)

    def marginal_quantiles(self, probs) -> np.ndarray:
        """Per-series quantiles of the univariate-t marginals, shape (len(probs), q)."""
        probs = np.asarray(probs, dtype=float)
        scale = np.sqrt(self.qscale * np.diag(self.S))
        return stats.t.ppf(probs[:, None], df=self.dof, loc=self.f[None, :],
                           scale=scale[None, :])


@dataclass(frozen=True)
class FilterStep:
    t: int
    prior: NiwState
    forecast: TForecast
    posterior: NiwState


def _evolve_niw(state: NiwState, G: np.ndarray, delta: float, beta: float,
                dof_dim: int) -> NiwState:
    """Discount evolution of an NIW belief.

    ``dof_dim`` is the series dimension entering the d.o.f. deflation
    ``n* = beta n - (1 - beta)(dof_dim - 1)``; for a margin of a larger model
    it is the parent model's dimension, not the margin's own column count.
    """
    n_star = beta * state.n - (1.0 - beta) * (dof_dim - 1)
    if n_star <= 0:
        raise DegenerateDofError(
            f"evolved d.o.f. n* = {n_star:.6g} <= 0 (beta={beta}, n={state.n}, q={dof_dim})"
        )
    return NiwState(
        M=G @ state.M,
        C=symmetrize(G @ state.C @ G.T / delta),
        n=n_star,
        D=beta * state.D,
    )


def _update_niw(prior: NiwState, F: np.ndarray, y: np.ndarray) -> NiwState:
    """Conjugate observation update of an NIW prior on ``y' = F'Theta + nu'``."""
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != prior.q:
        raise InputError(f"observation has length {y.shape[0]}, expected {prior.q}")
    if not np.all(np.isfinite(y)):
        raise InputError("observation contains non-finite values")
    f = prior.M.T @ F
    qscale = 1.0 + float(F @ prior.C @ F)
    err = y - f
    adaptive = prior.C @ F / qscale
    return NiwState(
        M=prior.M + np.outer(adaptive, err),
        C=symmetrize(prior.C - np.outer(adaptive, adaptive) * qscale),
        n=prior.n + 1.0,
        D=symmetrize(prior.D + np.outer(err, err) / qscale),
    )


def evolve(post: NiwState, spec: ModelSpec) -> NiwState:
    """Evolve a time t-1 posterior to the time t prior.

    ``M* = G M``, ``C* = G C G'/delta``, ``n* = beta n - (1-beta)(q-1)``,
    ``D* = beta D``. The harmonic mean ``D/(n+q-1)`` is preserved exactly.
    """
    if post.q != spec.q:
        raise InputError(f"state has {post.q} series, spec expects {spec.q}")
    return _evolve_niw(post, spec.G, spec.delta, spec.beta, spec.q)


def forecast_one_step(prior: NiwState, F) -> TForecast:
    """Analytic one-step forecast: multivariate T with d.o.f. ``n*``,
    location ``F'M*`` and scale matrix ``qscale * S``."""
    F = np.asarray(F, dtype=float).reshape(-1)
    if F.shape[0] != prior.p:
        raise InputError(f"F has length {F.shape[0]}, expected {prior.p}")
    qscale = 1.0 + float(F @ prior.C @ F)
    return TForecast(
        f=frozen_array(prior.M.T @ F),
        qscale=qscale,
        S=frozen_array(prior.D / prior.n),
        dof=prior.n,
    )


def update(prior: NiwState, F, y) -> NiwState:
    """Observation update: with ``e = y - f`` and ``A = C*F/qscale``,
    ``M = M* + A e'``, ``C = C* - A A' qscale``, ``n = n* + 1`` and
    ``D = D* + e e'/qscale``."""
    F = np.asarray(F, dtype=float).reshape(-1)
    if F.shape[0] != prior.p:
        raise InputError(f"F has length {F.shape[0]}, expected {prior.p}")
    return _update_niw(prior, F, y)


def filter_run(spec: ModelSpec, init: NiwState, data) -> list[FilterStep]:
    """Run evolve -> forecast -> update over the rows of ``data``.

    ``init`` is the time-0 posterior; row t-1 of ``data`` is the time-t
    observation. Step failures are re-raised with the offending time index.
    """
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if data.shape[0] < 1 or data.shape[1] != spec.q:
        raise InputError(f"data must be T x {spec.q} with T >= 1, got {data.shape}")
    steps = []
    state = init
    for t, y in enumerate(data, start=1):
        try:
            prior = evolve(state, spec)
            forecast = forecast_one_step(prior, spec.F)
            state = update(prior, spec.F, y)
        except CompDlmError as exc:
            raise FilterError(f"filter step failed at t={t}: {exc}") from exc
        steps.append(FilterStep(t=t, prior=prior, forecast=forecast, posterior=state))
    return steps


def initial_state(spec: ModelSpec, warmup_rows, *, c0_scale: float = 5.0,
                  n0: float = 10.0, d0_scale: float = 1.0) -> NiwState:
    """Vague initial belief: ``C0 = c0_scale I``, ``D0 = d0_scale I``,
    ``n0`` d.o.f., first row of ``M0`` set to the per-series mean of the
    warm-up rows and the remaining rows zero."""
    warmup_rows = np.atleast_2d(np.asarray(warmup_rows, dtype=float))
    if warmup_rows.shape[1] != spec.q:
        raise InputError(
            f"warm-up rows have {warmup_rows.shape[1]} series, expected {spec.q}"
        )
    if not np.all(np.isfinite(warmup_rows)):
        raise InputError("warm-up rows contain non-finite values")
    m0 = np.zeros((spec.p, spec.q))
    m0[0] = warmup_rows.mean(axis=0)
    return NiwState(M=m0, C=c0_scale * np.eye(spec.p), n=n0, D=d0_scale * np.eye(spec.q))
