"""Matrix-variate distribution kernels.

Inverse Wishart, matrix normal, partitioned inverse Wishart transforms, and
the conditional normal-inverse-Wishart (CNIW) family: sampling and
log-densities. Everything here is a pure function of its arguments and an
explicit ``numpy.random.Generator`` stream.

Inverse-Wishart convention: ``Sigma ~ IW(n, D)`` has density proportional to
``|D|**((n+q-1)/2) |Sigma|**(-(q+n/2)) etr(-inv(Sigma) @ D / 2)`` with
*inverse Wishart* d.o.f. ``n > 0``. The precision ``inv(Sigma)`` is then
Wishart with d.o.f. ``d = n + q - 1``, ``E[Sigma] = D/(n-2)`` for ``n > 2``,
and the harmonic mean of ``Sigma`` is ``D/d``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.special import multigammaln

from ._linalg import as_matrix, chol_spd, frozen_array, symmetrize
from .errors import InputError, InvalidDofError, InvalidScaleError, PartitionError

__all__ = [
    "IwParams",
    "MnParams",
    "PartitionedIw",
    "IwPartitionLaws",
    "GammaPsi",
    "CniwParams",
    "iw_sample",
    "iw_sample_batch",
    "iw_logpdf",
    "mn_sample",
    "mn_logpdf",
    "niw_sample",
    "partition_iw",
    "gamma_psi_from_sigma",
    "cniw_sample",
    "cniw_logpdf",
    "niw_to_cniw",
]

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class IwParams:
    """Inverse-Wishart parameters ``(n, D)`` in the d.o.f. convention above."""

    n: float
    D: np.ndarray

    def __post_init__(self):
        D = as_matrix(self.D, "IW scale D")
        if not np.isfinite(self.n) or self.n <= 0:
            raise InvalidDofError(f"IW d.o.f. n must be > 0, got {self.n}")
        chol_spd(D, name="IW scale D")
        object.__setattr__(self, "n", float(self.n))
        object.__setattr__(self, "D", frozen_array(D))

    @property
    def q(self) -> int:
        return self.D.shape[0]

    @property
    def d(self) -> float:
        """Wishart d.o.f. of the precision matrix, ``n + q - 1``."""
        return self.n + self.q - 1


@dataclass(frozen=True)
class MnParams:
    """Matrix-normal parameters: mean ``M`` (p-by-q), column variance ``C``
    (p-by-p, variance within each column) and row variance ``rowVar``
    (q-by-q, variance within each row); ``cov(vec X) = rowVar (x) C``."""

    M: np.ndarray
    C: np.ndarray
    rowVar: np.ndarray

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.M, dtype=float))
        C = as_matrix(self.C, "MN column variance C")
        rowVar = as_matrix(self.rowVar, "MN row variance")
        if M.shape != (C.shape[0], rowVar.shape[0]):
            raise InputError(
                f"MN mean shape {M.shape} does not conform with C {C.shape} and rowVar {rowVar.shape}"
            )
        chol_spd(C, name="MN column variance C")
        chol_spd(rowVar, name="MN row variance")
        object.__setattr__(self, "M", frozen_array(M))
        object.__setattr__(self, "C", frozen_array(C))
        object.__setattr__(self, "rowVar", frozen_array(rowVar))

    @property
    def p(self) -> int:
        return self.M.shape[0]

    @property
    def q(self) -> int:
        return self.M.shape[1]


@dataclass(frozen=True)
class PartitionedIw:
    """Conformal block view of a symmetric scale matrix.

    Blocks: ``c`` (qc-by-qc), ``e`` (qe-by-qe) and the lower-left
    off-diagonal ``ec`` (qe-by-qc).
    """

    qc: int
    qe: int
    c: np.ndarray
    e: np.ndarray
    ec: np.ndarray

    @classmethod
    def from_scale(cls, d, qc: int) -> "PartitionedIw":
        d = as_matrix(d, "scale")
        q = d.shape[0]
        if not 1 <= qc < q:
            raise PartitionError(f"block size qc={qc} out of range for q={q}")
        return cls(
            qc=qc,
            qe=q - qc,
            c=frozen_array(d[:qc, :qc]),
            e=frozen_array(d[qc:, qc:]),
            ec=frozen_array(d[qc:, :qc]),
        )

    def assembled(self) -> np.ndarray:
        top = np.hstack([self.c, self.ec.T])
        bottom = np.hstack([self.ec, self.e])
        return np.vstack([top, bottom])


@dataclass(frozen=True)
class GammaPsi:
    """Regression matrix ``Gamma = Sigma_ec inv(Sigma_c)`` and conditional
    variance ``Psi = Sigma_e - Sigma_ec inv(Sigma_c) Sigma_ec'``."""

    Gamma: np.ndarray
    Psi: np.ndarray


@dataclass(frozen=True)
class IwPartitionLaws:
    """Implied laws of ``(Sigma_c, Gamma, Psi)`` under ``Sigma ~ IW(n, D)``:
    ``Sigma_c ~ IW(marginal)``, ``Gamma | Psi ~ MN(gamma_mean, Psi,
    gamma_rowvar)`` and ``Psi ~ IW(psi)``."""

    marginal: IwParams
    gamma_mean: np.ndarray
    gamma_rowvar: np.ndarray
    psi: IwParams


@dataclass(frozen=True)
class CniwParams:
    """Conditional normal-inverse-Wishart parameters ``(Z, C_e, s_e, H)``.

    Given a p-by-qc conditioning matrix ``Theta_c``, the law factorizes as
    ``Psi_e ~ IW(s_e, H_e - H_ec inv(H_c) H_ec')``, ``Gamma_e | Psi_e ~
    MN(H_ec inv(H_c), Psi_e, inv(H_c))`` and ``Theta_e | Theta_c, Gamma_e,
    Psi_e ~ MN(Z_e + (Theta_c - Z_c) Gamma_e', C_e, Psi_e)``, where blocks
    are taken at the stored partition size ``qc``.
    """

    Z: np.ndarray
    C_e: np.ndarray
    s_e: float
    H: np.ndarray
    qc: int

    def __post_init__(self):
        Z = np.atleast_2d(np.asarray(self.Z, dtype=float))
        C_e = as_matrix(self.C_e, "CNIW column variance C_e")
        H = as_matrix(self.H, "CNIW scale H")
        q = H.shape[0]
        if Z.shape[1] != q or Z.shape[0] != C_e.shape[0]:
            raise InputError(f"CNIW Z shape {Z.shape} does not conform with C_e/H")
        if not 1 <= self.qc < q:
            raise PartitionError(f"CNIW partition qc={self.qc} out of range for q={q}")
        if not np.isfinite(self.s_e) or self.s_e <= 0:
            raise InvalidDofError(f"CNIW d.o.f. s_e must be > 0, got {self.s_e}")
        chol_spd(C_e, name="CNIW column variance C_e")
        chol_spd(H, name="CNIW scale H")
        object.__setattr__(self, "Z", frozen_array(Z))
        object.__setattr__(self, "C_e", frozen_array(C_e))
        object.__setattr__(self, "s_e", float(self.s_e))
        object.__setattr__(self, "H", frozen_array(H))

    @property
    def p(self) -> int:
        return self.Z.shape[0]

    @property
    def q(self) -> int:
        return self.H.shape[0]

    @property
    def qe(self) -> int:
        return self.q - self.qc

    @property
    def Z_c(self) -> np.ndarray:
        return self.Z[:, : self.qc]

    @property
    def Z_e(self) -> np.ndarray:
        return self.Z[:, self.qc :]


# ---------------------------------------------------------------------------
# inverse Wishart


def _bartlett_lower(d: float, q: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Batch of lower Bartlett factors A with A A' ~ Wishart(d, I)."""
    a = np.zeros((size, q, q))
    rows, cols = np.tril_indices(q, -1)
    if rows.size:
        a[:, rows, cols] = rng.standard_normal((size, rows.size))
    diag_dof = d - np.arange(q)
    idx = np.arange(q)
    a[:, idx, idx] = np.sqrt(rng.chisquare(diag_dof, size=(size, q)))
    return a


def _iw_root_batch(params: IwParams, rng: np.random.Generator, size: int):
    """Draws ``Sigma_i = root_i @ root_i'`` from IW(n, D), no explicit inverse.

    With ``R = chol(D)`` and Bartlett factor ``A_i`` of Wishart(d, I), the
    draw is ``Sigma_i = S_i' S_i`` where ``S_i`` solves ``A_i S_i = R'``.
    Returns ``(sigma, root)`` with shapes (size, q, q); ``root = S'``.
    """
    q = params.q
    r_lower = chol_spd(params.D, name="IW scale D")
    a = _bartlett_lower(params.d, q, size, rng)
    s = np.linalg.solve(a, np.broadcast_to(r_lower.T, (size, q, q)))
    root = np.ascontiguousarray(s.transpose(0, 2, 1))
    sigma = root @ s
    sigma = (sigma + sigma.transpose(0, 2, 1)) / 2.0
    return sigma, root


def iw_sample(params: IwParams, rng: np.random.Generator) -> np.ndarray:
    """One draw from IW(n, D) via the Bartlett decomposition of the precision."""
    q = params.q
    r_lower = chol_spd(params.D, name="IW scale D")
    a = _bartlett_lower(params.d, q, 1, rng)[0]
    s = solve_triangular(a, r_lower.T, lower=True)
    return symmetrize(s.T @ s)


def iw_sample_batch(params: IwParams, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` draws from IW(n, D), shape (size, q, q)."""
    if size < 1:
        raise InputError(f"size must be >= 1, got {size}")
    sigma, _ = _iw_root_batch(params, rng, size)
    return sigma


def iw_logpdf(sigma, params: IwParams, *, strict: bool = False) -> float:
    """Log-density of IW(n, D) at ``sigma``, including the normalizer.

    A non-s.p.d. ``sigma`` yields ``-inf``; with ``strict=True`` it raises
    :class:`InputError` instead.
    """
    sigma = as_matrix(sigma, "sigma")
    q = params.q
    if sigma.shape[0] != q:
        raise InputError(f"sigma has dimension {sigma.shape[0]}, expected {q}")
    try:
        chol_sigma = chol_spd(sigma, jitter=0.0, name="sigma")
    except InvalidScaleError:
        if strict:
            raise InputError("sigma is singular or not positive definite") from None
        return -np.inf
    d = params.d
    chol_d = chol_spd(params.D, name="IW scale D")
    logdet_scale = 2.0 * float(np.sum(np.log(np.diag(chol_d))))
    logdet_sigma = 2.0 * float(np.sum(np.log(np.diag(chol_sigma))))
    trace_term = float(np.trace(cho_solve((chol_sigma, True), params.D)))
    return (
        0.5 * d * logdet_scale
        - 0.5 * d * q * np.log(2.0)
        - multigammaln(0.5 * d, q)
        - 0.5 * (d + q + 1) * logdet_sigma
        - 0.5 * trace_term
    )


# ---------------------------------------------------------------------------
# matrix normal


def mn_sample(params: MnParams, rng: np.random.Generator) -> np.ndarray:
    """Draw ``X = M + L_C E L_R'`` with i.i.d. standard-normal ``E``."""
    chol_c = chol_spd(params.C, name="MN column variance C")
    chol_r = chol_spd(params.rowVar, name="MN row variance")
    noise = rng.standard_normal((params.p, params.q))
    return params.M + chol_c @ noise @ chol_r.T


def mn_logpdf(x, params: MnParams) -> float:
    """Log-density of the matrix normal at ``x``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape != params.M.shape:
        raise InputError(f"x has shape {x.shape}, expected {params.M.shape}")
    p, q = params.p, params.q
    chol_c = chol_spd(params.C, name="MN column variance C")
    chol_r = chol_spd(params.rowVar, name="MN row variance")
    logdet_c = 2.0 * float(np.sum(np.log(np.diag(chol_c))))
    logdet_r = 2.0 * float(np.sum(np.log(np.diag(chol_r))))
    resid = x - params.M
    c_inv_resid = cho_solve((chol_c, True), resid)
    r_inv_residt = cho_solve((chol_r, True), resid.T)
    quad = float(np.sum(r_inv_residt.T * c_inv_resid))
    return -0.5 * (p * q * LOG_2PI + q * logdet_c + p * logdet_r + quad)


def niw_sample(M, C, n: float, D, rng: np.random.Generator):
    """Joint draw ``(Theta, Sigma)`` from NIW(M, C, n, D)."""
    sigma = iw_sample(IwParams(n, D), rng)
    theta = mn_sample(MnParams(M, C, sigma), rng)
    return theta, sigma


# ---------------------------------------------------------------------------
# partitioned inverse Wishart


def _conditional_blocks(scale, qc: int):
    """Blocks plus conditional pieces of a partitioned s.p.d. scale matrix.

    Returns ``(blocks, cond_mean, rowvar_inv, schur)`` where ``cond_mean =
    ec @ inv(c)``, ``rowvar_inv = inv(c)`` and ``schur = e - ec inv(c) ec'``.
    """
    blocks = PartitionedIw.from_scale(scale, qc)
    chol_c = chol_spd(blocks.c, name="partition block c")
    cond_mean = cho_solve((chol_c, True), blocks.ec.T).T
    rowvar_inv = symmetrize(cho_solve((chol_c, True), np.eye(qc)))
    schur = symmetrize(blocks.e - cond_mean @ blocks.ec.T)
    return blocks, cond_mean, rowvar_inv, schur


def partition_iw(params: IwParams, qc: int) -> IwPartitionLaws:
    """Implied laws of ``(Sigma_c, Gamma_e, Psi_e)`` for ``Sigma ~ IW(n, D)``.

    ``Sigma_c ~ IW(n, D_c)``; ``Gamma_e | Psi_e ~ MN(D_ec inv(D_c), Psi_e,
    inv(D_c))``; ``Psi_e ~ IW(n + qc, D_e - D_ec inv(D_c) D_ec')``.
    """
    blocks, cond_mean, rowvar_inv, schur = _conditional_blocks(params.D, qc)
    return IwPartitionLaws(
        marginal=IwParams(params.n, blocks.c),
        gamma_mean=frozen_array(cond_mean),
        gamma_rowvar=frozen_array(rowvar_inv),
        psi=IwParams(params.n + qc, schur),
    )


def gamma_psi_from_sigma(sigma, qc: int) -> GammaPsi:
    """Transform a realized ``Sigma`` into ``(Gamma, Psi)`` at partition qc."""
    _, gamma, _, psi = _conditional_blocks(sigma, qc)
    return GammaPsi(Gamma=frozen_array(gamma), Psi=frozen_array(psi))


def _gamma_psi_batch(sigma: np.ndarray, qc: int):
    """Vectorized ``gamma_psi_from_sigma`` over a (size, q, q) stack."""
    sig_c = sigma[:, :qc, :qc]
    sig_ec = sigma[:, qc:, :qc]
    sig_e = sigma[:, qc:, qc:]
    gamma = np.linalg.solve(sig_c, sig_ec.transpose(0, 2, 1)).transpose(0, 2, 1)
    psi = sig_e - gamma @ sig_ec.transpose(0, 2, 1)
    return gamma, (psi + psi.transpose(0, 2, 1)) / 2.0


# ---------------------------------------------------------------------------
# CNIW family


def cniw_conditional_laws(params: CniwParams):
    """The ``(Psi_e, Gamma_e)`` laws implied by CNIW parameters.

    Returns ``(gamma_mean, gamma_rowvar, psi_params)`` with ``Psi_e ~
    IW(s_e, H_e - H_ec inv(H_c) H_ec')`` (d.o.f. ``s_e`` itself, unlike the
    joint-IW partition) and ``Gamma_e | Psi_e ~ MN(gamma_mean, Psi_e,
    gamma_rowvar)``.
    """
    _, cond_mean, rowvar_inv, schur = _conditional_blocks(params.H, params.qc)
    return cond_mean, rowvar_inv, IwParams(params.s_e, schur)


def cniw_sample(params: CniwParams, theta_c, rng: np.random.Generator):
    """One compositional draw ``(Theta_e, Gamma_e, Psi_e)`` given ``Theta_c``."""
    theta_c = np.atleast_2d(np.asarray(theta_c, dtype=float))
    if theta_c.shape != (params.p, params.qc):
        raise InputError(
            f"theta_c has shape {theta_c.shape}, expected {(params.p, params.qc)}"
        )
    gamma_mean, gamma_rowvar, psi_params = cniw_conditional_laws(params)
    psi = iw_sample(psi_params, rng)
    gamma = mn_sample(MnParams(gamma_mean, psi, gamma_rowvar), rng)
    mean_e = params.Z_e + (theta_c - params.Z_c) @ gamma.T
    theta_e = mn_sample(MnParams(mean_e, params.C_e, psi), rng)
    return theta_e, gamma, psi


def _cniw_sample_batch(params: CniwParams, theta_c: np.ndarray, rng: np.random.Generator):
    """Vectorized CNIW draws given a (size, p, qc) stack of ``Theta_c``.

    Returns ``(theta_e, gamma, psi, psi_root)`` where ``psi_root`` satisfies
    ``Psi_i = psi_root_i @ psi_root_i'`` for reuse by observation samplers.
    """
    size = theta_c.shape[0]
    p, qc, qe = params.p, params.qc, params.qe
    gamma_mean, _, psi_params = cniw_conditional_laws(params)
    psi, psi_root = _iw_root_batch(psi_params, rng, size)
    # Gamma | Psi ~ MN(mean, Psi, inv(H_c)): right factor solves against chol(H_c)'.
    chol_hc = chol_spd(params.H[:qc, :qc], name="CNIW block H_c")
    noise = rng.standard_normal((size, qe, qc))
    right = np.linalg.solve(
        np.broadcast_to(chol_hc.T, (size, qc, qc)), noise.transpose(0, 2, 1)
    ).transpose(0, 2, 1)
    gamma = gamma_mean + psi_root @ right
    chol_ce = chol_spd(params.C_e, name="CNIW column variance C_e")
    mean_e = params.Z_e + (theta_c - params.Z_c) @ gamma.transpose(0, 2, 1)
    theta_e = mean_e + chol_ce @ rng.standard_normal((size, p, qe)) @ psi_root.transpose(0, 2, 1)
    return theta_e, gamma, psi, psi_root


def cniw_logpdf(theta_e, gamma_e, psi_e, params: CniwParams, theta_c) -> float:
    """Log-density of the CNIW law at ``(theta_e, gamma_e, psi_e) | theta_c``."""
    theta_c = np.atleast_2d(np.asarray(theta_c, dtype=float))
    theta_e = np.atleast_2d(np.asarray(theta_e, dtype=float))
    gamma_e = np.atleast_2d(np.asarray(gamma_e, dtype=float))
    psi_e = as_matrix(psi_e, "psi_e")
    gamma_mean, gamma_rowvar, psi_params = cniw_conditional_laws(params)
    out = iw_logpdf(psi_e, psi_params)
    if not np.isfinite(out):
        return out
    out += mn_logpdf(gamma_e, MnParams(gamma_mean, psi_e, gamma_rowvar))
    mean_e = params.Z_e + (theta_c - params.Z_c) @ gamma_e.T
    out += mn_logpdf(theta_e, MnParams(mean_e, params.C_e, psi_e))
    return out


def niw_to_cniw(M, C, n: float, D, qc: int) -> CniwParams:
    """CNIW parameters that reproduce the conditional law of NIW(M, C, n, D).

    The identification is ``Z = M``, ``C_e = C``, ``H = D`` and
    ``s_e = n + qc``: composing these CNIW draws with the marginal
    ``(Theta_c, Sigma_c)`` draws recovers the full NIW joint law.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    D = as_matrix(D, "NIW scale D")
    if not 1 <= qc < D.shape[0]:
        raise PartitionError(f"qc={qc} out of range for q={D.shape[0]}")
    return CniwParams(Z=M, C_e=C, s_e=float(n) + qc, H=D, qc=qc)
