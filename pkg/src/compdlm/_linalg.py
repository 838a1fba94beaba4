"""Dense symmetric-matrix helpers shared by the distribution and filter code."""

from __future__ import annotations

import numpy as np

from .errors import InvalidScaleError

# Smallest acceptable Cholesky pivot, relative to the largest diagonal entry.
PIVOT_RTOL = 1e-10
# One-shot diagonal jitter, relative to the mean diagonal entry (trace / dim).
JITTER_RTOL = 1e-9


def symmetrize(a: np.ndarray) -> np.ndarray:
    """(a + a') / 2, suppressing floating-point asymmetry drift."""
    return (a + a.T) / 2.0


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidScaleError(f"{name} must be square, got shape {a.shape}")
    return a


def _try_cholesky(a: np.ndarray) -> np.ndarray | None:
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return None
    pivots = np.diag(chol) ** 2
    floor = PIVOT_RTOL * max(float(np.max(np.diag(a))), np.finfo(float).tiny)
    if np.min(pivots) <= floor:
        return None
    return chol


def chol_spd(a, *, jitter: float = JITTER_RTOL, name: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor of an s.p.d. matrix.

    The smallest pivot must exceed ``PIVOT_RTOL`` times the largest diagonal
    entry; otherwise a diagonal jitter of ``jitter * trace/dim`` is applied at
    most once before raising :class:`InvalidScaleError`.
    """
    a = as_matrix(a, name)
    chol = _try_cholesky(a)
    if chol is None and jitter > 0:
        bump = jitter * float(np.trace(a)) / a.shape[0]
        if bump > 0:
            chol = _try_cholesky(a + bump * np.eye(a.shape[0]))
    if chol is None:
        raise InvalidScaleError(f"{name} is not symmetric positive definite within tolerance")
    return chol


def is_spd(a) -> bool:
    """True when ``a`` passes the strict (no-jitter) Cholesky pivot check."""
    try:
        chol_spd(a, jitter=0.0)
    except InvalidScaleError:
        return False
    return True


def frozen_array(a, dtype=float) -> np.ndarray:
    """Defensive copy with the writeable flag cleared."""
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out
