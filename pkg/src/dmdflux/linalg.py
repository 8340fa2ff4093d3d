"""Dense linear-algebra kernels: thin SVD, rank selection, SPD solves."""

from typing import NamedTuple

import numpy as np
import scipy.linalg as sla

from .errors import NotSpdError, SvdError

# Singular values below this fraction of the largest one are treated as zero
# when a pseudo-inverse is applied.
PINV_CUTOFF = 1e-14


class ThinSvd(NamedTuple):
    """Thin singular value decomposition A = U diag(s) Vt."""

    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray


def thin_svd(a: np.ndarray) -> ThinSvd:
    """Thin SVD with orthonormal factors and nonincreasing singular values."""
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise SvdError("matrix contains non-finite entries")
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SvdError(f"SVD did not converge: {exc}") from exc
    return ThinSvd(u, s, vt)


def select_rank(singular_values: np.ndarray, eps: float) -> int:
    """Smallest k whose leading modes capture all but eps of the energy.

    The energy deficit of rank k is 1 - sum_{i<=k} s_i^2 / sum_i s_i^2; the
    returned k is the minimal positive integer with deficit <= eps.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    s = np.asarray(singular_values, dtype=float)
    if s.size == 0 or np.any(np.diff(s) > 0) or np.any(s < 0):
        raise ValueError("singular values must be nonnegative and nonincreasing")
    sq = s * s
    total = sq.sum()
    if total == 0.0:
        raise ValueError("all singular values are zero")
    # Tail sums computed by reversed accumulation stay accurate for the tiny
    # deficits (down to 1e-15) used in practice.
    tails = np.concatenate([np.cumsum(sq[::-1])[::-1][1:], [0.0]])
    deficits = tails / total
    return int(np.argmax(deficits <= eps)) + 1


def energy_deficits(singular_values: np.ndarray) -> np.ndarray:
    """Energy deficit 1 - E_k for every rank k = 1..len(s)."""
    sq = np.asarray(singular_values, dtype=float) ** 2
    tails = np.concatenate([np.cumsum(sq[::-1])[::-1][1:], [0.0]])
    return tails / sq.sum()


def spd_factor(s: np.ndarray) -> np.ndarray:
    """Lower-triangular Cholesky factor L of a symmetric positive definite S."""
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise NotSpdError("matrix must be square")
    scale = np.abs(s).max()
    if scale > 0 and np.abs(s - s.T).max() > 1e-12 * scale:
        raise NotSpdError("matrix is not symmetric")
    try:
        return np.linalg.cholesky(s)
    except np.linalg.LinAlgError as exc:
        raise NotSpdError("matrix not SPD") from exc


def spd_solve(lower: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve S x = rhs given the lower Cholesky factor of S."""
    return sla.cho_solve((lower, True), rhs, check_finite=False)
