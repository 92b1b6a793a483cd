"""Dense symmetric positive-definite kernels used by every other module.

All routines work on plain ``numpy`` arrays. Covariance-like inputs are
expected to be symmetric; LAPACK only reads one triangle, so slight
asymmetry from accumulated rounding is tolerated. Explicit matrix
inversion is never performed; every quadratic form goes through a
triangular solve.
"""

import numpy as np
import scipy.linalg as sla

from .errors import DimensionMismatch, NoConvergence, NotPositiveDefinite

# Jitter added when a covariance fails to factor outright: scales with the
# mean diagonal so it is meaningful for badly conditioned but nonzero
# matrices, with an absolute floor for the all-zero case.
REG_LAMBDA = 1e-9
REG_FLOOR = 1e-30


def cholesky(a: np.ndarray) -> np.ndarray:
    """Lower-triangular factor L with L @ L.T == a.

    Tries the factorization as-is first, so positive-definite inputs are
    reproduced exactly. If that fails, retries once with a small
    trace-scaled diagonal jitter (near-singular structure covariances,
    e.g. from merges of identical points). Raises NotPositiveDefinite if
    the jittered matrix still fails.
    """
    a = np.asarray(a, dtype=float)
    try:
        return sla.cholesky(a, lower=True)
    except sla.LinAlgError:
        pass
    dim = a.shape[0]
    jitter = REG_LAMBDA * (np.trace(a) / dim + REG_FLOOR)
    try:
        return sla.cholesky(a + jitter * np.eye(dim), lower=True)
    except sla.LinAlgError as exc:
        raise NotPositiveDefinite(
            f"matrix of dim {dim} is not positive-definite after regularization"
        ) from exc


def sym_eigen(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix.

    Returns (Q, lam) with orthonormal eigenvector columns and eigenvalues
    sorted in descending order, so a == Q @ diag(lam) @ Q.T.
    """
    a = np.asarray(a, dtype=float)
    try:
        lam, q = sla.eigh(a)
    except sla.LinAlgError as exc:
        raise NoConvergence(f"eigendecomposition failed for dim {a.shape[0]}") from exc
    return np.ascontiguousarray(q[:, ::-1]), lam[::-1]


def solve_norm_sq(chol_lower: np.ndarray, delta: np.ndarray) -> float:
    """Squared norm of L^-1 @ delta, i.e. delta' (LL')^-1 delta.

    Unrolled forward substitution for the tiny dimensions that dominate
    streaming workloads; LAPACK otherwise.
    """
    d = delta.shape[0]
    if d == 1:
        y0 = delta[0] / chol_lower[0, 0]
        return float(y0 * y0)
    if d == 2:
        y0 = delta[0] / chol_lower[0, 0]
        y1 = (delta[1] - chol_lower[1, 0] * y0) / chol_lower[1, 1]
        return float(y0 * y0 + y1 * y1)
    if d == 3:
        y0 = delta[0] / chol_lower[0, 0]
        y1 = (delta[1] - chol_lower[1, 0] * y0) / chol_lower[1, 1]
        y2 = (delta[2] - chol_lower[2, 0] * y0 - chol_lower[2, 1] * y1) / chol_lower[2, 2]
        return float(y0 * y0 + y1 * y1 + y2 * y2)
    y = sla.solve_triangular(chol_lower, delta, lower=True, check_finite=False)
    return float(y @ y)


def solve_norm_sq_many(chol_lower: np.ndarray, deltas: np.ndarray) -> np.ndarray:
    """Row-wise delta' (LL')^-1 delta for an (n, d) array of deltas."""
    y = sla.solve_triangular(chol_lower, deltas.T, lower=True, check_finite=False)
    return np.einsum("ij,ij->j", y, y)


def mahalanobis_sq(x: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> float:
    """(x - mu)' sigma^-1 (x - mu) via Cholesky solve, never inversion.

    An exactly-zero deviation short-circuits to 0 so the center of a
    degenerate (even all-zero) covariance is still handled.
    """
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if x.shape != mu.shape:
        raise _dim_error(x.shape, mu.shape)
    delta = x - mu
    if not np.any(delta):
        return 0.0
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape[0] != delta.shape[0]:
        raise _dim_error(sigma.shape, delta.shape)
    return solve_norm_sq(cholesky(sigma), delta)


def is_psd(a: np.ndarray, tol: float = 0.0) -> bool:
    """True iff the smallest eigenvalue of symmetric a is >= -tol."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return True
    return bool(np.linalg.eigvalsh(a)[0] >= -tol)


def _dim_error(shape_a, shape_b):
    return DimensionMismatch(f"incompatible shapes {shape_a} and {shape_b}")
