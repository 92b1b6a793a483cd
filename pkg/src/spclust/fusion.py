"""Conservative fusion of two (mean, covariance) pairs with unequal means.

Pooling two covariances is only meaningful when the means agree. When
they differ, each covariance is first padded by the outer product of its
mean's offset from the fused candidate mean, and the padded pair is
combined with a covariance union: whiten one against the other, clamp
the whitened eigenvalues at one, and transform back. The result
dominates both padded inputs in the Loewner order, so the fused
structure's reach covers everything either constituent could explain.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import ArpackError, LinearOperator, eigsh

from . import linalg
from .errors import DimensionMismatch, NoConvergence, NotPositiveDefinite
from .footprint import DecayRates, Footprint, merge_footprints, normalize


@dataclass
class FusedEstimate:
    """Fusion output: candidate mean, fused covariance, and whether the
    union had to fall back to plain pooling."""

    mu: np.ndarray
    sigma: np.ndarray
    cu_fallback: bool = False


def pad_covariance(sigma: np.ndarray, mu: np.ndarray, mu_candidate: np.ndarray) -> np.ndarray:
    """sigma plus the outer product of (mu_candidate - mu)."""
    sigma = np.asarray(sigma, dtype=float)
    mu = np.asarray(mu, dtype=float)
    mu_candidate = np.asarray(mu_candidate, dtype=float)
    if mu.shape != mu_candidate.shape or sigma.shape[0] != mu.shape[0]:
        raise DimensionMismatch(
            f"incompatible shapes {sigma.shape}, {mu.shape}, {mu_candidate.shape}"
        )
    offset = mu_candidate - mu
    return sigma + np.outer(offset, offset)


def covariance_union(u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """Smallest-in-practice covariance dominating both u1 and u2.

    Computes L Q max(Lam, I) Q' L' with L the Cholesky factor of u2 and
    (Q, Lam) the eigendecomposition of the whitened matrix L^-1 u1 L^-T.
    Not symmetric in its arguments; by convention u2 (the factored side)
    is the older structure's padded covariance.
    """
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    if u1.shape != u2.shape:
        raise DimensionMismatch(f"incompatible shapes {u1.shape} and {u2.shape}")

    # Exact shortcuts: if one input dominates the other outright, the
    # union equals the dominant one (all whitened eigenvalues land on one
    # side of the clamp). A plain Cholesky success on the difference is a
    # sufficient and cheap certificate.
    if _is_spd(u2 - u1):
        return u2.copy()
    if _is_spd(u1 - u2):
        return u1.copy()

    chol_old = linalg.cholesky(u2)
    half = sla.solve_triangular(chol_old, u1, lower=True, check_finite=False)
    whitened = sla.solve_triangular(chol_old, half.T, lower=True, check_finite=False)
    whitened = 0.5 * (whitened + whitened.T)
    q, lam = linalg.sym_eigen(whitened)
    transform = chol_old @ q
    fused = (transform * np.maximum(lam, 1.0)) @ transform.T
    return 0.5 * (fused + fused.T)


def _is_spd(a: np.ndarray) -> bool:
    try:
        sla.cholesky(a, lower=True, check_finite=False)
        return True
    except sla.LinAlgError:
        return False


# Slack allowed when certifying the spread floor of the factored side in
# union_absorbing_unit; eigenvalue clamping error stays below this.
_FLOOR_SLACK = 1e-10


def union_absorbing_unit(u2: np.ndarray, offset: np.ndarray,
                         assume_floor: bool = False) -> np.ndarray | None:
    """covariance_union(I + offset offset', u2) without a dense eigensolve.

    When u2 dominates the identity, the whitened matrix is an
    identity-like base plus one rank-one bump, so at most one eigenvalue
    can exceed the clamp; that eigenpair is found with a Lanczos solve
    against the Cholesky factor. Returns None when the certificate or the
    iteration fails, in which case the caller should use the dense path.

    assume_floor skips the spread-floor certificate; pass it only when
    u2 >= (1 - 1e-10) I is structurally guaranteed (the streaming engine
    maintains this for every structure by construction).
    """
    dim = u2.shape[0]
    if dim < 2:
        return None
    if not assume_floor and not _is_spd(u2 - (1.0 - _FLOOR_SLACK) * np.eye(dim)):
        return None

    try:
        chol_old = linalg.cholesky(u2)
    except NotPositiveDefinite:
        return None
    q = sla.solve_triangular(chol_old, offset, lower=True, check_finite=False)

    def matvec(v):
        # base term L^-1 L^-T v: same spectrum as u2^-1, so the spread
        # floor certificate bounds all but the rank-one bump below one
        y = sla.solve_triangular(chol_old.T, v, lower=False, check_finite=False)
        y = sla.solve_triangular(chol_old, y, lower=True, check_finite=False)
        return y + q * (q @ v)

    start = q if np.any(q) else np.ones(dim)
    op = LinearOperator((dim, dim), matvec=matvec, dtype=float)
    try:
        lam, vec = eigsh(op, k=1, which="LA", v0=start, tol=1e-11, maxiter=5000)
    except ArpackError:
        return None
    bump = float(lam[0]) - 1.0
    if bump <= 0.0:
        return u2.copy()
    # scaling z first keeps the outer product bitwise symmetric
    z = (chol_old @ vec[:, 0]) * np.sqrt(bump)
    return u2 + np.outer(z, z)


def fuse(f1: Footprint, f2: Footprint, rates: DecayRates, use_cu: bool = True) -> FusedEstimate:
    """Fuse two footprints into one mean/covariance estimate.

    The candidate mean comes from the damped merge of the accumulators
    (f1 older by convention). With use_cu the covariance is the union of
    the two padded covariances; otherwise, or if the union fails on a
    degenerate input, the pooled merge scatter is used and the fallback
    is flagged for the caller's diagnostics.
    """
    pooled = normalize(merge_footprints(f1, f2, rates), rates)
    if not use_cu:
        return FusedEstimate(mu=pooled.mu, sigma=pooled.sigma)

    s_old = normalize(f1, rates)
    s_new = normalize(f2, rates)
    padded_new = pad_covariance(s_new.sigma, s_new.mu, pooled.mu)
    padded_old = pad_covariance(s_old.sigma, s_old.mu, pooled.mu)
    try:
        sigma = covariance_union(padded_new, padded_old)
    except (NotPositiveDefinite, NoConvergence):
        return FusedEstimate(mu=pooled.mu, sigma=pooled.sigma, cu_fallback=True)
    return FusedEstimate(mu=pooled.mu, sigma=sigma)
