"""Penalized precision estimation.

graphical_lasso maximizes, over positive definite Theta,

    n log det Theta - n tr(Theta S) - lam1 * sum_{i != j} |theta_ij|

and joint_graphical_lasso couples K such problems with a fused penalty
lam2 * sum_{k<k'} sum_{i,j} |theta_k,ij - theta_k',ij| (all entries,
diagonal included, while the lam1 sparsity term keeps skipping the
diagonal). Both use ADMM with an eigendecomposition-based likelihood step
and an exact proximal step for the penalty.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import NotComputableError
from .robust import GroupSummaries
from .validation import check_square, symmetrize

__all__ = [
    "SolverOptions",
    "PrecisionSet",
    "fused_prox",
    "graphical_lasso",
    "joint_graphical_lasso",
    "rda_covariances",
    "invert_pd",
]


@dataclass(frozen=True)
class SolverOptions:
    """ADMM controls. tol bounds the max absolute primal and dual residuals."""

    tol: float = 1e-5
    max_iter: int = 500
    admm_penalty: float = 1.0
    zero_tol: float = 1e-8

    def __post_init__(self):
        if self.tol <= 0 or self.max_iter < 1 or self.admm_penalty <= 0:
            raise ValueError("tol, max_iter and admm_penalty must be positive")


@dataclass(frozen=True)
class PrecisionSet:
    """K precision matrices plus how they were obtained."""

    matrices: np.ndarray      # (K, p, p)
    method: str               # sample | gl_lda | gl_qda | jgl | rda
    regularization: dict
    converged: bool = True
    iterations: int = 0

    @property
    def k(self):
        return self.matrices.shape[0]

    @property
    def p(self):
        return self.matrices.shape[1]


def invert_pd(mat):
    """Invert a symmetric positive definite matrix via Cholesky.

    Returns (inverse, log_det). Raises NotComputableError("not computable")
    when the factorization fails, which is the NA case downstream.
    """
    mat = symmetrize(check_square(mat))
    try:
        chol, low = scipy.linalg.cho_factor(mat, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError:
        raise NotComputableError("not computable") from None
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    inv = scipy.linalg.cho_solve((chol, low), np.eye(mat.shape[0]), check_finite=False)
    return symmetrize(inv), log_det


def _chol_logdet(mat):
    # log det of a symmetric PD matrix, NotComputableError if not PD
    try:
        chol = np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        raise NotComputableError("not computable") from None
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


# ---------------------------------------------------------------------------
# fused proximal operator
# ---------------------------------------------------------------------------

def _isotonic_stack(w):
    # Exact L2 isotonic regression along the last axis using the max-min
    # representation z_j = max_{i<=j} min_{l>=j} mean(w[i..l]).
    m, size = w.shape
    if size == 1:
        return w.copy()
    cs = np.zeros((m, size + 1))
    np.cumsum(w, axis=1, out=cs[:, 1:])
    idx = np.arange(size)
    length = idx[None, :] - idx[:, None] + 1.0
    np.maximum(length, 1.0, out=length)            # below-diagonal junk, never read
    seg = (cs[:, None, 1:] - cs[:, :size, None]) / length
    rev_min = np.minimum.accumulate(seg[:, :, ::-1], axis=2)[:, :, ::-1]
    cum_max = np.maximum.accumulate(rev_min, axis=1)
    return cum_max[:, idx, idx]


def _fused_prox_stack(v, fusion, sparsity):
    # v: (m, K) rows solved independently; sparsity: (m,) per-row L1 weight.
    m, k = v.shape
    if fusion < 0 or np.any(sparsity < 0):
        raise ValueError("penalty weights must be non-negative")
    order = np.argsort(v, axis=1, kind="stable")
    vs = np.take_along_axis(v, order, axis=1)
    if fusion > 0 and k > 1:
        # with coordinates sorted, the all-pairs fusion term is linear:
        # coefficient of the j-th smallest coordinate is fusion*(2j - K - 1)
        offsets = fusion * (2.0 * np.arange(1, k + 1) - k - 1.0)
        zs = _isotonic_stack(vs - offsets)
    else:
        zs = vs
    z = np.empty_like(v)
    np.put_along_axis(z, order, zs, axis=1)
    return np.sign(z) * np.maximum(np.abs(z) - sparsity[:, None], 0.0)


def fused_prox(values, fusion, sparsity):
    """Exact minimizer of 0.5*||z - v||^2 + sparsity*sum|z_k|
    + fusion*sum_{k<k'} |z_k - z_k'| over z in R^K."""
    v = np.atleast_1d(np.asarray(values, dtype=np.float64))
    if v.ndim != 1:
        raise ValueError("values must be a vector")
    out = _fused_prox_stack(v[None, :], float(fusion), np.array([float(sparsity)]))
    return out[0]


# ---------------------------------------------------------------------------
# graphical lasso (single matrix)
# ---------------------------------------------------------------------------

def _prepare_cov(S, p_name="S"):
    S = symmetrize(check_square(S, p_name))
    if np.any(np.diag(S) <= 0):
        raise ValueError(f"{p_name} must have a strictly positive diagonal")
    return S


def _zero_threshold(Z, zero_tol):
    out = Z.copy()
    out[np.abs(out) < zero_tol] = 0.0
    if out.ndim == 2:
        return symmetrize(out)
    return (out + out.transpose(0, 2, 1)) / 2.0


def _gl_admm(S, n, lam1, opts, state=None):
    # core ADMM loop; returns the raw (Z, U) state for warm restarts
    p = S.shape[0]
    # rho scales with the likelihood weight so the step sizes match the
    # curvature of n * (tr - log det)
    rho = opts.admm_penalty * n
    if state is None:
        Z = np.diag(1.0 / np.diag(S))
        U = np.zeros_like(S)
    else:
        Z, U = (np.array(a, dtype=np.float64) for a in state)
    off = ~np.eye(p, dtype=bool)
    thr = lam1 / rho
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        # likelihood step: rho*Theta - n*Theta^{-1} = rho*(Z - U) - n*S,
        # solved in closed form in the eigenbasis of the right-hand side
        es, Q = np.linalg.eigh(rho * (Z - U) - n * S)
        xi = (es + np.sqrt(es * es + 4.0 * rho * n)) / (2.0 * rho)
        theta = symmetrize((Q * xi) @ Q.T)
        # penalty step: soft threshold off-diagonal entries
        Z_prev = Z
        A = theta + U
        Z = A.copy()
        Z[off] = np.sign(A[off]) * np.maximum(np.abs(A[off]) - thr, 0.0)
        U = U + theta - Z
        primal = np.max(np.abs(theta - Z))
        dual = rho * np.max(np.abs(Z - Z_prev))
        if primal < opts.tol and dual < opts.tol:
            converged = True
            break
    return Z, U, converged, it


def graphical_lasso(S, n, lam1, opts=None, warm_start=None):
    """Penalized Gaussian likelihood precision estimate for one matrix.

    Parameters
    ----------
    S : (p, p) symmetric covariance input, any symmetric matrix with a
        positive diagonal (positive definiteness is not required).
    n : sample weight multiplying the likelihood part.
    lam1 : off-diagonal L1 penalty, >= 0.
    opts : SolverOptions.
    warm_start : optional (Z, U) pair from a previous solve.

    Returns
    -------
    (theta, converged, iterations) where theta carries exact zeros below
    opts.zero_tol. With lam1 = 0 the unpenalized inverse is returned and a
    singular S raises NotComputableError("regularization required").
    """
    opts = opts or SolverOptions()
    S = _prepare_cov(S)
    n = float(n)
    if n <= 0:
        raise ValueError("n must be positive")
    if lam1 < 0:
        raise ValueError("lam1 must be non-negative")
    if lam1 == 0:
        try:
            theta, _ = invert_pd(S)
        except NotComputableError:
            raise NotComputableError("regularization required") from None
        return theta, True, 0
    Z, U, converged, it = _gl_admm(S, n, lam1, opts, warm_start)
    return _zero_threshold(Z, opts.zero_tol), converged, it


# ---------------------------------------------------------------------------
# joint graphical lasso (K matrices with fusion)
# ---------------------------------------------------------------------------

def _jgl_admm(S, n, lam1, lam2, opts, state=None):
    k, p = S.shape[0], S.shape[1]
    rho = opts.admm_penalty * float(np.mean(n))
    if state is None:
        Z = np.stack([np.diag(1.0 / np.diag(S[g])) for g in range(k)])
        U = np.zeros_like(S)
    else:
        Z, U = (np.array(a, dtype=np.float64) for a in state)
    iu = np.triu_indices(p)
    sparsity = np.where(iu[0] == iu[1], 0.0, lam1 / rho)
    fusion = lam2 / rho
    nk = n[:, None, None]
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        es, Q = np.linalg.eigh(rho * (Z - U) - nk * S)
        xi = (es + np.sqrt(es * es + 4.0 * rho * n[:, None])) / (2.0 * rho)
        theta = Q @ (xi[:, :, None] * Q.transpose(0, 2, 1))
        theta = (theta + theta.transpose(0, 2, 1)) / 2.0
        Z_prev = Z
        A = theta + U
        v = A[:, iu[0], iu[1]].T                     # (positions, K)
        zs = _fused_prox_stack(v, fusion, sparsity).T
        Z = np.zeros_like(A)
        Z[:, iu[0], iu[1]] = zs
        Z[:, iu[1], iu[0]] = zs
        U = U + theta - Z
        primal = np.max(np.abs(theta - Z))
        dual = rho * np.max(np.abs(Z - Z_prev))
        if primal < opts.tol and dual < opts.tol:
            converged = True
            break
    return Z, U, converged, it


def joint_graphical_lasso(S_list, n_list, lam1, lam2, opts=None, warm_start=None):
    """Fused joint precision estimation across K >= 2 groups.

    The sparsity penalty lam1 skips diagonals; the fusion penalty lam2
    applies to every entry including diagonals. Returns
    (thetas, converged, iterations) with thetas of shape (K, p, p).
    """
    opts = opts or SolverOptions()
    S = np.stack([_prepare_cov(Sk) for Sk in S_list])
    k = S.shape[0]
    if k < 2:
        raise ValueError("joint estimation needs at least two groups")
    n = np.asarray(n_list, dtype=np.float64)
    if n.shape != (k,) or np.any(n <= 0):
        raise ValueError("n_list must hold one positive weight per group")
    if lam1 < 0 or lam2 < 0:
        raise ValueError("penalties must be non-negative")
    if lam1 == 0 and lam2 == 0:
        # unpenalized problem separates into plain inversions
        try:
            thetas = np.stack([invert_pd(S[g])[0] for g in range(k)])
        except NotComputableError:
            raise NotComputableError("regularization required") from None
        return thetas, True, 0
    Z, U, converged, it = _jgl_admm(S, n, lam1, lam2, opts, warm_start)
    return _zero_threshold(Z, opts.zero_tol), converged, it


# ---------------------------------------------------------------------------
# regularized discriminant blending
# ---------------------------------------------------------------------------

def rda_covariances(summaries: GroupSummaries, rho1, rho2):
    """Two-stage covariance blend: pool with weight rho1, then shrink toward
    a scaled identity with weight rho2. The trace is preserved exactly by
    the second stage."""
    if not 0 <= rho1 <= 1 or not 0 <= rho2 <= 1:
        raise ValueError("rho1 and rho2 must lie in [0, 1]")
    covs = summaries.covariances
    p = summaries.p
    toward_pool = (1.0 - rho1) * covs + rho1 * summaries.pooled[None, :, :]
    traces = np.trace(toward_pool, axis1=1, axis2=2)
    eye = np.eye(p)
    blended = (1.0 - rho2) * toward_pool + (rho2 / p) * traces[:, None, None] * eye
    return (blended + blended.transpose(0, 2, 1)) / 2.0
