"""Cellwise-robust scale, rank correlation and covariance estimation.

The building blocks here never pool information across cells of the same
row, which is what keeps single bad cells from contaminating whole-row
statistics: scales come from pairwise differences within one column, and
correlations from concordance counts of one column pair.
"""

from dataclasses import dataclass

import numpy as np

from .datasets import LabeledDataset
from .validation import as_float_matrix, as_float_vector

__all__ = [
    "QN_CONSTANT",
    "GroupSummaries",
    "qn_scale",
    "kendall_tau",
    "pairwise_cov_matrix",
    "group_summaries",
]

# Gaussian consistency factor for the Qn scale. No finite-sample correction
# is applied on top of it.
QN_CONSTANT = 2.2219

# Above this sample size the vectorised all-pairs tables get large and the
# merge-sort path wins.
_PAIR_TABLE_MAX_N = 256

ESTIMATOR_KINDS = ("classical", "cellwise_robust")


def qn_scale(x, constant=QN_CONSTANT):
    """Qn scale: the k-th order statistic of the pairwise absolute differences.

    k = C(h, 2) with h = floor(n/2) + 1, and the raw order statistic is
    multiplied by `constant` for consistency at the Gaussian model.
    """
    x = as_float_vector(x, "x")
    n = x.shape[0]
    if n < 2:
        raise ValueError("insufficient data for scale")
    h = n // 2 + 1
    k = h * (h - 1) // 2
    i, j = np.triu_indices(n, 1)
    diffs = np.abs(x[i] - x[j])
    return constant * np.partition(diffs, k - 1)[k - 1]


def _tie_pairs(sorted_vals):
    # sum of t*(t-1)/2 over runs of equal values in a sorted array
    if sorted_vals.shape[0] == 0:
        return 0
    boundaries = np.flatnonzero(np.diff(sorted_vals) != 0)
    run_lengths = np.diff(np.concatenate(([0], boundaries + 1, [sorted_vals.shape[0]])))
    return int(np.sum(run_lengths * (run_lengths - 1) // 2))


def _count_inversions(seq):
    # strict inversions (i < j with seq[i] > seq[j]) via bottom-up merge sort
    arr = list(seq)
    n = len(arr)
    inv = 0
    width = 1
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            if mid >= hi:
                continue
            i, j = lo, mid
            merged = []
            while i < mid and j < hi:
                if arr[j] < arr[i]:
                    inv += mid - i
                    merged.append(arr[j])
                    j += 1
                else:
                    merged.append(arr[i])
                    i += 1
            merged.extend(arr[i:mid])
            merged.extend(arr[j:hi])
            arr[lo:hi] = merged
        width *= 2
    return inv


def _kendall_numerator_mergesort(x, y):
    # concordant minus discordant pairs, ties counting as zero
    n = x.shape[0]
    order = np.lexsort((y, x))
    xs = x[order]
    ys = y[order]
    n0 = n * (n - 1) // 2
    ties_x = _tie_pairs(xs)
    ties_y = _tie_pairs(np.sort(y))
    # ties in both coordinates: runs of equal (x, y) pairs
    same = np.flatnonzero(np.diff(xs) != 0)
    both = 0
    start = 0
    for end in list(same + 1) + [n]:
        both += _tie_pairs(np.sort(ys[start:end]))
        start = end
    discordant = _count_inversions(ys.tolist())
    return n0 - ties_x - ties_y + both - 2 * discordant


def _kendall_numerator_pairs(x, y):
    # the defining O(n^2) count, kept as the slow reference path
    sx = np.sign(x[:, None] - x[None, :])
    sy = np.sign(y[:, None] - y[None, :])
    prod = (sx * sy).astype(np.int64)
    i, j = np.triu_indices(x.shape[0], 1)
    return int(prod[i, j].sum())


def kendall_tau(x, y, method="auto"):
    """Kendall rank correlation with the unconditional n(n-1)/2 denominator.

    Tied pairs contribute zero to the numerator and the denominator is not
    tie-corrected. `method` picks the counting path: "mergesort" is
    O(n log n), "pairs" is the O(n^2) definition, "auto" chooses by size.
    Both paths count in exact integer arithmetic.
    """
    x = as_float_vector(x, "x")
    y = as_float_vector(y, "y")
    if x.shape[0] != y.shape[0]:
        raise ValueError("x and y must have equal length")
    n = x.shape[0]
    if n < 2:
        raise ValueError("insufficient data for scale")
    if method == "auto":
        method = "pairs" if n <= 64 else "mergesort"
    if method == "mergesort":
        num = _kendall_numerator_mergesort(x, y)
    elif method == "pairs":
        num = _kendall_numerator_pairs(x, y)
    else:
        raise ValueError(f"unknown method {method!r}")
    return num / (n * (n - 1) / 2)


def _qn_column_raw(col):
    n = col.shape[0]
    h = n // 2 + 1
    k = h * (h - 1) // 2
    i, j = np.triu_indices(n, 1)
    return np.partition(np.abs(col[i] - col[j]), k - 1)[k - 1]


def pairwise_cov_matrix(X, constant=QN_CONSTANT):
    """Robust covariance from Qn scales and pairwise Kendall correlations.

    s_ij = qn(X^i) * qn(X^j) * sin(pi/2 * tau(X^i, X^j)) off the diagonal
    and s_ii = qn(X^i)^2. The sine maps Kendall's tau to the correlation it
    estimates at the normal model; without it every entry would be biased
    toward zero. It also breaks positive semidefiniteness, so the output is
    symmetric but not guaranteed positive definite.
    """
    X = as_float_matrix(X, "X")
    n, p = X.shape
    if n < 2:
        raise ValueError("insufficient data for scale")
    n0 = n * (n - 1) // 2
    if n <= _PAIR_TABLE_MAX_N:
        i, j = np.triu_indices(n, 1)
        diffs = X[i] - X[j]
        qn = constant * np.partition(np.abs(diffs), _qn_k(n) - 1, axis=0)[_qn_k(n) - 1]
        signs = np.sign(diffs).T
        num = signs @ signs.T
        tau = num / n0
    else:
        qn = np.array([constant * _qn_column_raw(X[:, c]) for c in range(p)])
        tau = np.eye(p)
        for a in range(p):
            for b in range(a + 1, p):
                tau[a, b] = _kendall_numerator_mergesort(X[:, a], X[:, b]) / n0
    corr = np.sin(0.5 * np.pi * tau)
    upper = np.triu(np.outer(qn, qn) * corr, 1)
    return upper + upper.T + np.diag(qn * qn)


def _qn_k(n):
    h = n // 2 + 1
    return h * (h - 1) // 2


@dataclass(frozen=True)
class GroupSummaries:
    """Per-group location/scatter estimates plus their pooled combination."""

    centers: np.ndarray       # (K, p)
    covariances: np.ndarray   # (K, p, p)
    pooled: np.ndarray        # (p, p)
    estimator_kind: str
    group_sizes: np.ndarray   # (K,)

    def __post_init__(self):
        for name in ("centers", "covariances", "pooled", "group_sizes"):
            getattr(self, name).setflags(write=False)

    @property
    def k(self):
        return self.centers.shape[0]

    @property
    def p(self):
        return self.centers.shape[1]

    @property
    def n_total(self):
        return int(self.group_sizes.sum())


def _sample_cov(values):
    cov = np.atleast_2d(np.cov(values, rowvar=False, ddof=1))
    return (cov + cov.T) / 2.0


def group_summaries(data: LabeledDataset, kind: str) -> GroupSummaries:
    """Group centers and covariances, classical or cellwise-robust.

    Classical: mean and sample covariance (denominator n_k - 1).
    Cellwise-robust: columnwise median and the Qn/Kendall pairwise matrix.
    The pooled matrix is sum_k n_k/(N-K) * cov_k in both cases.
    """
    if kind not in ESTIMATOR_KINDS:
        raise ValueError(f"kind must be one of {ESTIMATOR_KINDS}, got {kind!r}")
    k = data.k
    p = data.p
    sizes = data.group_sizes
    if np.any(sizes < 2):
        raise ValueError("insufficient data for scale")
    centers = np.empty((k, p))
    covs = np.empty((k, p, p))
    for g in range(1, k + 1):
        block = data.group_values(g)
        if kind == "classical":
            centers[g - 1] = block.mean(axis=0)
            covs[g - 1] = _sample_cov(block)
        else:
            centers[g - 1] = np.median(block, axis=0)
            covs[g - 1] = pairwise_cov_matrix(block)
    n_total = int(sizes.sum())
    weights = sizes / (n_total - k)
    pooled = np.einsum("k,kij->ij", weights, covs)
    pooled = (pooled + pooled.T) / 2.0
    return GroupSummaries(centers, covs, pooled, kind, sizes.copy())
