"""Rowwise and cellwise outlier flagging against a fitted model.

Rows are flagged by Mahalanobis distance above sqrt(chi2(0.99, p)). Cells
are flagged by standardized distance from the group median above a
familywise-calibrated two-sided threshold sqrt(chi2(q_k, 1)) with
q_k = 0.99^(1/(n_k p)).
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc, gammaln, ndtri

from .classifier import DiscriminantModel
from .datasets import LabeledDataset
from .solvers import invert_pd
from .validation import as_float_matrix

__all__ = [
    "chi_square_quantile",
    "mahalanobis_distances",
    "cellwise_distances",
    "OutlierReport",
    "detect",
]

ROW_LEVEL = 0.99
CELL_LEVEL = 0.99


def _chi2_cdf(x, df):
    return gammainc(df / 2.0, x / 2.0)


def _chi2_pdf(x, df):
    half = df / 2.0
    return np.exp((half - 1.0) * np.log(x) - x / 2.0 - gammaln(half) - half * np.log(2.0))


def chi_square_quantile(prob, df, rel_tol=1e-10):
    """Inverse chi-square CDF via Newton steps on the regularized incomplete
    gamma function, with bisection as the safeguard."""
    if not 0.0 < prob < 1.0:
        raise ValueError("prob must lie strictly between 0 and 1")
    if df <= 0:
        raise ValueError("df must be positive")
    df = float(df)
    # Wilson-Hilferty starting point
    z = ndtri(prob)
    guess = df * (1.0 - 2.0 / (9.0 * df) + z * np.sqrt(2.0 / (9.0 * df))) ** 3
    x = guess if np.isfinite(guess) and guess > 0 else df
    lo, hi = 0.0, x
    while _chi2_cdf(hi, df) < prob:
        lo = hi
        hi *= 2.0
    x = min(max(x, lo), hi)
    for _ in range(200):
        f = _chi2_cdf(x, df) - prob
        if f > 0:
            hi = x
        else:
            lo = x
        pdf = _chi2_pdf(x, df)
        step_ok = pdf > 0 and np.isfinite(pdf)
        nxt = x - f / pdf if step_ok else 0.5 * (lo + hi)
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - x) <= rel_tol * max(abs(x), 1e-300):
            return float(nxt)
        x = nxt
    return float(x)


def mahalanobis_distances(X, center, precision):
    """sqrt((x - mu)' Theta (x - mu)) per row."""
    X = as_float_matrix(X, "X")
    diff = X - np.asarray(center, dtype=np.float64)
    quad = np.einsum("ij,ij->i", diff @ np.asarray(precision, dtype=np.float64), diff)
    return np.sqrt(np.maximum(quad, 0.0))


def cellwise_distances(X, medians, scales):
    """Standardized cell residuals (x_ij - m_j) / t_j."""
    X = as_float_matrix(X, "X")
    return (X - np.asarray(medians, dtype=np.float64)) / np.asarray(scales, dtype=np.float64)


@dataclass(frozen=True)
class OutlierReport:
    """Distances, thresholds and flags; flags are recomputable as
    distance > threshold (cells two-sided on the absolute value)."""

    labels: np.ndarray           # (n,) group index per row
    row_distances: np.ndarray    # (n,)
    row_flags: np.ndarray        # (n,) bool
    row_threshold: float
    cell_distances: np.ndarray   # (n, p)
    cell_flags: np.ndarray       # (n, p) bool
    cell_thresholds: np.ndarray  # (K,) per-group threshold
    medians: np.ndarray          # (K, p) group medians used for cells

    @property
    def n(self):
        return self.labels.shape[0]

    @property
    def p(self):
        return self.cell_distances.shape[1]

    def heatmap_codes(self):
        """0 clean, 1 cellwise only, 2 rowwise only, 3 both."""
        cell = self.cell_flags.astype(np.int8)
        row = self.row_flags.astype(np.int8)[:, None]
        return cell + 2 * row


def detect(data: LabeledDataset, model: DiscriminantModel) -> OutlierReport:
    """Flag rowwise and cellwise outliers in labeled data under a model.

    Row distances use the model centers; cell distances always use the
    group medians of the data at hand with scales from the inverse
    precision diagonal.
    """
    if data.p != model.p:
        raise ValueError(f"data has {data.p} columns, model expects {model.p}")
    if data.k != model.k:
        raise ValueError(f"data has {data.k} groups, model expects {model.k}")
    n, p = data.n, data.p
    row_threshold = float(np.sqrt(chi_square_quantile(ROW_LEVEL, p)))
    row_distances = np.empty(n)
    cell_distances = np.empty((n, p))
    cell_flags = np.empty((n, p), dtype=bool)
    cell_thresholds = np.empty(model.k)
    medians = np.empty((model.k, p))
    for g in range(1, model.k + 1):
        rows = data.group_rows(g)
        block = data.values[rows]
        theta = model.precisions.matrices[g - 1]
        row_distances[rows] = mahalanobis_distances(block, model.centers[g - 1], theta)
        sigma, _ = invert_pd(theta)
        scales = np.sqrt(np.diag(sigma))
        med = np.median(block, axis=0)
        medians[g - 1] = med
        d = cellwise_distances(block, med, scales)
        cell_distances[rows] = d
        n_k = rows.shape[0]
        q_k = CELL_LEVEL ** (1.0 / (n_k * p))
        thr = float(np.sqrt(chi_square_quantile(q_k, 1)))
        cell_thresholds[g - 1] = thr
        cell_flags[rows] = np.abs(d) > thr
    row_flags = row_distances > row_threshold
    return OutlierReport(
        labels=data.labels.copy(),
        row_distances=row_distances,
        row_flags=row_flags,
        row_threshold=row_threshold,
        cell_distances=cell_distances,
        cell_flags=cell_flags,
        cell_thresholds=cell_thresholds,
        medians=medians,
    )
