"""Regularization grids and BIC-based model selection.

The selectable families are sample_lda / sample_qda (no grid), gl_lda and
gl_qda (one lambda), jgl (lambda1, lambda2) and rda (rho1, rho2). BIC is

    sum_k [ n_k tr(S_k Theta_k) - n_k log det Theta_k ] + log(N) * df

with S_pool replacing S_k for the LDA-type families, and df counting the
distinct non-zero values per upper-triangle position across the K matrices.
"""

from dataclasses import dataclass

import numpy as np

from .datasets import LabeledDataset
from .exceptions import DegenerateGridError, NotComputableError
from .robust import GroupSummaries, group_summaries
from .solvers import (
    PrecisionSet,
    SolverOptions,
    _chol_logdet,
    _gl_admm,
    _jgl_admm,
    _prepare_cov,
    _zero_threshold,
    invert_pd,
    rda_covariances,
)

__all__ = [
    "FAMILIES",
    "GridSpec",
    "GridPoint",
    "SelectionResult",
    "grid_bounds",
    "count_df",
    "bic",
    "select_model",
]

FAMILIES = ("sample_lda", "sample_qda", "gl_lda", "gl_qda", "jgl", "rda")
GRID_FAMILIES = ("gl_lda", "gl_qda", "jgl", "rda")

# two entries count as one distinct value when they differ by at most this
DF_TOL = 1e-8


@dataclass(frozen=True)
class GridSpec:
    """Log-spaced candidate values per tuning parameter."""

    params: tuple              # e.g. ("lambda1",) or ("rho1", "rho2")
    values: tuple              # one ndarray per parameter

    def points(self):
        """All parameter combinations, first parameter varying fastest."""
        if len(self.params) == 1:
            return [(float(v),) for v in self.values[0]]
        first, second = self.values
        return [(float(a), float(b)) for b in second for a in first]


@dataclass(frozen=True)
class GridPoint:
    """One evaluated grid candidate. bic is NaN when not computable."""

    params: tuple
    df: int
    bic: float
    converged: bool


@dataclass(frozen=True)
class SelectionResult:
    precisions: PrecisionSet
    params: dict
    bic: float
    table: tuple               # GridPoint rows in grid order
    summaries: GroupSummaries


def _log_grid(lower, upper, points):
    return np.exp(np.linspace(np.log(lower), np.log(upper), points))


def grid_bounds(family, summaries: GroupSummaries, points=5):
    """Data-driven grid for one family: 5 log-spaced values per parameter
    with lower bound upper/10, except rda whose range is fixed [0.1, 1]."""
    if points < 2:
        raise ValueError("points must be at least 2")
    covs = summaries.covariances
    sizes = summaries.group_sizes
    p = summaries.p
    eye = np.eye(p)
    if family == "gl_qda":
        upper = float(np.max(sizes[:, None, None] * np.abs(covs - eye)))
        return GridSpec(("lambda1",), (_grid_or_degenerate(upper, points),))
    if family == "gl_lda":
        upper = float(np.max(sizes) * np.max(np.abs(summaries.pooled - eye)))
        return GridSpec(("lambda1",), (_grid_or_degenerate(upper, points),))
    if family == "jgl":
        off = ~np.eye(p, dtype=bool)
        u1 = float(np.max(sizes[:, None, None] * np.abs(covs * off[None, :, :])))
        u2 = float(np.max(sizes[:, None, None] * np.abs(summaries.pooled[None, :, :] - covs)))
        # The fully-fused KKT bound: each group faces K-1 fused partners, so
        # the pairwise bound (exact for K=2) must be divided by K-1.
        u2 /= max(summaries.k - 1, 1)
        return GridSpec(
            ("lambda1", "lambda2"),
            (_grid_or_degenerate(u1, points), _grid_or_degenerate(u2, points)),
        )
    if family == "rda":
        vals = _log_grid(0.1, 1.0, points)
        return GridSpec(("rho1", "rho2"), (vals, vals.copy()))
    raise ValueError(f"family {family!r} has no tuning grid")


def _grid_or_degenerate(upper, points):
    if not np.isfinite(upper) or upper <= 0:
        raise DegenerateGridError("degenerate grid")
    return _log_grid(upper / 10.0, upper, points)


def count_df(matrices, tol=DF_TOL):
    """Distinct non-zero values per upper-triangle position, summed.

    Values within tol of zero do not count; surviving values are clustered
    so that members within tol of their sorted neighbor share one cluster.
    """
    mats = np.asarray(matrices, dtype=np.float64)
    if mats.ndim == 2:
        mats = mats[None, :, :]
    _, p, p2 = mats.shape
    if p != p2:
        raise ValueError("matrices must be square")
    iu = np.triu_indices(p)
    values = mats[:, iu[0], iu[1]]
    df = 0
    for pos in range(values.shape[1]):
        vals = values[:, pos]
        vals = np.sort(vals[np.abs(vals) > tol])
        if vals.size:
            df += 1 + int(np.count_nonzero(np.diff(vals) > tol))
    return df


def bic(summaries: GroupSummaries, precisions, pooled_input=False, df=None):
    """BIC of a precision set against the group (or pooled) covariances."""
    mats = precisions.matrices if isinstance(precisions, PrecisionSet) else np.asarray(precisions)
    sizes = summaries.group_sizes
    n_total = summaries.n_total
    if df is None:
        df = count_df(mats)
    total = 0.0
    for g in range(summaries.k):
        S = summaries.pooled if pooled_input else summaries.covariances[g]
        theta = mats[g]
        log_det = _chol_logdet(theta)
        total += sizes[g] * (float(np.sum(S * theta)) - log_det)
    return total + np.log(n_total) * df


def _tie_key(family, params, bic_value):
    # smaller key wins; ties in BIC resolve toward stronger regularization
    if family == "rda":
        rho1, rho2 = params
        return (bic_value, -rho2, -rho1)
    return (bic_value,) + tuple(-v for v in params)


def _pick_best(family, rows):
    usable = [r for r in rows if np.isfinite(r.bic)]
    if not usable:
        raise NotComputableError("not computable")
    return min(usable, key=lambda r: _tie_key(family, r.params, r.bic))


def _sample_precisions(summaries, pooled):
    if summaries.estimator_kind == "classical":
        # a sample covariance of m rows has rank at most m - 1, so the
        # inverse cannot exist regardless of floating-point pivot luck
        rank_cap = (summaries.n_total - summaries.k if pooled
                    else int(summaries.group_sizes.min()) - 1)
        if summaries.p > rank_cap:
            raise NotComputableError("not computable")
    if pooled:
        inv, _ = invert_pd(summaries.pooled)
        mats = np.repeat(inv[None, :, :], summaries.k, axis=0)
    else:
        mats = np.stack([invert_pd(c)[0] for c in summaries.covariances])
    return PrecisionSet(mats, "sample", {}, True, 0)


def select_model(family, data: LabeledDataset, kind, opts=None, grid_points=5,
                 summaries=None) -> SelectionResult:
    """Fit one family on one dataset, searching its grid by BIC.

    Ties in BIC resolve toward stronger regularization (larger lambda1 then
    lambda2; larger rho2 then rho1). Grid candidates whose precision is not
    positive definite are recorded with NaN BIC and skipped; if every
    candidate fails, NotComputableError propagates.
    """
    if family not in FAMILIES:
        raise ValueError(f"family must be one of {FAMILIES}, got {family!r}")
    opts = opts or SolverOptions()
    if summaries is None:
        summaries = group_summaries(data, kind)
    elif summaries.estimator_kind != kind:
        raise ValueError("summaries were built with a different estimator kind")
    sizes = summaries.group_sizes
    n_total = summaries.n_total

    if family in ("sample_lda", "sample_qda"):
        precisions = _sample_precisions(summaries, pooled=family == "sample_lda")
        return SelectionResult(precisions, {}, float("nan"), (), summaries)

    grid = grid_bounds(family, summaries, grid_points)
    rows = []
    candidates = {}

    if family in ("gl_lda", "gl_qda"):
        pooled_input = family == "gl_lda"
        if pooled_input:
            inputs = [(_prepare_cov(summaries.pooled), float(n_total))]
        else:
            inputs = [(_prepare_cov(summaries.covariances[g]), float(sizes[g]))
                      for g in range(summaries.k)]
        states = [None] * len(inputs)
        # strongest penalty first so each solve warm-starts the next
        for lam1 in sorted(grid.values[0], reverse=True):
            solved = []
            conv = True
            iters = 0
            for idx, (S, weight) in enumerate(inputs):
                Z, U, ok, it = _gl_admm(S, weight, lam1, opts, states[idx])
                states[idx] = (Z, U)
                solved.append(_zero_threshold(Z, opts.zero_tol))
                conv = conv and ok
                iters = max(iters, it)
            if pooled_input:
                mats = np.repeat(solved[0][None, :, :], summaries.k, axis=0)
            else:
                mats = np.stack(solved)
            rows.append(_evaluate(family, summaries, mats, (lam1,), conv, iters,
                                   pooled_input, candidates))
    elif family == "jgl":
        S = np.stack([_prepare_cov(c) for c in summaries.covariances])
        weights = sizes.astype(np.float64)
        state = None
        for lam2 in sorted(grid.values[1], reverse=True):
            for lam1 in sorted(grid.values[0], reverse=True):
                Z, U, conv, iters = _jgl_admm(S, weights, lam1, lam2, opts, state)
                state = (Z, U)
                mats = _zero_threshold(Z, opts.zero_tol)
                rows.append(_evaluate(family, summaries, mats, (lam1, lam2),
                                       conv, iters, False, candidates))
    else:  # rda
        for rho1, rho2 in grid.points():
            try:
                mats = np.stack([
                    invert_pd(c)[0]
                    for c in rda_covariances(summaries, rho1, rho2)
                ])
            except NotComputableError:
                rows.append(GridPoint((rho1, rho2), 0, float("nan"), True))
                continue
            rows.append(_evaluate(family, summaries, mats, (rho1, rho2),
                                   True, 0, False, candidates))

    rows = _grid_order(family, rows)
    best = _pick_best(family, rows)
    mats, conv, iters = candidates[best.params]
    precisions = PrecisionSet(
        mats, "sample" if family.startswith("sample") else family,
        dict(zip(grid.params, best.params)), conv, iters,
    )
    return SelectionResult(precisions, dict(zip(grid.params, best.params)),
                           best.bic, tuple(rows), summaries)


def _evaluate(family, summaries, mats, params, conv, iters, pooled_input, candidates):
    df = count_df(mats)
    try:
        value = bic(summaries, mats, pooled_input=pooled_input, df=df)
    except NotComputableError:
        return GridPoint(params, df, float("nan"), conv)
    candidates[params] = (mats, conv, iters)
    return GridPoint(params, df, float(value), conv)


def _grid_order(family, rows):
    # report rows in ascending parameter order regardless of solve order
    if family == "rda":
        return tuple(sorted(rows, key=lambda r: (r.params[1], r.params[0])))
    return tuple(sorted(rows, key=lambda r: tuple(reversed(r.params))))
