"""Quadratic/linear discriminant classification from fitted precision sets.

The score of group k at a point x is

    (x - mu_k)' Theta_k (x - mu_k) - log det Theta_k - 2 log pi_k

and classification picks the smallest score, ties resolving toward the
smallest group index.
"""

import functools
import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .datasets import LabeledDataset
from .robust import GroupSummaries
from .selection import SelectionResult, select_model
from .solvers import PrecisionSet, SolverOptions, _chol_logdet, invert_pd
from .validation import as_float_matrix

__all__ = [
    "METHODS",
    "DiscriminantModel",
    "ClassificationReport",
    "method_components",
    "fit_method",
    "discriminant_scores",
    "classify",
    "kl_distance",
    "save_model",
    "load_model",
]

MODEL_FORMAT = "cellshield-model/1"

# method name -> (estimator kind, precision family)
METHODS = {
    "s-lda": ("classical", "sample_lda"),
    "s-qda": ("classical", "sample_qda"),
    "gl-lda": ("classical", "gl_lda"),
    "gl-qda": ("classical", "gl_qda"),
    "jgl": ("classical", "jgl"),
    "rda": ("classical", "rda"),
    "r-lda": ("cellwise_robust", "sample_lda"),
    "r-qda": ("cellwise_robust", "sample_qda"),
    "rgl-lda": ("cellwise_robust", "gl_lda"),
    "rgl-qda": ("cellwise_robust", "gl_qda"),
    "rjgl": ("cellwise_robust", "jgl"),
    "rrda": ("cellwise_robust", "rda"),
}


def method_components(method):
    try:
        return METHODS[method]
    except KeyError:
        raise ValueError(
            f"unknown method {method!r}, expected one of {sorted(METHODS)}"
        ) from None


@dataclass(frozen=True)
class DiscriminantModel:
    """A fitted classifier: centers, precisions, priors and how it was chosen."""

    method: str
    kind: str
    centers: np.ndarray        # (K, p)
    precisions: PrecisionSet
    priors: np.ndarray         # (K,)
    label_names: tuple
    variable_names: tuple
    selection_table: tuple = ()
    selection_bic: float = float("nan")

    @property
    def k(self):
        return self.centers.shape[0]

    @property
    def p(self):
        return self.centers.shape[1]

    @functools.cached_property
    def log_dets(self):
        out = np.array([_chol_logdet(m) for m in self.precisions.matrices])
        out.setflags(write=False)
        return out


@dataclass(frozen=True)
class ClassificationReport:
    labels: np.ndarray         # predicted group indices, 1-based
    scores: np.ndarray         # (m, K)
    cc: float | None = None    # correct classification percentage


def fit_method(method, data: LabeledDataset, opts=None, grid_points=5,
               summaries: GroupSummaries = None) -> DiscriminantModel:
    """Fit one of the twelve named methods on labeled data."""
    kind, family = method_components(method)
    opts = opts or SolverOptions()
    result: SelectionResult = select_model(
        family, data, kind, opts, grid_points, summaries=summaries)
    sizes = result.summaries.group_sizes
    priors = sizes / sizes.sum()
    return DiscriminantModel(
        method=method,
        kind=kind,
        centers=result.summaries.centers.copy(),
        precisions=result.precisions,
        priors=priors,
        label_names=data.label_names,
        variable_names=data.variable_names,
        selection_table=result.table,
        selection_bic=result.bic,
    )


def discriminant_scores(X, model: DiscriminantModel):
    """Score matrix (m, K); lower means more plausible group."""
    X = as_float_matrix(X, "X")
    if X.shape[1] != model.p:
        raise ValueError(f"X has {X.shape[1]} columns, model expects {model.p}")
    log_dets = model.log_dets
    scores = np.empty((X.shape[0], model.k))
    for g in range(model.k):
        diff = X - model.centers[g]
        quad = np.einsum("ij,ij->i", diff @ model.precisions.matrices[g], diff)
        scores[:, g] = quad - log_dets[g] - 2.0 * np.log(model.priors[g])
    return scores


def classify(X, model: DiscriminantModel, true_labels=None) -> ClassificationReport:
    """Assign each row to the group with the smallest score.

    np.argmin returns the first minimum, which is the smallest group index.
    """
    scores = discriminant_scores(X, model)
    labels = np.argmin(scores, axis=1) + 1
    cc = None
    if true_labels is not None:
        truth = np.asarray(true_labels)
        if truth.shape[0] != labels.shape[0]:
            raise ValueError("true_labels length must match X")
        cc = 100.0 * float(np.mean(labels == truth))
    return ClassificationReport(labels, scores, cc)


def kl_distance(estimates, truth):
    """Summed Gaussian KL divergence between precision sets, zero means truth.

    sum_k [ -log det(Est_k Theta_k^{-1}) + tr(Est_k Theta_k^{-1}) ] - K*p
    """
    est = estimates.matrices if isinstance(estimates, PrecisionSet) else np.asarray(estimates)
    tru = truth.matrices if isinstance(truth, PrecisionSet) else np.asarray(truth)
    if est.shape != tru.shape:
        raise ValueError("estimate and truth must have matching shapes")
    k, p = est.shape[0], est.shape[1]
    total = 0.0
    for g in range(k):
        sigma_true, logdet_true = invert_pd(tru[g])
        logdet_est = _chol_logdet(est[g])
        # log det(Est Theta^{-1}) = log det Est - log det Theta
        total += -(logdet_est - logdet_true) + float(np.sum(est[g] * sigma_true))
    return total - k * p


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def atomic_write_text(path, text):
    """Write text then atomically move it into place."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _table_to_json(table):
    return [
        {
            "params": list(row.params),
            "df": row.df,
            "bic": None if not np.isfinite(row.bic) else row.bic,
            "converged": bool(row.converged),
        }
        for row in table
    ]


def model_to_json(model: DiscriminantModel) -> str:
    doc = {
        "version": MODEL_FORMAT,
        "method": model.method,
        "kind": model.kind,
        "k": model.k,
        "p": model.p,
        "labels": list(model.label_names),
        "variables": list(model.variable_names),
        "priors": model.priors.tolist(),
        "centers": model.centers.tolist(),
        "precisions": [m.ravel().tolist() for m in model.precisions.matrices],
        "precision_method": model.precisions.method,
        "regularization": model.precisions.regularization,
        "converged": bool(model.precisions.converged),
        "iterations": int(model.precisions.iterations),
        "selection": {
            "bic": None if not np.isfinite(model.selection_bic) else model.selection_bic,
            "table": _table_to_json(model.selection_table),
        },
    }
    return json.dumps(doc, indent=2) + "\n"


def save_model(model: DiscriminantModel, path):
    atomic_write_text(path, model_to_json(model))


def load_model(path) -> DiscriminantModel:
    with open(path, "r", encoding="utf-8") as handle:
        doc = json.load(handle)
    if doc.get("version") != MODEL_FORMAT:
        raise ValueError(
            f"unsupported model format {doc.get('version')!r}, expected {MODEL_FORMAT}"
        )
    k, p = int(doc["k"]), int(doc["p"])
    mats = np.array([np.array(flat, dtype=np.float64).reshape(p, p)
                     for flat in doc["precisions"]])
    if mats.shape != (k, p, p):
        raise ValueError("precision matrices do not match the declared shape")
    from .selection import GridPoint

    table = tuple(
        GridPoint(tuple(row["params"]), int(row["df"]),
                  float("nan") if row["bic"] is None else float(row["bic"]),
                  bool(row["converged"]))
        for row in doc["selection"]["table"]
    )
    sel_bic = doc["selection"]["bic"]
    return DiscriminantModel(
        method=doc["method"],
        kind=doc["kind"],
        centers=np.array(doc["centers"], dtype=np.float64).reshape(k, p),
        precisions=PrecisionSet(
            mats, doc["precision_method"], dict(doc["regularization"]),
            bool(doc["converged"]), int(doc["iterations"]),
        ),
        priors=np.array(doc["priors"], dtype=np.float64),
        label_names=tuple(doc["labels"]),
        variable_names=tuple(doc["variables"]),
        selection_table=table,
        selection_bic=float("nan") if sel_bic is None else float(sel_bic),
    )
