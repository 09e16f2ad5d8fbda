"""Scikit-learn estimator facade over the discriminant fitting routines."""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_is_fitted, validate_data

from .classifier import METHODS, classify, fit_method
from .datasets import LabeledDataset
from .outliers import detect
from .solvers import SolverOptions

__all__ = ["RegularizedDiscriminantClassifier"]


class RegularizedDiscriminantClassifier(ClassifierMixin, BaseEstimator):
    """Discriminant classifier with selectable estimation method.

    Parameters
    ----------
    method : str, default "rjgl"
        One of the method names accepted by ``fit_method``; robust variants
        carry an ``r`` prefix.
    grid_points : int, default 5
        Values per tuning parameter in the selection grid.
    tol : float, default 1e-5
        Solver convergence tolerance.
    max_iter : int, default 500
        Solver iteration cap.
    admm_penalty : float, default 1.0
        Base penalty parameter of the splitting solver.
    """

    def __init__(self, method="rjgl", grid_points=5, tol=1e-5, max_iter=500,
                 admm_penalty=1.0):
        self.method = method
        self.grid_points = grid_points
        self.tol = tol
        self.max_iter = max_iter
        self.admm_penalty = admm_penalty

    def _options(self):
        return SolverOptions(tol=self.tol, max_iter=self.max_iter,
                             admm_penalty=self.admm_penalty)

    def fit(self, X, y):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        X, y = validate_data(self, X, y, dtype=np.float64)
        check_classification_targets(y)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        if self.classes_.shape[0] < 2:
            raise ValueError("need at least two classes")
        data = LabeledDataset(X, encoded.astype(np.int64) + 1)
        self.model_ = fit_method(self.method, data, self._options(), self.grid_points)
        return self

    def predict(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, reset=False, dtype=np.float64)
        report = classify(X, self.model_)
        return self.classes_[report.labels - 1]

    def decision_scores(self, X):
        """Per-class discriminant scores; the smallest score wins."""
        check_is_fitted(self)
        X = validate_data(self, X, reset=False, dtype=np.float64)
        return classify(X, self.model_).scores

    def _encode(self, y):
        y = np.asarray(y)
        if not np.isin(y, self.classes_).all():
            raise ValueError("y contains labels unseen during fit")
        return np.searchsorted(self.classes_, y).astype(np.int64) + 1

    def outlier_report(self, X, y):
        """Rowwise and cellwise outlier report for labeled data.

        Every class seen during fit must appear in ``y``.
        """
        check_is_fitted(self)
        X, y = validate_data(self, X, y, reset=False, dtype=np.float64)
        data = LabeledDataset(X, self._encode(y))
        return detect(data, self.model_)
