"""Labeled data container used throughout the package."""

from dataclasses import dataclass

import numpy as np

from .validation import as_float_matrix, check_labels

__all__ = ["LabeledDataset"]


@dataclass(frozen=True)
class LabeledDataset:
    """An n x p data matrix with group indices in 1..K.

    Parameters
    ----------
    values : ndarray of shape (n, p)
        Observations by row, finite float64.
    labels : ndarray of shape (n,)
        Group index of each row, 1-based, every group non-empty.
    variable_names : tuple of str, optional
        Column names; generated as x1..xp when omitted.
    label_names : tuple of str, optional
        Display name per group index; defaults to "1".."K".
    n_groups : int, optional
        Fixes K explicitly and permits empty groups (randomly labeled test
        sets); by default K is the largest label and no group may be empty.
    """

    values: np.ndarray
    labels: np.ndarray
    variable_names: tuple = ()
    label_names: tuple = ()
    n_groups: int = None

    def __post_init__(self):
        values = as_float_matrix(self.values)
        labels, k = check_labels(self.labels, values.shape[0], self.n_groups)
        values = values.copy()
        labels = labels.copy()
        values.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        names = tuple(self.variable_names) or tuple(f"x{j + 1}" for j in range(values.shape[1]))
        if len(names) != values.shape[1]:
            raise ValueError("variable_names must match the number of columns")
        object.__setattr__(self, "variable_names", names)
        gnames = tuple(str(g) for g in self.label_names) or tuple(str(g) for g in range(1, k + 1))
        if len(gnames) != k:
            raise ValueError("label_names must provide one name per group")
        object.__setattr__(self, "label_names", gnames)

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def p(self):
        return self.values.shape[1]

    @property
    def k(self):
        return int(self.n_groups) if self.n_groups is not None else int(self.labels.max())

    @property
    def group_sizes(self):
        return np.bincount(self.labels, minlength=self.k + 1)[1:]

    def group_rows(self, group):
        """Row indices of one group, in original order."""
        if not 1 <= group <= self.k:
            raise ValueError(f"group must be in 1..{self.k}")
        return np.flatnonzero(self.labels == group)

    def group_values(self, group):
        return self.values[self.group_rows(group)]

    def replace_values(self, values):
        """New dataset with the same labels and names but different cells."""
        return LabeledDataset(values, self.labels, self.variable_names,
                              self.label_names, self.n_groups)
