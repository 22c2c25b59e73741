"""Transition-matrix estimators built on anchor points.

Two routes are implemented:

* ``t_estimate``: the direct anchor-point estimator.  For each class the
  training row with the largest predicted posterior for that class is
  taken as its anchor, and the model posterior at the anchor becomes the
  matrix row.
* ``dual_t_estimate``: a factored estimator.  The anchor read-off above is
  reused as the clean-to-intermediate factor (the intermediate class is
  defined to have exactly the model's posterior), while the
  intermediate-to-noisy factor is obtained by counting how the model's
  argmax labels co-occur with the observed noisy labels.  The product of
  the two factors is the estimate.  Counting concentrates fast and does
  not inherit the posterior's estimation error, which is what makes the
  factored route more robust on moderate sample sizes.

Anchors are always searched over the rows passed in (by convention the
training split, whose points the model has actually fit).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, clone

from .core import (
    Dataset,
    DimensionMismatch,
    EmptyDataset,
    EstimationReport,
    MissingNoisyLabels,
    TransitionMatrix,
    make_report,
    validate_transition_matrix,
)
from .models import FeedForwardClassifier, split_train_val


class EmptyIntermediateClassWarning(UserWarning):
    """Raised when a class receives no intermediate labels during counting."""


@dataclass(frozen=True)
class AnchorSet:
    """Per-class anchor rows and the model posteriors at those rows."""

    indices: np.ndarray  # (C,) row indices into the searched dataset
    posteriors: np.ndarray  # (C, C); row i is the posterior at class i's anchor


def _posteriors(model, data: Dataset) -> np.ndarray:
    if data.n_samples == 0:
        raise EmptyDataset("cannot estimate from an empty dataset")
    p = np.asarray(model.predict_proba(data.features), dtype=float)
    if p.shape != (data.n_samples, data.num_classes):
        raise DimensionMismatch(
            f"model produced posteriors of shape {p.shape}, "
            f"expected {(data.n_samples, data.num_classes)}"
        )
    return p


def find_anchors(model, data: Dataset) -> AnchorSet:
    """Pick, per class, the row maximizing that class's predicted posterior.

    Ties break to the lowest row index; on degenerate data anchors for
    distinct classes may coincide.
    """
    p = _posteriors(model, data)
    idx = np.argmax(p, axis=0)
    return AnchorSet(indices=idx, posteriors=p[idx])


def t_estimate(
    model,
    data: Dataset,
    ground_truth: TransitionMatrix | None = None,
    seed: int = 0,
) -> EstimationReport:
    """Anchor-point estimate: matrix row i is the posterior at class i's anchor."""
    anchors = find_anchors(model, data)
    rows = anchors.posteriors / anchors.posteriors.sum(axis=1, keepdims=True)
    return make_report(rows, anchors.indices, seed, ground_truth)


def intermediate_labels(model, data: Dataset) -> np.ndarray:
    """Hard labels from the model posterior: per-row argmax, ties to lowest."""
    return np.argmax(_posteriors(model, data), axis=1)


def count_transitions(intermediate, noisy, num_classes: int) -> TransitionMatrix:
    """Estimate P(noisy=j | intermediate=l) by counting label co-occurrences.

    A class that never appears as an intermediate label yields an empty
    row; it falls back to the one-hot row for that class and an
    :class:`EmptyIntermediateClassWarning` is issued.
    """
    inter = np.asarray(intermediate, dtype=np.int64)
    noisy = np.asarray(noisy, dtype=np.int64)
    if inter.shape != noisy.shape or inter.ndim != 1:
        raise DimensionMismatch(
            f"label vectors must be equal-length 1-d, got {inter.shape} and {noisy.shape}"
        )
    for name, lab in (("intermediate", inter), ("noisy", noisy)):
        if lab.min() < 0 or lab.max() >= num_classes:
            raise DimensionMismatch(f"{name} labels must lie in [0, {num_classes})")
    counts = np.zeros((num_classes, num_classes))
    np.add.at(counts, (inter, noisy), 1.0)
    totals = counts.sum(axis=1)
    empty = np.flatnonzero(totals == 0)
    if empty.size:
        warnings.warn(
            f"intermediate classes {empty.tolist()} received no labels; "
            "their rows fall back to one-hot",
            EmptyIntermediateClassWarning,
            stacklevel=2,
        )
        counts[empty, empty] = 1.0
        totals[empty] = 1.0
    rows = counts / totals[:, None]
    rows /= rows.sum(axis=1, keepdims=True)
    return validate_transition_matrix(rows)


def dual_t_estimate(
    model,
    data: Dataset,
    ground_truth: TransitionMatrix | None = None,
    seed: int = 0,
) -> EstimationReport:
    """Factored estimate: anchor read-off composed with counted transitions.

    The combined matrix is ``anchor_factor @ count_factor`` (entry (i, j)
    sums the anchor row i against the counted column j over the
    intermediate class).  Both factors are kept on the report for audit.
    """
    if data.noisy_labels is None:
        raise MissingNoisyLabels("dual estimation counts against noisy labels")
    base = t_estimate(model, data, ground_truth=None, seed=seed)
    anchor_factor = base.estimated
    inter = intermediate_labels(model, data)
    count_factor = count_transitions(inter, data.noisy_labels, data.num_classes)
    combined = anchor_factor.entries @ count_factor.entries
    combined /= combined.sum(axis=1, keepdims=True)
    return make_report(
        combined,
        base.anchor_indices,
        seed,
        ground_truth,
        anchor_factor=anchor_factor,
        count_factor=count_factor,
    )


ESTIMATORS = {"t": t_estimate, "dualt": dual_t_estimate}


class TransitionEstimator(BaseEstimator):
    """sklearn-style wrapper: fit on (X, noisy y), expose the estimated matrix.

    Parameters
    ----------
    method : {"t", "dualt"}
        Estimation route; see the module docstring.
    classifier : estimator, optional
        Unfitted posterior model to clone and train; defaults to the
        package's :class:`FeedForwardClassifier`.
    num_classes : int, optional
        Inferred from the labels when omitted.
    val_fraction, seed : split/checkpoint controls for the inner training.

    Attributes (after fit)
    ----------------------
    transition_matrix_ : TransitionMatrix
    anchor_indices_ : indices into the training split used for the split.
    report_ : the full :class:`EstimationReport`.
    classifier_ : the fitted posterior model.
    """

    def __init__(self, method="dualt", classifier=None, num_classes=None,
                 val_fraction=0.2, seed=0):
        self.method = method
        self.classifier = classifier
        self.num_classes = num_classes
        self.val_fraction = val_fraction
        self.seed = seed

    def fit(self, X, y):
        if self.method not in ESTIMATORS:
            raise ValueError(f"method must be one of {sorted(ESTIMATORS)}, got {self.method!r}")
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=np.int64)
        c = self.num_classes if self.num_classes is not None else int(y.max()) + 1
        data = Dataset(features=X, num_classes=c, noisy_labels=y)
        train, val = split_train_val(data, self.val_fraction, self.seed)
        if self.classifier is None:
            clf = FeedForwardClassifier(num_classes=c, seed=self.seed)
        else:
            clf = clone(self.classifier)
        clf.fit(train.features, train.noisy_labels, val.features, val.noisy_labels)
        report = ESTIMATORS[self.method](clf, train, seed=self.seed)
        self.classifier_ = clf
        self.report_ = report
        self.transition_matrix_ = report.estimated
        self.anchor_indices_ = report.anchor_indices
        return self
