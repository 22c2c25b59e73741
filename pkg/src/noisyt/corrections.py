"""Loss adapters that consume an estimated transition matrix.

Two corrections are provided, both pluggable into the SGD trainer:

* forward correction: the softmax output is mapped through the transition
  matrix before the log loss, so the network itself models the clean
  posterior while the loss is taken against noisy labels.
* importance reweighting: the clean posterior is inferred by inverting the
  transition (clipped back onto the simplex), and each example's plain
  cross entropy is weighted by the clean-to-noisy mass ratio at its
  observed label.  The weight is treated as a constant during
  differentiation.

Both adapters operate on batches; the single-example functions wrap them.
"""

from __future__ import annotations

import numpy as np

from .core import Dataset, DimensionMismatch, SingularMatrix, TransitionMatrix
from .models import LOG_CLIP, FeedForwardClassifier, softmax, train_classifier

PIVOT_TOL = 1e-10


def invert_matrix(m: np.ndarray, pivot_tol: float = PIVOT_TOL) -> np.ndarray:
    """Invert a square matrix by Gauss-Jordan elimination with partial pivoting.

    Raises :class:`SingularMatrix` when the best available pivot falls
    below ``pivot_tol`` in absolute value.
    """
    a = np.array(m, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise DimensionMismatch(f"expected a square matrix, got {a.shape}")
    inv = np.eye(n)
    for col in range(n):
        pivot = col + int(np.argmax(np.abs(a[col:, col])))
        if abs(a[pivot, col]) < pivot_tol:
            raise SingularMatrix(f"pivot {a[pivot, col]!r} below {pivot_tol} at column {col}")
        if pivot != col:
            a[[col, pivot]] = a[[pivot, col]]
            inv[[col, pivot]] = inv[[pivot, col]]
        scale = a[col, col]
        a[col] /= scale
        inv[col] /= scale
        for row in range(n):
            if row != col and a[row, col] != 0.0:
                factor = a[row, col]
                a[row] -= factor * a[col]
                inv[row] -= factor * inv[col]
    return inv


class ForwardLoss:
    """Cross entropy on the transition-mapped posterior against noisy labels."""

    def __init__(self, transition: TransitionMatrix):
        self.transition = transition
        self._t = transition.entries

    def __call__(self, logits: np.ndarray, labels: np.ndarray):
        p = softmax(logits)
        b = labels.shape[0]
        idx = np.arange(b)
        pbar = p @ self._t
        pbar_y = pbar[idx, labels]
        loss = float(-np.log(np.maximum(pbar_y, LOG_CLIP)).mean())
        # d(-log pbar_y)/dlogits_k = p_k - p_k * T[k, y] / pbar_y; for the
        # identity matrix this reduces bit-exactly to the plain CE gradient.
        # Each numerator term is <= pbar_y, so the exact ratio is bounded;
        # the where() only guards division when pbar_y underflows to zero.
        u = self._t[:, labels].T
        safe = np.where(pbar_y > 0.0, pbar_y, 1.0)[:, None]
        grad = p - (p * u) / safe
        return loss, grad / b


class ReweightLoss:
    """Plain cross entropy weighted by inferred clean/noisy mass ratios."""

    def __init__(self, transition: TransitionMatrix):
        self.transition = transition
        self._t = transition.entries
        self._t_inv = invert_matrix(transition.entries)

    def infer_clean_posterior(self, p: np.ndarray) -> np.ndarray:
        """Invert the transition action on (a batch of) noisy posteriors.

        The raw solution of ``q @ T = p`` can leave the simplex; it is
        clipped to [0, 1] and renormalized.  Rows whose mass vanishes
        entirely under clipping fall back to uniform.
        """
        q = np.clip(np.atleast_2d(p) @ self._t_inv, 0.0, 1.0)
        s = q.sum(axis=1, keepdims=True)
        dead = (s <= 0.0).ravel()
        if dead.any():
            q[dead] = 1.0 / q.shape[1]
            s = q.sum(axis=1, keepdims=True)
        return q / s

    def __call__(self, logits: np.ndarray, labels: np.ndarray):
        p = softmax(logits)
        b = labels.shape[0]
        idx = np.arange(b)
        q = self.infer_clean_posterior(p)
        qbar = q @ self._t
        weight = q[idx, labels] / np.maximum(qbar[idx, labels], LOG_CLIP)
        py = p[idx, labels]
        loss = float((weight * -np.log(np.maximum(py, LOG_CLIP))).mean())
        grad = p.copy()
        grad[idx, labels] -= 1.0
        grad *= weight[:, None]  # weight is detached: no gradient through it
        return loss, grad / b


def forward_loss(logits, noisy_label: int, T: TransitionMatrix):
    """Forward-corrected loss and its logit gradient for one example."""
    logits = np.asarray(logits, dtype=float)
    if logits.shape != (T.num_classes,):
        raise DimensionMismatch(f"logits shape {logits.shape} != ({T.num_classes},)")
    loss, grad = ForwardLoss(T)(logits[None, :], np.array([noisy_label]))
    return loss, grad[0]


def reweight_loss(logits, noisy_label: int, T: TransitionMatrix):
    """Reweighted loss and its logit gradient for one example."""
    logits = np.asarray(logits, dtype=float)
    if logits.shape != (T.num_classes,):
        raise DimensionMismatch(f"logits shape {logits.shape} != ({T.num_classes},)")
    loss, grad = ReweightLoss(T)(logits[None, :], np.array([noisy_label]))
    return loss, grad[0]


def train_corrected(
    noisy_train: Dataset,
    noisy_val: Dataset,
    transition: TransitionMatrix,
    method: str,
    **model_params,
) -> FeedForwardClassifier:
    """Train a classifier with the chosen correction carrying ``transition``."""
    if method not in ("forward", "reweight"):
        raise ValueError(f"method must be 'forward' or 'reweight', got {method!r}")
    return train_classifier(
        noisy_train, noisy_val, loss=method, transition=transition, **model_params
    )
