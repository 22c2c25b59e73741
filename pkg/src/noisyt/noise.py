"""Benchmark noise models and label corruption.

Two standard transition-matrix families are provided: symmetric flipping
(uniform mass eps spread over the other classes) and pair flipping (all of
eps moved to the cyclically next class).  ``corrupt`` then samples noisy
labels row-wise from any valid transition matrix.
"""

from __future__ import annotations

import numpy as np

from .core import (
    STREAM_CORRUPT,
    BadEps,
    Dataset,
    DimensionMismatch,
    MissingCleanLabels,
    TransitionMatrix,
    philox_rng,
    validate_transition_matrix,
)


def _fix_row_sums(m: np.ndarray) -> np.ndarray:
    # Absorb constructor rounding into the final entry of each row so the
    # sums are exact up to one ulp; clamp in case the residual is negative.
    for i in range(m.shape[0]):
        s = m[i].sum()
        if s != 1.0:
            m[i, -1] = max(0.0, m[i, -1] + (1.0 - s))
    return m


def symmetric_matrix(num_classes: int, eps: float) -> TransitionMatrix:
    """Symmetric flipping: diagonal 1-eps, off-diagonal eps/(C-1)."""
    if num_classes < 2:
        raise DimensionMismatch(f"need at least 2 classes, got {num_classes}")
    if not 0.0 <= eps < 1.0:
        raise BadEps(f"eps must lie in [0, 1), got {eps}")
    c = num_classes
    m = np.full((c, c), eps / (c - 1))
    np.fill_diagonal(m, 1.0 - eps)
    return validate_transition_matrix(_fix_row_sums(m))


def pair_matrix(num_classes: int, eps: float) -> TransitionMatrix:
    """Pair flipping: diagonal 1-eps, entry (i, (i+1) mod C) = eps."""
    if num_classes < 2:
        raise DimensionMismatch(f"need at least 2 classes, got {num_classes}")
    if not 0.0 <= eps < 1.0:
        raise BadEps(f"eps must lie in [0, 1), got {eps}")
    c = num_classes
    m = np.zeros((c, c))
    for i in range(c):
        m[i, i] = 1.0 - eps
        m[i, (i + 1) % c] += eps
    return validate_transition_matrix(_fix_row_sums(m))


NOISE_KINDS = {"sym": symmetric_matrix, "pair": pair_matrix}


def noise_matrix(kind: str, num_classes: int, eps: float) -> TransitionMatrix:
    """Build one of the named noise models ('sym' or 'pair')."""
    try:
        builder = NOISE_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown noise kind {kind!r}; expected one of {sorted(NOISE_KINDS)}")
    return builder(num_classes, eps)


def corrupt(data: Dataset, T: TransitionMatrix, seed: int) -> Dataset:
    """Sample noisy labels for every row from its clean label's T row.

    Features and clean labels are untouched; the clean labels stay on the
    returned dataset for oracle use only.  Deterministic given the seed
    (own Philox stream, one uniform per row, inverse-CDF over the row).
    """
    if data.clean_labels is None:
        raise MissingCleanLabels("corrupt needs clean labels to flip from")
    if data.num_classes != T.num_classes:
        raise DimensionMismatch(
            f"dataset has {data.num_classes} classes, matrix {T.num_classes}"
        )
    rng = philox_rng(seed, STREAM_CORRUPT)
    u = rng.random(data.n_samples)
    cdf = np.cumsum(T.entries, axis=1)
    cdf[:, -1] = 1.0  # guard against cumulative rounding at the top end
    noisy = (u[:, None] >= cdf[data.clean_labels]).sum(axis=1)
    return data.with_noisy_labels(noisy)
