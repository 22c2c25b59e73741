"""Core numeric types for label-noise learning.

Conventions used throughout the package:

* A transition matrix ``T`` is row stochastic: ``T[i, j]`` is the
  probability that a clean label ``i`` is observed as noisy label ``j``
  ("from" rows, "to" columns).  Acting on a class-posterior vector
  therefore goes through the transpose: ``noisy = T.T @ clean``, which
  :func:`apply_transition` implements as ``clean @ T``.
* Labels are 0-based everywhere, including all file formats.
* Posteriors produced internally are renormalized before validation to
  absorb float drift; the validation tolerance is 1e-9.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

SIMPLEX_ATOL = 1e-9

# Stream tags keep consumers of the same seed value on decorrelated Philox
# streams (e.g. generate(seed=s) followed by corrupt(..., seed=s) must not
# reuse the uniforms that drew the labels).
STREAM_GENERATE = 1
STREAM_CORRUPT = 2
STREAM_SPLIT = 3
STREAM_TRAIN = 4


def philox_rng(seed: int, stream: int) -> np.random.Generator:
    """Counter-based generator for (seed, stream), bit-stable across runs."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence((int(seed) & ((1 << 64) - 1), stream)))
    )


class BadShape(ValueError):
    """Matrix or vector does not have the required shape."""


class NegativeEntry(ValueError):
    """A probability entry is negative (or above one)."""


class NonStochasticRow(ValueError):
    """A matrix row does not sum to one within tolerance."""


class DimensionMismatch(ValueError):
    """Operands disagree on the number of classes or features."""


class BadEps(ValueError):
    """Noise level outside the valid range [0, 1)."""


class MissingCleanLabels(ValueError):
    """Operation requires clean labels that the dataset does not carry."""


class MissingNoisyLabels(ValueError):
    """Operation requires noisy labels that the dataset does not carry."""


class EmptyDataset(ValueError):
    """Operation requires at least one sample."""


class TooFewSamples(ValueError):
    """Not enough samples for the requested split."""


class OracleUnavailable(ValueError):
    """Analytic posterior oracle requested for non-synthetic data."""


class NonFiniteLoss(ArithmeticError):
    """Training produced a non-finite loss (divergence)."""


class SingularMatrix(ArithmeticError):
    """Matrix inversion hit a pivot below the singularity threshold."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TransitionMatrix:
    """Validated C x C row-stochastic matrix of label-flip probabilities.

    Immutable after construction; safe to share across workers.
    """

    entries: np.ndarray
    num_classes: int

    def __post_init__(self):
        object.__setattr__(self, "entries", _readonly(np.asarray(self.entries, dtype=float)))
        if self.entries.shape != (self.num_classes, self.num_classes):
            raise BadShape(
                f"entries shape {self.entries.shape} does not match num_classes={self.num_classes}"
            )

    def row(self, i: int) -> np.ndarray:
        return self.entries[i]

    def to_json_dict(self) -> dict:
        return {"num_classes": self.num_classes, "rows": self.entries.tolist()}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "TransitionMatrix":
        return validate_transition_matrix(np.asarray(obj["rows"], dtype=float))

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str) -> "TransitionMatrix":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def validate_transition_matrix(matrix) -> TransitionMatrix:
    """Validate a raw square matrix and wrap it as a :class:`TransitionMatrix`.

    Raises
    ------
    BadShape
        If the matrix is not square with at least two classes.
    NegativeEntry
        If any entry lies outside [0, 1].
    NonStochasticRow
        If any row sum deviates from one by more than 1e-9.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise BadShape(f"expected a square matrix, got shape {m.shape}")
    c = m.shape[0]
    if c < 2:
        raise BadShape(f"need at least 2 classes, got {c}")
    if not np.all(np.isfinite(m)):
        raise NegativeEntry("matrix contains non-finite entries")
    if np.any(m < 0) or np.any(m > 1):
        bad = np.argwhere((m < 0) | (m > 1))[0]
        raise NegativeEntry(f"entry {tuple(bad)} = {m[tuple(bad)]} outside [0, 1]")
    sums = m.sum(axis=1)
    off = np.abs(sums - 1.0)
    if np.any(off > SIMPLEX_ATOL):
        i = int(np.argmax(off))
        raise NonStochasticRow(f"row {i} sums to {sums[i]!r}, off by {off[i]:.3e}")
    return TransitionMatrix(entries=m, num_classes=c)


def validate_posterior(p) -> np.ndarray:
    """Check that ``p`` is a probability vector; returns it as float array."""
    v = np.asarray(p, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise BadShape(f"expected a length>=2 vector, got shape {v.shape}")
    if np.any(v < 0) or np.any(v > 1):
        raise NegativeEntry("posterior entries outside [0, 1]")
    if abs(v.sum() - 1.0) > SIMPLEX_ATOL:
        raise NonStochasticRow(f"posterior sums to {v.sum()!r}")
    return v


def apply_transition(p, T: TransitionMatrix) -> np.ndarray:
    """Map a clean-class posterior to the implied noisy-class posterior.

    Computes ``out[j] = sum_i T[i, j] * p[i]`` (the transpose action under
    the row-stochastic convention) and renormalizes to absorb float drift.
    Accepts a single vector or an (n, C) batch of rows.
    """
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != T.num_classes:
        raise DimensionMismatch(
            f"posterior length {p.shape[-1]} != num_classes {T.num_classes}"
        )
    out = p @ T.entries
    norm = out.sum(axis=-1, keepdims=p.ndim > 1)
    return out / norm


def l1_matrix_distance(a: TransitionMatrix, b: TransitionMatrix) -> float:
    """Entrywise l1 distance ``sum_ij |A_ij - B_ij|`` between two matrices."""
    if a.num_classes != b.num_classes:
        raise DimensionMismatch(
            f"num_classes {a.num_classes} != {b.num_classes}"
        )
    return float(np.abs(a.entries - b.entries).sum())


@dataclass(frozen=True)
class Dataset:
    """Feature rows with optional clean and noisy label vectors.

    ``features`` is (n, d) float; label vectors, when present, are length-n
    integer arrays with values in ``{0, ..., num_classes - 1}``.
    """

    features: np.ndarray
    num_classes: int
    clean_labels: Optional[np.ndarray] = None
    noisy_labels: Optional[np.ndarray] = None

    def __post_init__(self):
        x = np.asarray(self.features, dtype=float)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise BadShape(f"features must be (n>=1, d>=1), got {x.shape}")
        object.__setattr__(self, "features", _readonly(x))
        for name in ("clean_labels", "noisy_labels"):
            lab = getattr(self, name)
            if lab is None:
                continue
            lab = np.asarray(lab, dtype=np.int64)
            if lab.shape != (x.shape[0],):
                raise BadShape(f"{name} shape {lab.shape} != ({x.shape[0]},)")
            if lab.min() < 0 or lab.max() >= self.num_classes:
                raise DimensionMismatch(
                    f"{name} values must lie in [0, {self.num_classes})"
                )
            object.__setattr__(self, name, _readonly(lab))

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            features=self.features[idx],
            num_classes=self.num_classes,
            clean_labels=None if self.clean_labels is None else self.clean_labels[idx],
            noisy_labels=None if self.noisy_labels is None else self.noisy_labels[idx],
        )

    def with_noisy_labels(self, noisy) -> "Dataset":
        return Dataset(
            features=self.features,
            num_classes=self.num_classes,
            clean_labels=self.clean_labels,
            noisy_labels=noisy,
        )


def save_dataset_csv(data: Dataset, path: str) -> None:
    """Write a dataset as CSV: header f0,...,f{d-1}[,label][,noisy_label].

    Floats are written with 17 significant digits so round-trips are exact.
    Labels are 0-based.
    """
    header = [f"f{k}" for k in range(data.n_features)]
    if data.clean_labels is not None:
        header.append("label")
    if data.noisy_labels is not None:
        header.append("noisy_label")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(data.n_samples):
            row = [format(v, ".17g") for v in data.features[i]]
            if data.clean_labels is not None:
                row.append(str(int(data.clean_labels[i])))
            if data.noisy_labels is not None:
                row.append(str(int(data.noisy_labels[i])))
            writer.writerow(row)


def load_dataset_csv(path: str, num_classes: Optional[int] = None) -> Dataset:
    """Read a dataset CSV written by :func:`save_dataset_csv`.

    ``num_classes`` defaults to one more than the largest label present.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    if not rows:
        raise EmptyDataset(f"{path} contains a header but no rows")
    feat_cols = [i for i, h in enumerate(header) if h.startswith("f")]
    clean_col = header.index("label") if "label" in header else None
    noisy_col = header.index("noisy_label") if "noisy_label" in header else None
    feats = np.array([[float(r[i]) for i in feat_cols] for r in rows])
    clean = (
        np.array([int(r[clean_col]) for r in rows]) if clean_col is not None else None
    )
    noisy = (
        np.array([int(r[noisy_col]) for r in rows]) if noisy_col is not None else None
    )
    if num_classes is None:
        present = [v.max() for v in (clean, noisy) if v is not None]
        if not present:
            raise MissingCleanLabels(f"{path} has no label columns; pass num_classes")
        num_classes = int(max(present)) + 1
    return Dataset(
        features=feats, num_classes=num_classes, clean_labels=clean, noisy_labels=noisy
    )


def _matrix_or_none(obj):
    return None if obj is None else TransitionMatrix.from_json_dict(obj)


@dataclass(frozen=True)
class EstimationReport:
    """Result of one transition-matrix estimation run.

    ``l1_error`` and ``per_entry_abs_error`` are present exactly when a
    ground-truth matrix was supplied.  For the dual estimator the two
    factors are kept for audit: ``anchor_factor`` is the anchor-point
    read-off and ``count_factor`` the counted intermediate-to-noisy matrix.
    """

    estimated: TransitionMatrix
    anchor_indices: np.ndarray
    seed: int
    ground_truth: Optional[TransitionMatrix] = None
    l1_error: Optional[float] = None
    per_entry_abs_error: Optional[np.ndarray] = None
    anchor_factor: Optional[TransitionMatrix] = None
    count_factor: Optional[TransitionMatrix] = None

    def __post_init__(self):
        object.__setattr__(
            self, "anchor_indices", _readonly(np.asarray(self.anchor_indices, dtype=np.int64))
        )
        if (self.ground_truth is None) != (self.l1_error is None):
            raise ValueError("l1_error must be present iff ground_truth is present")
        if self.per_entry_abs_error is not None:
            pe = _readonly(np.asarray(self.per_entry_abs_error, dtype=float))
            object.__setattr__(self, "per_entry_abs_error", pe)
            if self.l1_error is None or abs(pe.sum() - self.l1_error) > SIMPLEX_ATOL:
                raise ValueError("l1_error must equal the sum of per-entry errors")

    def to_json_dict(self) -> dict:
        return {
            "seed": int(self.seed),
            "anchor_indices": [int(i) for i in self.anchor_indices],
            "estimated": self.estimated.to_json_dict(),
            "ground_truth": None
            if self.ground_truth is None
            else self.ground_truth.to_json_dict(),
            "l1_error": self.l1_error,
            "per_entry_abs_error": None
            if self.per_entry_abs_error is None
            else self.per_entry_abs_error.tolist(),
            "anchor_factor": None
            if self.anchor_factor is None
            else self.anchor_factor.to_json_dict(),
            "count_factor": None
            if self.count_factor is None
            else self.count_factor.to_json_dict(),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "EstimationReport":
        return cls(
            estimated=TransitionMatrix.from_json_dict(obj["estimated"]),
            anchor_indices=np.asarray(obj["anchor_indices"], dtype=np.int64),
            seed=int(obj["seed"]),
            ground_truth=_matrix_or_none(obj.get("ground_truth")),
            l1_error=obj.get("l1_error"),
            per_entry_abs_error=None
            if obj.get("per_entry_abs_error") is None
            else np.asarray(obj["per_entry_abs_error"], dtype=float),
            anchor_factor=_matrix_or_none(obj.get("anchor_factor")),
            count_factor=_matrix_or_none(obj.get("count_factor")),
        )

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def make_report(
    estimated_rows: np.ndarray,
    anchor_indices: np.ndarray,
    seed: int,
    ground_truth: Optional[TransitionMatrix] = None,
    anchor_factor: Optional[TransitionMatrix] = None,
    count_factor: Optional[TransitionMatrix] = None,
) -> EstimationReport:
    """Validate estimated rows and attach error metrics when truth is known."""
    est = validate_transition_matrix(estimated_rows)
    l1 = per_entry = None
    if ground_truth is not None:
        per_entry = np.abs(est.entries - ground_truth.entries)
        l1 = float(per_entry.sum())
    return EstimationReport(
        estimated=est,
        anchor_indices=anchor_indices,
        seed=seed,
        ground_truth=ground_truth,
        l1_error=l1,
        per_entry_abs_error=per_entry,
        anchor_factor=anchor_factor,
        count_factor=count_factor,
    )
