"""Synthetic two-class Gaussian benchmark data and its analytic posteriors.

Features are drawn from two isotropic Gaussians that share a variance and
differ only in their per-dimension mean, so the exact (Bayes) clean
posterior has a closed logistic form.  That closed form, pushed through a
transition matrix, also gives the exact noisy posterior.  Both serve as
ground truth for estimation-error measurements.

Sampling uses numpy's Philox counter-based bit generator with ziggurat
normal draws, so (seed, n, dim) fully determines the output stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    STREAM_GENERATE,
    Dataset,
    DimensionMismatch,
    OracleUnavailable,
    TransitionMatrix,
    apply_transition,
    philox_rng,
)


@dataclass(frozen=True)
class GaussianSpec:
    """Parameters of the two-Gaussian generative model.

    Class 0 has per-dimension mean ``mean0``, class 1 ``mean1``; both are
    isotropic with the given variance.  ``prior1`` is P(Y=1).
    """

    dim: int = 10
    mean0: float = 0.0
    mean1: float = 2.0
    variance: float = 1.0
    prior1: float = 0.5

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.variance <= 0:
            raise ValueError(f"variance must be > 0, got {self.variance}")
        if not 0.0 < self.prior1 < 1.0:
            raise ValueError(f"prior1 must lie strictly in (0, 1), got {self.prior1}")


def generate(spec: GaussianSpec, n: int, seed: int) -> Dataset:
    """Draw ``n`` labeled points from the two-Gaussian model.

    Labels are drawn first (one uniform per row against ``prior1``), then
    all features in one block, so the stream layout is fixed and the
    result is bit-identical across runs for the same (spec, n, seed).
    The stream is tagged, so reusing the same seed value in ``corrupt`` or
    the trainer cannot correlate with these draws.  The returned dataset
    carries clean labels only.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = philox_rng(seed, STREAM_GENERATE)
    labels = (rng.random(n) < spec.prior1).astype(np.int64)
    std = np.sqrt(spec.variance)
    means = np.where(labels[:, None] == 1, spec.mean1, spec.mean0)
    features = rng.standard_normal((n, spec.dim)) * std + means
    return Dataset(features=features, num_classes=2, clean_labels=labels)


def _check_dim(x: np.ndarray, spec: GaussianSpec) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.dim:
        raise DimensionMismatch(f"feature length {x.shape[-1]} != spec.dim {spec.dim}")
    return x


def _sigmoid(z):
    # Stable in both tails: never exponentiates a positive argument.
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def clean_posterior_logit(x, spec: GaussianSpec) -> np.ndarray:
    """Log-odds of class 1 for point(s) ``x`` under the generative model.

    Equal isotropic covariances make the posterior logistic in the feature
    sum: ``logit = a * sum(x) + b`` with ``a = (mean1 - mean0) / variance``
    and ``b = -dim (mean1^2 - mean0^2) / (2 variance) + log(prior1 / (1 - prior1))``.
    """
    x = _check_dim(x, spec)
    a = (spec.mean1 - spec.mean0) / spec.variance
    b = -spec.dim * (spec.mean1**2 - spec.mean0**2) / (2.0 * spec.variance)
    b += np.log(spec.prior1 / (1.0 - spec.prior1))
    return a * x.sum(axis=-1) + b


def oracle_clean_posterior(x, spec: GaussianSpec) -> np.ndarray:
    """Exact clean posterior [P(Y=0|x), P(Y=1|x)].

    Accepts a single feature vector (returns shape (2,)) or an (n, d)
    batch (returns (n, 2)).  The class-0 entry is the exact complement
    1 - p1, so rows sum to one exactly.
    """
    p1 = _sigmoid(clean_posterior_logit(x, spec))
    return np.stack([1.0 - p1, p1], axis=-1)


def oracle_noisy_posterior(x, spec: GaussianSpec, T: TransitionMatrix) -> np.ndarray:
    """Exact noisy posterior: the clean posterior pushed through ``T``."""
    if T.num_classes != 2:
        raise DimensionMismatch("synthetic oracle is binary; T must be 2x2")
    return apply_transition(oracle_clean_posterior(x, spec), T)


class OraclePosteriorModel:
    """Drop-in classifier whose posteriors are the analytic noisy posteriors.

    Substituting it for a trained network isolates anchor-selection error
    from posterior-estimation error.  With ``transition=None`` it predicts
    the clean posterior instead.
    """

    def __init__(self, spec: GaussianSpec, transition: TransitionMatrix | None = None):
        if spec is None:
            raise OracleUnavailable("analytic oracle needs a GaussianSpec")
        self.spec = spec
        self.transition = transition

    def predict_proba(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.transition is None:
            return oracle_clean_posterior(X, self.spec)
        return oracle_noisy_posterior(X, self.spec, self.transition)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)
