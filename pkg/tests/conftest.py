import numpy as np
import pytest

from noisyt import Dataset, GaussianSpec, corrupt, generate, symmetric_matrix


class LookupModel:
    """Test double: returns a fixed posterior table row-for-row."""

    def __init__(self, posteriors):
        self.posteriors = np.asarray(posteriors, dtype=float)

    def predict_proba(self, X):
        return self.posteriors[: len(X)]

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)


@pytest.fixture
def lookup_model_cls():
    return LookupModel


@pytest.fixture(scope="session")
def small_noisy_dataset():
    """600 synthetic points with Sym-20 noisy labels, for quick pipeline tests."""
    spec = GaussianSpec()
    data = generate(spec, 600, seed=123)
    return corrupt(data, symmetric_matrix(2, 0.2), seed=456)


@pytest.fixture
def tiny_dataset():
    rng = np.random.default_rng(0)
    return Dataset(
        features=rng.normal(size=(12, 3)),
        num_classes=2,
        clean_labels=rng.integers(0, 2, 12),
    )
