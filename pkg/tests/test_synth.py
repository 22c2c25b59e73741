import math

import numpy as np
import pytest

from noisyt import (
    DimensionMismatch,
    GaussianSpec,
    OraclePosteriorModel,
    generate,
    load_dataset_csv,
    oracle_clean_posterior,
    oracle_noisy_posterior,
    save_dataset_csv,
    symmetric_matrix,
    validate_transition_matrix,
)

SPEC = GaussianSpec()


def sigmoid(z):
    return 1.0 / (1.0 + math.exp(-z))


class TestGenerate:
    def test_deterministic(self):
        a = generate(SPEC, 4, seed=7)
        b = generate(SPEC, 4, seed=7)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.clean_labels, b.clean_labels)
        assert a.noisy_labels is None

    def test_seed_changes_output(self):
        a = generate(SPEC, 16, seed=7)
        b = generate(SPEC, 16, seed=8)
        assert not np.array_equal(a.features, b.features)

    def test_class_fraction(self):
        data = generate(SPEC, 100000, seed=1)
        assert abs(data.clean_labels.mean() - 0.5) < 0.01

    def test_class1_moments(self):
        data = generate(SPEC, 100000, seed=1)
        ones = data.features[data.clean_labels == 1]
        assert np.all(np.abs(ones.mean(axis=0) - 2.0) < 0.05)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            GaussianSpec(variance=0.0)
        with pytest.raises(ValueError):
            GaussianSpec(prior1=1.0)
        with pytest.raises(ValueError):
            generate(SPEC, 0, seed=1)


class TestCleanPosteriorOracle:
    def test_midpoint_is_half(self):
        p = oracle_clean_posterior(np.ones(10), SPEC)
        np.testing.assert_allclose(p, [0.5, 0.5], atol=1e-12)

    def test_class1_mean_point(self):
        p = oracle_clean_posterior(np.full(10, 2.0), SPEC)
        assert abs(p[1] - sigmoid(20.0)) < 1e-12

    def test_class0_mean_point(self):
        p = oracle_clean_posterior(np.zeros(10), SPEC)
        assert abs(p[1] - sigmoid(-20.0)) < 1e-15

    def test_sums_to_one_exactly(self):
        rng = np.random.default_rng(3)
        x = rng.normal(1.0, 2.0, size=(200, 10))
        p = oracle_clean_posterior(x, SPEC)
        assert np.all(p.sum(axis=1) == 1.0)

    def test_monotone_in_feature_sum(self):
        scales = np.linspace(-3, 3, 25)
        probs = [oracle_clean_posterior(np.full(10, s), SPEC)[1] for s in scales]
        assert np.all(np.diff(probs) > 0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            oracle_clean_posterior(np.ones(9), SPEC)


class TestNoisyPosteriorOracle:
    def test_symmetric_input(self):
        t = symmetric_matrix(2, 0.2)
        np.testing.assert_allclose(
            oracle_noisy_posterior(np.ones(10), SPEC, t), [0.5, 0.5], atol=1e-12
        )

    def test_near_anchor_reads_row(self):
        t = symmetric_matrix(2, 0.2)
        p = oracle_noisy_posterior(np.full(10, 2.0), SPEC, t)
        np.testing.assert_allclose(p, [0.2, 0.8], atol=1e-7)

    def test_identity_noise(self):
        t = validate_transition_matrix(np.eye(2))
        x = np.random.default_rng(5).normal(size=10)
        np.testing.assert_allclose(
            oracle_noisy_posterior(x, SPEC, t),
            oracle_clean_posterior(x, SPEC),
            atol=1e-12,
        )


def test_bayes_accuracy_matches_analytic_risk():
    # Two isotropic unit-variance Gaussians at distance 2*sqrt(10): the
    # Bayes error is Phi(-sqrt(10)), evaluated via erfc.
    data = generate(SPEC, 100000, seed=2)
    model = OraclePosteriorModel(SPEC)
    acc = (model.predict(data.features) == data.clean_labels).mean()
    bayes = 1.0 - 0.5 * math.erfc(math.sqrt(10.0) / math.sqrt(2.0))
    assert abs(acc - bayes) < 0.01


class TestCsvRoundTrip:
    def test_exact_floats_and_labels(self, tmp_path, small_noisy_dataset):
        path = tmp_path / "data.csv"
        save_dataset_csv(small_noisy_dataset, path)
        header = path.read_text().splitlines()[0]
        assert header == "f0,f1,f2,f3,f4,f5,f6,f7,f8,f9,label,noisy_label"
        back = load_dataset_csv(path)
        assert np.array_equal(back.features, small_noisy_dataset.features)
        assert np.array_equal(back.clean_labels, small_noisy_dataset.clean_labels)
        assert np.array_equal(back.noisy_labels, small_noisy_dataset.noisy_labels)
        assert back.num_classes == 2

    def test_clean_only(self, tmp_path):
        data = generate(SPEC, 10, seed=9)
        path = tmp_path / "clean.csv"
        save_dataset_csv(data, path)
        back = load_dataset_csv(path)
        assert back.noisy_labels is None
        assert np.array_equal(back.features, data.features)
