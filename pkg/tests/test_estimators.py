import numpy as np
import pytest

from noisyt import (
    Dataset,
    DimensionMismatch,
    GaussianSpec,
    MissingNoisyLabels,
    OraclePosteriorModel,
    TransitionEstimator,
    corrupt,
    count_transitions,
    dual_t_estimate,
    find_anchors,
    generate,
    intermediate_labels,
    symmetric_matrix,
    t_estimate,
    validate_transition_matrix,
)
from noisyt.estimators import EmptyIntermediateClassWarning


def dataset_for(posteriors, noisy=None):
    n = len(posteriors)
    return Dataset(
        features=np.zeros((n, 1)),
        num_classes=len(posteriors[0]),
        noisy_labels=noisy,
    )


class TestFindAnchors:
    def test_direct_argmax(self, lookup_model_cls):
        model = lookup_model_cls([[0.9, 0.1], [0.2, 0.8], [0.6, 0.4]])
        anchors = find_anchors(model, dataset_for([[0.9, 0.1]] * 3))
        assert anchors.indices.tolist() == [0, 1]
        np.testing.assert_allclose(anchors.posteriors[0], [0.9, 0.1])

    def test_ties_take_lowest_index(self, lookup_model_cls):
        model = lookup_model_cls([[0.5, 0.5]] * 4)
        anchors = find_anchors(model, dataset_for([[0.5, 0.5]] * 4))
        assert anchors.indices.tolist() == [0, 0]

    def test_oracle_anchor_is_max_feature_sum(self):
        # the logistic posterior is monotone in the feature sum, but it
        # saturates to exactly 1.0 in float for the extreme rows; the anchor
        # must land inside that saturated top group
        spec = GaussianSpec()
        data = generate(spec, 10000, seed=21)
        model = OraclePosteriorModel(spec)
        anchors = find_anchors(model, data)
        sums = data.features.sum(axis=1)
        p = model.predict_proba(data.features)
        top1 = sums[p[:, 1] == p[:, 1].max()]
        top0 = sums[p[:, 0] == p[:, 0].max()]
        assert sums[anchors.indices[1]] >= top1.min()
        assert sums[anchors.indices[0]] <= top0.max()
        assert p[anchors.indices[1], 1] == p[:, 1].max()
        assert p[anchors.indices[0], 0] == p[:, 0].max()


class TestTEstimate:
    def test_uniform_model_gives_uniform_rows(self, lookup_model_cls):
        model = lookup_model_cls([[0.5, 0.5]] * 5)
        truth = validate_transition_matrix(np.eye(2))
        report = t_estimate(model, dataset_for([[0.5, 0.5]] * 5), ground_truth=truth)
        np.testing.assert_allclose(report.estimated.entries, 0.5)
        # l1 error vs identity: 2C(1 - 1/C) = 2 for C=2
        assert abs(report.l1_error - 2.0) < 1e-12

    def test_perfect_anchors(self, lookup_model_cls):
        model = lookup_model_cls([[1.0, 0.0], [0.0, 1.0]])
        truth = validate_transition_matrix(np.eye(2))
        report = t_estimate(model, dataset_for([[1, 0]] * 2), ground_truth=truth)
        assert report.l1_error == 0.0
        assert np.array_equal(report.estimated.entries, np.eye(2))

    def test_report_carries_anchor_indices(self, lookup_model_cls):
        model = lookup_model_cls([[0.2, 0.8], [0.7, 0.3], [0.4, 0.6]])
        report = t_estimate(model, dataset_for([[0.2, 0.8]] * 3))
        assert report.anchor_indices.tolist() == [1, 0]
        assert report.l1_error is None and report.ground_truth is None


class TestIntermediateLabels:
    def test_argmax_rows(self, lookup_model_cls):
        model = lookup_model_cls([[0.7, 0.3], [0.4, 0.6]])
        labels = intermediate_labels(model, dataset_for([[0.7, 0.3]] * 2))
        assert labels.tolist() == [0, 1]

    def test_uniform_ties_to_zero(self, lookup_model_cls):
        model = lookup_model_cls([[0.5, 0.5]] * 3)
        labels = intermediate_labels(model, dataset_for([[0.5, 0.5]] * 3))
        assert labels.tolist() == [0, 0, 0]

    def test_matches_predict(self, lookup_model_cls):
        rows = [[0.2, 0.8], [0.9, 0.1], [0.45, 0.55]]
        model = lookup_model_cls(rows)
        data = dataset_for(rows)
        assert np.array_equal(intermediate_labels(model, data), model.predict(data.features))


class TestCountTransitions:
    def test_direct_count(self):
        t = count_transitions([0, 0, 1, 1], [0, 1, 1, 1], 2)
        np.testing.assert_allclose(t.entries, [[0.5, 0.5], [0.0, 1.0]], atol=0)

    def test_identical_labels_identity(self):
        labels = np.array([0, 1, 2, 1, 0, 2, 2])
        t = count_transitions(labels, labels, 3)
        assert np.array_equal(t.entries, np.eye(3))

    def test_empty_class_one_hot_with_warning(self):
        with pytest.warns(EmptyIntermediateClassWarning):
            t = count_transitions([0, 0, 1, 1], [0, 1, 2, 1], 3)
        np.testing.assert_allclose(t.entries[2], [0.0, 0.0, 1.0], atol=0)

    def test_brute_force_equivalence(self):
        rng = np.random.default_rng(33)
        for _ in range(60):
            n = int(rng.integers(1, 13))
            c = int(rng.integers(2, 4))
            inter = rng.integers(0, c, n)
            noisy = rng.integers(0, c, n)
            naive = np.zeros((c, c))
            for l in range(c):
                rows = [k for k in range(n) if inter[k] == l]
                if not rows:
                    naive[l, l] = 1.0
                    continue
                for j in range(c):
                    naive[l, j] = sum(1 for k in rows if noisy[k] == j) / len(rows)
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore", EmptyIntermediateClassWarning)
                got = count_transitions(inter, noisy, c)
            np.testing.assert_allclose(got.entries, naive, atol=1e-12)
            validate_transition_matrix(got.entries)

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatch):
            count_transitions([0, 1], [0, 1, 1], 2)


class TestDualTEstimate:
    def test_identity_count_factor_reduces_to_t(self, lookup_model_cls):
        # one-hot posteriors matching the noisy labels force the counted
        # factor to the identity, so the dual output equals the direct one
        noisy = np.array([0, 1, 1, 0, 1])
        posteriors = np.eye(2)[noisy]
        model = lookup_model_cls(posteriors)
        data = dataset_for(posteriors, noisy=noisy)
        dual = dual_t_estimate(model, data)
        direct = t_estimate(model, data)
        assert np.array_equal(dual.count_factor.entries, np.eye(2))
        assert np.abs(dual.estimated.entries - direct.estimated.entries).max() < 1e-12

    def test_composition_is_explicit_double_sum(self, lookup_model_cls):
        rng = np.random.default_rng(40)
        rows = rng.dirichlet(np.ones(3), size=30)
        noisy = rng.integers(0, 3, 30)
        model = lookup_model_cls(rows)
        data = Dataset(features=np.zeros((30, 1)), num_classes=3, noisy_labels=noisy)
        report = dual_t_estimate(model, data)
        a = report.anchor_factor.entries
        s = report.count_factor.entries
        explicit = np.zeros((3, 3))
        for i in range(3):
            for j in range(3):
                explicit[i, j] = sum(a[i, l] * s[l, j] for l in range(3))
        explicit /= explicit.sum(axis=1, keepdims=True)
        np.testing.assert_allclose(report.estimated.entries, explicit, atol=1e-12)

    def test_requires_noisy_labels(self, lookup_model_cls):
        model = lookup_model_cls([[0.5, 0.5]] * 3)
        with pytest.raises(MissingNoisyLabels):
            dual_t_estimate(model, dataset_for([[0.5, 0.5]] * 3))

    def test_factors_on_report(self, lookup_model_cls):
        noisy = np.array([0, 1, 0, 1])
        rows = np.array([[0.8, 0.2], [0.3, 0.7], [0.6, 0.4], [0.25, 0.75]])
        model = lookup_model_cls(rows)
        data = dataset_for(rows, noisy=noisy)
        report = dual_t_estimate(model, data)
        assert report.anchor_factor is not None
        assert report.count_factor is not None
        validate_transition_matrix(report.estimated.entries)


class TestTransitionEstimatorApi:
    def test_fit_sets_attributes(self, small_noisy_dataset):
        est = TransitionEstimator(method="dualt", seed=3)
        est.set_params(classifier=None)
        est.fit(small_noisy_dataset.features, small_noisy_dataset.noisy_labels)
        validate_transition_matrix(est.transition_matrix_.entries)
        assert est.report_.count_factor is not None
        assert len(est.anchor_indices_) == 2

    def test_get_params_round_trip(self):
        est = TransitionEstimator(method="t", seed=9)
        params = est.get_params()
        assert params["method"] == "t" and params["seed"] == 9
        clone = TransitionEstimator(**params)
        assert clone.get_params() == params

    def test_unknown_method(self, small_noisy_dataset):
        with pytest.raises(ValueError):
            TransitionEstimator(method="triple").fit(
                small_noisy_dataset.features, small_noisy_dataset.noisy_labels
            )


def test_oracle_model_pipeline_binary_sym20():
    # with exact posteriors the only error left is anchor quality
    spec = GaussianSpec()
    truth = symmetric_matrix(2, 0.2)
    data = corrupt(generate(spec, 20000, seed=50), truth, seed=51)
    model = OraclePosteriorModel(spec, truth)
    report = t_estimate(model, data, ground_truth=truth)
    assert report.l1_error < 0.05
