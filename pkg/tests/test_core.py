import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisyt import (
    BadShape,
    Dataset,
    DimensionMismatch,
    EstimationReport,
    NegativeEntry,
    NonStochasticRow,
    TransitionMatrix,
    apply_transition,
    l1_matrix_distance,
    validate_transition_matrix,
)
from noisyt.core import make_report


def row_stochastic(draw_rows):
    m = np.asarray(draw_rows, dtype=float)
    return m / m.sum(axis=1, keepdims=True)


simplex_vectors = st.integers(2, 5).flatmap(
    lambda c: st.lists(st.floats(1e-3, 1.0), min_size=c, max_size=c)
).map(lambda v: np.asarray(v) / np.sum(v))


def matrices_for(c):
    return st.lists(
        st.lists(st.floats(1e-3, 1.0), min_size=c, max_size=c), min_size=c, max_size=c
    ).map(row_stochastic)


class TestValidateTransitionMatrix:
    def test_identity_accepted(self):
        t = validate_transition_matrix([[1, 0], [0, 1]])
        assert t.num_classes == 2
        assert np.array_equal(t.entries, np.eye(2))

    def test_symmetric_binary_accepted(self):
        t = validate_transition_matrix([[0.8, 0.2], [0.2, 0.8]])
        assert t.entries[0, 1] == 0.2

    def test_bad_row_sum_rejected(self):
        with pytest.raises(NonStochasticRow):
            validate_transition_matrix([[0.8, 0.1], [0.2, 0.8]])

    def test_negative_entry_rejected(self):
        with pytest.raises(NegativeEntry):
            validate_transition_matrix([[1.2, -0.2], [0.2, 0.8]])

    def test_non_square_rejected(self):
        with pytest.raises(BadShape):
            validate_transition_matrix([[0.5, 0.5]])

    def test_single_class_rejected(self):
        with pytest.raises(BadShape):
            validate_transition_matrix([[1.0]])

    def test_entries_immutable(self):
        t = validate_transition_matrix([[0.8, 0.2], [0.2, 0.8]])
        with pytest.raises(ValueError):
            t.entries[0, 0] = 0.5

    def test_json_round_trip(self, tmp_path):
        t = validate_transition_matrix([[0.55, 0.45], [0.45, 0.55]])
        path = tmp_path / "t.json"
        t.save(path)
        back = TransitionMatrix.load(path)
        assert np.array_equal(back.entries, t.entries)


class TestApplyTransition:
    def test_anchor_row_readoff(self):
        t = validate_transition_matrix([[0.8, 0.2], [0.2, 0.8]])
        out = apply_transition([1.0, 0.0], t)
        np.testing.assert_allclose(out, [0.8, 0.2], atol=1e-12)

    def test_symmetric_fixed_point(self):
        t = validate_transition_matrix([[0.7, 0.3], [0.3, 0.7]])
        np.testing.assert_allclose(apply_transition([0.5, 0.5], t), [0.5, 0.5], atol=1e-12)

    def test_hand_multiplication(self):
        # 0.3*0.8 + 0.7*0.2 = 0.38 in the first coordinate
        t = validate_transition_matrix([[0.8, 0.2], [0.2, 0.8]])
        np.testing.assert_allclose(apply_transition([0.3, 0.7], t), [0.38, 0.62], atol=1e-12)

    def test_dimension_mismatch(self):
        t = validate_transition_matrix([[0.8, 0.2], [0.2, 0.8]])
        with pytest.raises(DimensionMismatch):
            apply_transition([0.2, 0.3, 0.5], t)

    @settings(max_examples=60, deadline=None)
    @given(p=simplex_vectors, data=st.data())
    def test_preserves_simplex(self, p, data):
        t = validate_transition_matrix(data.draw(matrices_for(len(p))))
        out = apply_transition(p, t)
        assert np.all(out >= -1e-15)
        assert abs(out.sum() - 1.0) < 1e-9

    @settings(max_examples=30, deadline=None)
    @given(p=simplex_vectors)
    def test_identity_is_noop(self, p):
        t = validate_transition_matrix(np.eye(len(p)))
        np.testing.assert_allclose(apply_transition(p, t), p, atol=1e-12)


class TestL1MatrixDistance:
    def test_zero_on_equal(self):
        t = validate_transition_matrix([[0.8, 0.2], [0.2, 0.8]])
        assert l1_matrix_distance(t, t) == 0.0

    def test_four_entries_off_by_02(self):
        a = validate_transition_matrix(np.eye(2))
        b = validate_transition_matrix([[0.8, 0.2], [0.2, 0.8]])
        assert abs(l1_matrix_distance(a, b) - 0.8) < 1e-12

    def test_maximal_binary_distance(self):
        a = validate_transition_matrix([[1, 0], [0, 1]])
        b = validate_transition_matrix([[0, 1], [1, 0]])
        assert l1_matrix_distance(a, b) == 4.0

    def test_dimension_mismatch(self):
        a = validate_transition_matrix(np.eye(2))
        b = validate_transition_matrix(np.eye(3))
        with pytest.raises(DimensionMismatch):
            l1_matrix_distance(a, b)

    @settings(max_examples=40, deadline=None)
    @given(data=st.data(), c=st.integers(2, 4))
    def test_metric_properties(self, data, c):
        a = validate_transition_matrix(data.draw(matrices_for(c)))
        b = validate_transition_matrix(data.draw(matrices_for(c)))
        d = l1_matrix_distance(a, b)
        assert d >= 0
        assert d <= 2 * c + 1e-12
        assert d == l1_matrix_distance(b, a)
        if d == 0:
            assert np.array_equal(a.entries, b.entries)


class TestDataset:
    def test_label_range_checked(self):
        with pytest.raises(DimensionMismatch):
            Dataset(features=np.zeros((3, 2)), num_classes=2, clean_labels=[0, 1, 2])

    def test_empty_rejected(self):
        with pytest.raises(BadShape):
            Dataset(features=np.zeros((0, 2)), num_classes=2)

    def test_subset_keeps_labels(self, tiny_dataset):
        sub = tiny_dataset.subset([0, 2, 4])
        assert sub.n_samples == 3
        assert np.array_equal(sub.clean_labels, tiny_dataset.clean_labels[[0, 2, 4]])

    def test_features_immutable(self, tiny_dataset):
        with pytest.raises(ValueError):
            tiny_dataset.features[0, 0] = 7.0


class TestEstimationReport:
    def test_l1_requires_ground_truth(self):
        est = validate_transition_matrix([[0.8, 0.2], [0.2, 0.8]])
        with pytest.raises(ValueError):
            EstimationReport(estimated=est, anchor_indices=[0, 1], seed=0, l1_error=0.1)

    def test_error_fields_consistent(self):
        est = validate_transition_matrix([[0.8, 0.2], [0.2, 0.8]])
        truth = validate_transition_matrix(np.eye(2))
        rep = make_report(est.entries, [3, 7], seed=11, ground_truth=truth)
        assert abs(rep.l1_error - rep.per_entry_abs_error.sum()) < 1e-9
        assert abs(rep.l1_error - 0.8) < 1e-12

    def test_json_round_trip(self):
        est = validate_transition_matrix([[0.9, 0.1], [0.3, 0.7]])
        truth = validate_transition_matrix(np.eye(2))
        rep = make_report(
            est.entries, [1, 2], seed=5, ground_truth=truth,
            anchor_factor=est, count_factor=truth,
        )
        back = EstimationReport.from_json_dict(rep.to_json_dict())
        assert np.array_equal(back.estimated.entries, rep.estimated.entries)
        assert back.l1_error == rep.l1_error
        assert np.array_equal(back.anchor_indices, rep.anchor_indices)
        assert np.array_equal(back.count_factor.entries, truth.entries)
