from itertools import permutations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fusecluster.cluster import (
    Clustering,
    GroundTruth,
    assign_argmax,
    assign_kmeans,
    read_assignments,
    write_assignments,
)
from fusecluster.errors import DataError, InsufficientData


class TestArgmax:
    def test_unique_maximum(self):
        assert assign_argmax(np.array([[0.1, 0.7, 0.2]])).assignment.tolist() == [1]

    def test_tie(self):
        assert assign_argmax(np.array([[0.5, 0.5]])).assignment.tolist() == [0]

    def test_zero_row(self):
        assert assign_argmax(np.zeros((1, 3))).assignment.tolist() == [0]

    def test_eval_rows_and_ids(self):
        U = np.array([[1, 0], [0, 1], [1, 0], [0, 1]], dtype=float)
        c = assign_argmax(U, [0, 1], ["a", "b", "woc0", "woc1"])
        assert c.doc_ids == ("a", "b")
        assert c.assignment.tolist() == [0, 1]

    def test_eval_rows_out_of_bounds(self):
        with pytest.raises(IndexError):
            assign_argmax(np.ones((2, 2)), [2])

    @given(st.integers(0, 2**31 - 1))
    def test_row_and_global_scale_invariance(self, seed):
        r = np.random.default_rng(seed)
        U = r.random((10, 4))
        base = assign_argmax(U).assignment
        assert np.array_equal(assign_argmax(U * r.uniform(0.1, 10, size=(10, 1))).assignment, base)
        assert np.array_equal(assign_argmax(U * 3.7).assignment, base)


def best_permutation_agreement(a, b, k):
    best = 0
    for perm in permutations(range(k)):
        best = max(best, sum(perm[x] == y for x, y in zip(a, b)))
    return best


class TestKMeansReadout:
    def test_distinct_points(self):
        U = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        c = assign_kmeans(U, num_clusters=3, seed=0)
        assert sorted(c.assignment.tolist()) == [0, 1, 2]

    def test_identical_rows(self):
        c = assign_kmeans(np.ones((5, 2)), num_clusters=2, seed=0)
        counts = sorted(np.bincount(c.assignment, minlength=2).tolist())
        assert counts in ([0, 5], [1, 4])

    def test_too_many_clusters(self):
        with pytest.raises(InsufficientData):
            assign_kmeans(np.ones((2, 2)), num_clusters=3)

    def test_three_blobs(self, rng):
        centers = np.array([[5.0, 0.1, 0.1], [0.1, 5.0, 0.1], [0.1, 0.1, 5.0]])
        truth = np.repeat(np.arange(3), 30)
        U = np.abs(centers[truth] + rng.normal(0, 0.3, size=(90, 3)))
        c = assign_kmeans(U, num_clusters=3, seed=2)
        assert best_permutation_agreement(c.assignment, truth, 3) == 90

    def test_excludes_woc_rows(self, rng):
        U = rng.random((12, 2))
        ids = [f"img{i}" for i in range(10)] + ["woc0", "woc1"]
        c = assign_kmeans(U, np.arange(10), 2, seed=0, doc_ids=ids)
        assert not any(d.startswith("woc") for d in c.doc_ids)

    def test_normalize_flag(self):
        U = np.array([[1.0, 0.0], [10.0, 0.0], [0.0, 1.0], [0.0, 10.0]])
        c = assign_kmeans(U, num_clusters=2, seed=0, normalize=True)
        assert c.assignment[0] == c.assignment[1] != c.assignment[2] == c.assignment[3]


class TestTypes:
    def test_clustering_bounds(self):
        with pytest.raises(DataError):
            Clustering([0, 3], 2, ["a", "b"])
        with pytest.raises(DataError):
            Clustering([0], 2, ["a", "b"])

    def test_ground_truth_from_labels(self):
        g = GroundTruth.from_labels({"a": "dog", "b": "cat", "c": "dog"})
        assert g.classes == {"a": 0, "b": 1, "c": 0}
        assert g.class_names == ("dog", "cat") and g.num_classes == 2

    def test_ground_truth_bounds(self):
        with pytest.raises(DataError):
            GroundTruth({"a": 2}, 2)


def test_assignment_round_trip(tmp_path):
    c = Clustering([1, 0, 2], 3, ["x", "y", "z"])
    write_assignments(tmp_path / "a.csv", c)
    assert (tmp_path / "a.csv").read_text().splitlines()[0] == "doc_id,cluster"
    back = read_assignments(tmp_path / "a.csv")
    assert back.as_dict() == c.as_dict()
