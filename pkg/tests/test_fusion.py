import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from fusecluster.errors import DataError, DimensionError, IdMismatch, VocabularyMismatch
from fusecluster.fusion import (
    TEXT_FEATURE,
    VISUAL_FEATURE,
    WOC_DOC,
    FusedMatrix,
    apply_idf,
    assemble_fused,
    compute_idf,
    read_fused,
    write_fused,
)
from fusecluster.textcorpus import CountMatrix


def cm(values, prefix="r"):
    values = np.asarray(values, dtype=np.int64)
    return CountMatrix.from_dense(values, [f"{prefix}{i}" for i in range(values.shape[0])])


def random_blocks(seed, n=5, k=2, p=4, q=3, density=0.5):
    r = np.random.default_rng(seed)
    A = r.integers(0, 4, size=(n, p)) * (r.random((n, p)) < density)
    B = r.integers(0, 4, size=(n, q)) * (r.random((n, q)) < density)
    C = r.integers(0, 4, size=(k, q)) * (r.random((k, q)) < density)
    return cm(A, "img"), cm(B, "img"), cm(C, "woc")


def brute_idf(dense, N):
    out = []
    for j in range(dense.shape[1]):
        df = 0
        for i in range(dense.shape[0]):
            if dense[i, j] > 0:
                df += 1
        out.append(max(math.log(N / df), 0.0) if df else 0.0)
    return np.array(out)


class TestAssemble:
    def test_direct_block_placement(self):
        M = assemble_fused(cm(np.ones((2, 2))), cm(np.zeros((2, 1))), cm([[3]], "w"))
        assert M.toarray().tolist() == [[1, 1, 0], [1, 1, 0], [0, 0, 3]]

    def test_full_scale_shape(self):
        n, k, p, q = 4500, 9, 50, 30
        A = CountMatrix(sp.csr_matrix((n, p), dtype=np.int64), [f"i{i}" for i in range(n)])
        B = CountMatrix(sp.csr_matrix((n, q), dtype=np.int64), A.row_ids)
        C = CountMatrix(sp.csr_matrix(np.ones((k, q), dtype=np.int64)), [f"w{i}" for i in range(k)])
        assert assemble_fused(A, B, C).shape == (4509, p + q)

    def test_index_remapping(self):
        for seed in range(10):
            A, B, C = random_blocks(seed)
            M = assemble_fused(A, B, C).toarray()
            a, b, c = A.toarray(), B.toarray(), C.toarray()
            n, p = a.shape
            for i in range(M.shape[0]):
                for j in range(M.shape[1]):
                    if i < n and j < p:
                        src = a[i, j]
                    elif i < n:
                        src = b[i, j - p]
                    elif j < p:
                        src = 0
                    else:
                        src = c[i - n, j - p]
                    assert M[i, j] == src

    def test_roles_and_ids(self):
        A, B, C = random_blocks(0)
        M = assemble_fused(A, B, C, ["x", "y", "z"])
        assert M.row_roles[-2:] == (WOC_DOC, WOC_DOC)
        assert M.col_roles == (VISUAL_FEATURE,) * 4 + (TEXT_FEATURE,) * 3
        assert M.row_ids == A.row_ids + C.row_ids
        assert M.col_ids == ("v0", "v1", "v2", "v3", "x", "y", "z")
        assert (M.n, M.k, M.p, M.q) == (5, 2, 4, 3)

    def test_m_counts_captioned_rows(self):
        A = cm(np.ones((3, 2)), "img")
        B = cm([[1, 0], [0, 0], [0, 2]], "img")
        assert assemble_fused(A, B).m == 2

    def test_image_only(self):
        A = cm(np.eye(3), "img")
        M = assemble_fused(A)
        assert M.shape == (3, 3) and M.q == 0 and M.k == 0

    def test_row_mismatch(self):
        with pytest.raises(DimensionError):
            assemble_fused(cm(np.ones((2, 2))), cm(np.ones((3, 1))))

    def test_vocabulary_mismatch(self):
        with pytest.raises(VocabularyMismatch):
            assemble_fused(cm(np.ones((2, 2))), cm(np.ones((2, 1))), cm(np.ones((1, 2)), "w"))

    def test_unaligned_ids(self):
        A = cm(np.ones((2, 2)), "img")
        B = CountMatrix.from_dense(np.ones((2, 1), int), ["img1", "img0"])
        with pytest.raises(IdMismatch):
            assemble_fused(A, B)

    def test_nonzero_lower_left_rejected(self):
        with pytest.raises(DataError):
            FusedMatrix(sp.csr_matrix(np.ones((2, 2))), 1, 0, 1, 1, 1, ["a", "b"], ["v", "t"])

    @given(st.integers(0, 2**31 - 1))
    def test_round_trip_blocks(self, seed):
        A, B, C = random_blocks(seed)
        a, b, c = assemble_fused(A, B, C).blocks()
        assert np.array_equal(a, A.toarray())
        assert np.array_equal(b, B.toarray())
        assert np.array_equal(c, C.toarray())


class TestIdf:
    def test_ubiquitous_feature(self):
        M = assemble_fused(cm([[1, 0], [2, 1], [5, 0]]))
        w = compute_idf(M)
        assert w.weights[0] == 0.0

    def test_one_of_four(self):
        M = assemble_fused(cm([[1], [0], [0], [0]]))
        assert compute_idf(M).weights[0] == pytest.approx(1.386294, abs=1e-6)
        assert compute_idf(M).weights[0] == math.log(4)

    def test_unused_column(self):
        assert compute_idf(assemble_fused(cm([[0, 1], [0, 1]]))).weights[0] == 0.0

    def test_ten_by_six_fixture(self, rng):
        dense = rng.integers(0, 3, size=(10, 6)) * (rng.random((10, 6)) < 0.4)
        M = assemble_fused(cm(dense))
        assert np.array_equal(compute_idf(M).weights, brute_idf(dense, 10))

    def test_captioned_plus_woc_mode(self):
        A, B, C = random_blocks(3, n=6, k=2)
        M = assemble_fused(A, B, C)
        w = compute_idf(M, "captioned_plus_woc")
        assert w.doc_count == M.m + M.k
        assert np.array_equal(w.weights, brute_idf(M.toarray(), M.m + M.k))

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            compute_idf(assemble_fused(cm([[1]])), "bogus")

    @given(st.integers(0, 2**31 - 1))
    def test_row_permutation_invariance(self, seed):
        r = np.random.default_rng(seed)
        dense = r.integers(0, 3, size=(8, 5))
        w1 = compute_idf(assemble_fused(cm(dense))).weights
        w2 = compute_idf(assemble_fused(cm(dense[r.permutation(8)]))).weights
        assert np.array_equal(w1, w2)

    @given(st.integers(0, 2**31 - 1), st.integers(1, 9))
    def test_column_rescale_invariance(self, seed, factor):
        r = np.random.default_rng(seed)
        dense = r.integers(0, 3, size=(8, 5))
        scaled = dense.copy()
        scaled[:, 2] *= factor
        assert np.array_equal(compute_idf(assemble_fused(cm(dense))).weights,
                              compute_idf(assemble_fused(cm(scaled))).weights)


class TestApplyIdf:
    def test_ones_identity(self):
        A, B, C = random_blocks(1)
        M = assemble_fused(A, B, C)
        assert np.array_equal(apply_idf(M, np.ones(M.shape[1])).toarray(), M.toarray())

    def test_ubiquitous_column_zeroed(self):
        M = assemble_fused(cm([[1, 1], [1, 0]]))
        W = apply_idf(M, compute_idf(M))
        assert W.toarray()[:, 0].tolist() == [0, 0]

    def test_elementwise(self):
        A, B, C = random_blocks(2)
        M = assemble_fused(A, B, C)
        w = compute_idf(M)
        got = apply_idf(M, w).toarray()
        raw = M.toarray()
        for i in range(raw.shape[0]):
            for j in range(raw.shape[1]):
                assert got[i, j] == raw[i, j] * w.weights[j]

    def test_wrong_length(self):
        M = assemble_fused(cm([[1, 1]]))
        with pytest.raises(DimensionError):
            apply_idf(M, np.ones(3))

    @given(st.integers(0, 2**31 - 1))
    def test_pattern_and_zero_block(self, seed):
        A, B, C = random_blocks(seed)
        M = assemble_fused(A, B, C)
        w = compute_idf(M)
        W = apply_idf(M, w).toarray()
        raw = M.toarray()
        assert W.min() >= 0
        assert not W[M.n:, :M.p].any()
        keep = w.weights > 0
        assert np.array_equal(W[:, keep] > 0, raw[:, keep] > 0)


class TestSerialization:
    @given(st.integers(0, 2**31 - 1))
    def test_bit_exact_round_trip(self, seed):
        import tempfile
        from pathlib import Path

        A, B, C = random_blocks(seed)
        M = assemble_fused(A, B, C, ["x", "y", "z"])
        M = apply_idf(M, compute_idf(M))
        with tempfile.TemporaryDirectory() as d:
            write_fused(Path(d) / "h.json", Path(d) / "t.csv", M)
            back = read_fused(Path(d) / "h.json", Path(d) / "t.csv")
        assert np.array_equal(back.toarray(), M.toarray())
        assert (back.n, back.m, back.k, back.p, back.q) == (M.n, M.m, M.k, M.p, M.q)
        assert back.row_ids == M.row_ids and back.col_ids == M.col_ids
