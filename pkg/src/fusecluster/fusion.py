"""Mixed document-feature matrix and its IDF column weighting.

Layout, with n image rows, k reference-article rows, p visual-word columns
and q text columns::

    [ A  B ]   A: n x p visual histograms   B: n x q caption counts
    [ 0  C ]   C: k x q article counts      0: k x p, always zero
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DataError, DimensionError, IdMismatch, VocabularyMismatch
from .textcorpus import CountMatrix

IMAGE_DOC = "ImageDoc"
WOC_DOC = "WocDoc"
VISUAL_FEATURE = "VisualFeature"
TEXT_FEATURE = "TextFeature"

IDF_MODES = ("all_rows", "captioned_plus_woc")


@dataclass(frozen=True)
class FusedMatrix:
    values: sp.csr_matrix
    n: int
    m: int
    k: int
    p: int
    q: int
    row_ids: tuple[str, ...]
    col_ids: tuple[str, ...]

    def __post_init__(self):
        values = sp.csr_matrix(self.values, dtype=np.float64)
        values.eliminate_zeros()
        values.sort_indices()
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "row_ids", tuple(self.row_ids))
        object.__setattr__(self, "col_ids", tuple(self.col_ids))
        if values.shape != (self.n + self.k, self.p + self.q):
            raise DimensionError(
                f"values shape {values.shape} != ({self.n}+{self.k}, {self.p}+{self.q})"
            )
        if len(self.row_ids) != values.shape[0] or len(self.col_ids) != values.shape[1]:
            raise DimensionError("row/column id counts do not match the matrix shape")
        if not 0 <= self.m <= self.n:
            raise DimensionError(f"captioned count m={self.m} outside [0, n={self.n}]")
        if values.nnz:
            if not np.all(np.isfinite(values.data)) or values.data.min() < 0:
                raise DataError("fused matrix entries must be finite and non-negative")
            if self.k and self.p and values[self.n:, :self.p].nnz:
                raise DataError("the article x visual block must be zero")

    @property
    def shape(self):
        return self.values.shape

    @property
    def row_roles(self) -> tuple[str, ...]:
        return (IMAGE_DOC,) * self.n + (WOC_DOC,) * self.k

    @property
    def col_roles(self) -> tuple[str, ...]:
        return (VISUAL_FEATURE,) * self.p + (TEXT_FEATURE,) * self.q

    def toarray(self) -> np.ndarray:
        return self.values.toarray()

    def blocks(self):
        """Slice back out the (A, B, C) blocks as dense arrays."""
        dense = self.toarray()
        n, p = self.n, self.p
        return dense[:n, :p], dense[:n, p:], dense[n:, p:]

    def with_values(self, values) -> "FusedMatrix":
        return FusedMatrix(values, self.n, self.m, self.k, self.p, self.q, self.row_ids, self.col_ids)


@dataclass(frozen=True)
class IdfWeights:
    weights: np.ndarray
    doc_count: int
    doc_freq: np.ndarray

    def __len__(self):
        return len(self.weights)


def assemble_fused(
    A: CountMatrix,
    B: CountMatrix | None = None,
    C: CountMatrix | None = None,
    text_features: Sequence[str] | None = None,
    m: int | None = None,
) -> FusedMatrix:
    """Stack the blocks into ``[A B; 0 C]``.

    ``B`` or ``C`` may be omitted to build the image-only or image+caption
    variants. ``m`` defaults to the number of non-empty caption rows.
    """
    n, p = A.shape
    q = B.cols if B is not None else (C.cols if C is not None else 0)
    if B is None:
        B = CountMatrix(sp.csr_matrix((n, q), dtype=np.int64), A.row_ids)
    if B.rows != n:
        raise DimensionError(f"image block has {n} rows but caption block has {B.rows}")
    if B.row_ids != A.row_ids:
        raise IdMismatch("caption rows are not aligned with image rows")
    if C is not None and C.cols != q:
        raise VocabularyMismatch(f"caption block has {q} text columns, article block has {C.cols}")
    if text_features is None:
        text_features = [f"t{j}" for j in range(q)]
    text_features = tuple(text_features)
    if len(text_features) != q:
        raise VocabularyMismatch(f"{len(text_features)} text features for {q} text columns")
    k = C.rows if C is not None else 0

    top = sp.hstack([A.data, B.data], format="csr")
    if k:
        bottom = sp.hstack([sp.csr_matrix((k, p), dtype=np.int64), C.data], format="csr")
        values = sp.vstack([top, bottom], format="csr")
        woc_ids = C.row_ids
    else:
        values = top
        woc_ids = ()
    if m is None:
        m = int(np.count_nonzero(B.data.getnnz(axis=1))) if n else 0
    row_ids = A.row_ids + woc_ids
    if len(set(row_ids)) != len(row_ids):
        raise IdMismatch("image and article document ids overlap")
    col_ids = tuple(f"v{j}" for j in range(p)) + text_features
    return FusedMatrix(values.astype(np.float64), n, m, k, p, q, row_ids, col_ids)


def compute_idf(M: FusedMatrix, doc_count_mode: str = "all_rows") -> IdfWeights:
    """Natural-log inverse document frequency per column.

    The document count is every row (``all_rows``) or captioned images plus
    articles (``captioned_plus_woc``). Unused columns get weight 0, and so do
    columns whose document frequency exceeds the document count.
    """
    if doc_count_mode == "all_rows":
        N = M.n + M.k
    elif doc_count_mode == "captioned_plus_woc":
        N = M.m + M.k
    else:
        raise ValueError(f"unknown doc_count_mode {doc_count_mode!r}; expected one of {IDF_MODES}")
    csc = M.values.tocsc()
    df = np.diff(csc.indptr).astype(np.int64)
    weights = np.zeros(M.shape[1])
    used = df > 0
    if N > 0:
        weights[used] = np.log(N / df[used])
    np.maximum(weights, 0.0, out=weights)
    return IdfWeights(weights, N, df)


def apply_idf(M: FusedMatrix, w: IdfWeights | np.ndarray) -> FusedMatrix:
    weights = np.asarray(w.weights if isinstance(w, IdfWeights) else w, dtype=np.float64)
    if weights.shape != (M.shape[1],):
        raise DimensionError(f"{weights.shape[0] if weights.ndim else 0} weights for {M.shape[1]} columns")
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise DataError("IDF weights must be finite and non-negative")
    return M.with_values(M.values @ sp.diags(weights, format="csr"))


# -- serialization ----------------------------------------------------------

def write_fused(header_path, triplet_path, M: FusedMatrix):
    header = {
        "n": M.n, "m": M.m, "k": M.k, "p": M.p, "q": M.q,
        "row_ids": list(M.row_ids), "col_ids": list(M.col_ids),
    }
    Path(header_path).write_text(json.dumps(header, indent=1) + "\n", encoding="utf-8")
    coo = M.values.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(triplet_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "col", "value"])
        for idx in order:
            w.writerow([int(coo.row[idx]), int(coo.col[idx]), "%.17g" % coo.data[idx]])


def read_fused(header_path, triplet_path) -> FusedMatrix:
    header = json.loads(Path(header_path).read_text(encoding="utf-8"))
    try:
        n, m, k, p, q = (int(header[key]) for key in ("n", "m", "k", "p", "q"))
        row_ids, col_ids = header["row_ids"], header["col_ids"]
    except KeyError as exc:
        raise DataError(f"{header_path}: missing header field {exc}") from exc
    rows, cols, vals = [], [], []
    with open(triplet_path, newline="") as fh:
        reader = csv.reader(fh)
        head = next(reader, None)
        if head != ["row", "col", "value"]:
            raise DataError(f"{triplet_path}: expected header row,col,value")
        for r in reader:
            rows.append(int(r[0]))
            cols.append(int(r[1]))
            vals.append(float(r[2]))
    values = sp.coo_matrix((vals, (rows, cols)), shape=(n + k, p + q)).tocsr()
    return FusedMatrix(values, n, m, k, p, q, row_ids, col_ids)
