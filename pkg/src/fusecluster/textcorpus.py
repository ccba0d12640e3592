"""Caption and reference-article text: tokenization, vocabulary, count matrices.

Caption documents and the per-class reference articles share one vocabulary.
Reference-article tokens come first, in first-seen order; caption tokens that
never occur in an article are appended after them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, DuplicateDocument, UnknownFeature


@dataclass(frozen=True)
class TextDocument:
    id: str
    tokens: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        for tok in self.tokens:
            if not tok or any(ch.isspace() for ch in tok):
                raise ValueError(f"invalid token {tok!r} in document {self.id!r}")


@dataclass(frozen=True)
class Vocabulary:
    features: tuple[str, ...]
    index: dict[str, int] = field(repr=False)

    @classmethod
    def from_features(cls, features: Iterable[str]) -> "Vocabulary":
        features = tuple(features)
        index = {f: j for j, f in enumerate(features)}
        if len(index) != len(features):
            raise ValueError("duplicate features in vocabulary")
        return cls(features, index)

    def __len__(self):
        return len(self.features)

    def __contains__(self, token):
        return token in self.index


@dataclass(frozen=True)
class CountMatrix:
    """Non-negative integer document x feature counts, stored sparse.

    ``data`` is a CSR matrix holding only the non-zero counts; ``row_ids``
    names the document behind each row.
    """

    data: sp.csr_matrix
    row_ids: tuple[str, ...]

    def __post_init__(self):
        data = sp.csr_matrix(self.data, dtype=np.int64)
        data.eliminate_zeros()
        data.sort_indices()
        if data.nnz and data.data.min() < 1:
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "row_ids", tuple(self.row_ids))
        if data.shape[0] != len(self.row_ids):
            raise DimensionError(
                f"{data.shape[0]} rows but {len(self.row_ids)} row ids"
            )

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape

    @property
    def entries(self) -> dict[tuple[int, int], int]:
        coo = self.data.tocoo()
        return {(int(i), int(j)): int(v) for i, j, v in zip(coo.row, coo.col, coo.data)}

    def toarray(self) -> np.ndarray:
        return self.data.toarray()

    @classmethod
    def from_dense(cls, values, row_ids=None) -> "CountMatrix":
        values = np.asarray(values)
        if values.ndim != 2:
            raise DimensionError("count matrix must be two-dimensional")
        if row_ids is None:
            row_ids = [str(i) for i in range(values.shape[0])]
        return cls(sp.csr_matrix(values.astype(np.int64)), tuple(row_ids))


def _strip_nonalnum(tok: str) -> str:
    start, end = 0, len(tok)
    while start < end and not tok[start].isalnum():
        start += 1
    while end > start and not tok[end - 1].isalnum():
        end -= 1
    return tok[start:end]


def tokenize(raw: str, stopwords: Iterable[str] = (), doc_id: str = "") -> TextDocument:
    """Split on whitespace, lowercase, strip edge punctuation, drop stop words."""
    stop = stopwords if isinstance(stopwords, (set, frozenset)) else set(stopwords)
    tokens = []
    for piece in raw.split():
        tok = _strip_nonalnum(piece.lower())
        if tok and tok not in stop:
            tokens.append(tok)
    return TextDocument(doc_id, tuple(tokens))


def load_stopwords(path) -> frozenset[str]:
    text = Path(path).read_text(encoding="utf-8")
    return frozenset(line.strip().lower() for line in text.splitlines() if line.strip())


def build_vocabulary(
    woc_docs: Sequence[TextDocument], caption_docs: Sequence[TextDocument]
) -> Vocabulary:
    features: dict[str, None] = {}
    for doc in list(woc_docs) + list(caption_docs):
        for tok in doc.tokens:
            features.setdefault(tok, None)
    return Vocabulary.from_features(features)


def check_unique_ids(docs: Sequence[TextDocument]):
    seen = set()
    for doc in docs:
        if doc.id in seen:
            raise DuplicateDocument(f"duplicate document id {doc.id!r}")
        seen.add(doc.id)


def count_features(docs: Sequence[TextDocument], vocab: Vocabulary) -> CountMatrix:
    """Raw term counts, one row per document in input order."""
    check_unique_ids(docs)
    rows, cols = [], []
    for i, doc in enumerate(docs):
        for tok in doc.tokens:
            j = vocab.index.get(tok)
            if j is None:
                raise UnknownFeature(tok, doc.id)
            rows.append(i)
            cols.append(j)
    # duplicate (row, col) pairs are summed by the COO -> CSR conversion
    data = sp.coo_matrix(
        (np.ones(len(rows), dtype=np.int64), (rows, cols)),
        shape=(len(docs), len(vocab)),
    ).tocsr()
    return CountMatrix(data, tuple(doc.id for doc in docs))


def extend_text_matrix(B: CountMatrix, n: int, extra_ids: Sequence[str] | None = None) -> CountMatrix:
    """Pad ``B`` with all-zero rows for the ``n - m`` captionless images."""
    m = B.rows
    if m > n:
        raise DimensionError(f"text matrix has {m} rows, more than the {n} image documents")
    if extra_ids is None:
        extra_ids = [f"__nocaption_{i}" for i in range(m, n)]
    extra_ids = tuple(extra_ids)
    if len(extra_ids) != n - m:
        raise DimensionError(f"expected {n - m} extra row ids, got {len(extra_ids)}")
    if m == n:
        return B
    pad = sp.csr_matrix((n - m, B.cols), dtype=np.int64)
    return CountMatrix(sp.vstack([B.data, pad], format="csr"), B.row_ids + extra_ids)


def align_captions(B: CountMatrix, image_ids: Sequence[str]) -> CountMatrix:
    """Reorder caption rows to follow ``image_ids``; images without a caption get zero rows.

    Equivalent to :func:`extend_text_matrix` followed by a row permutation, so
    the caption block lines up with the image block row by row.
    """
    image_ids = tuple(image_ids)
    position = {doc_id: i for i, doc_id in enumerate(image_ids)}
    if len(position) != len(image_ids):
        raise DuplicateDocument("duplicate image document ids")
    missing = [doc_id for doc_id in B.row_ids if doc_id not in position]
    if missing:
        raise DimensionError(f"captions for unknown image documents: {missing[:5]}")
    captioned = set(B.row_ids)
    rest = [doc_id for doc_id in image_ids if doc_id not in captioned]
    extended = extend_text_matrix(B, len(image_ids), rest)
    order = np.array([position[doc_id] for doc_id in extended.row_ids])
    perm = np.empty_like(order)
    perm[order] = np.arange(len(order))
    return CountMatrix(extended.data[perm], image_ids)
