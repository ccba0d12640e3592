"""Cluster assignments read off the document-topic factor."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import kmeans
from .errors import DataError, InsufficientData


@dataclass(frozen=True)
class Clustering:
    assignment: np.ndarray
    num_clusters: int
    doc_ids: tuple[str, ...]

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        object.__setattr__(self, "assignment", a)
        object.__setattr__(self, "doc_ids", tuple(self.doc_ids))
        if a.ndim != 1 or len(a) != len(self.doc_ids):
            raise DataError("assignment and doc_ids must have equal length")
        if len(a) and (a.min() < 0 or a.max() >= self.num_clusters):
            raise DataError(f"cluster index outside [0, {self.num_clusters})")

    def as_dict(self) -> dict[str, int]:
        return dict(zip(self.doc_ids, self.assignment.tolist()))


@dataclass(frozen=True)
class GroundTruth:
    classes: Mapping[str, int]
    num_classes: int
    class_names: tuple[str, ...] = ()

    def __post_init__(self):
        for doc_id, c in self.classes.items():
            if not 0 <= c < self.num_classes:
                raise DataError(f"class index {c} of {doc_id!r} outside [0, {self.num_classes})")

    @classmethod
    def from_labels(cls, labels: Mapping[str, str]) -> "GroundTruth":
        """Index string labels in order of first appearance."""
        names: dict[str, int] = {}
        classes = {}
        for doc_id, label in labels.items():
            classes[doc_id] = names.setdefault(label, len(names))
        return cls(classes, len(names), tuple(names))


def _rows(U, eval_rows):
    U = np.asarray(U, dtype=np.float64)
    if eval_rows is None:
        eval_rows = np.arange(U.shape[0])
    eval_rows = np.asarray(eval_rows, dtype=np.int64)
    if len(eval_rows) and (eval_rows.min() < 0 or eval_rows.max() >= U.shape[0]):
        raise IndexError("eval_rows out of bounds")
    return U[eval_rows], eval_rows


def _ids(doc_ids, eval_rows):
    if doc_ids is None:
        return tuple(str(i) for i in eval_rows)
    return tuple(doc_ids[i] for i in eval_rows)


def assign_argmax(U, eval_rows=None, doc_ids: Sequence[str] | None = None) -> Clustering:
    """Each document goes to its strongest topic; ties to the lowest index."""
    X, eval_rows = _rows(U, eval_rows)
    labels = np.argmax(X, axis=1) if X.shape[0] else np.zeros(0, dtype=np.int64)
    return Clustering(labels, np.asarray(U).shape[1], _ids(doc_ids, eval_rows))


def assign_kmeans(U, eval_rows=None, num_clusters=None, seed=0, doc_ids=None,
                  normalize=False, max_iter=300, tol=1e-9) -> Clustering:
    X, eval_rows = _rows(U, eval_rows)
    if num_clusters is None:
        num_clusters = np.asarray(U).shape[1]
    if num_clusters > X.shape[0]:
        raise InsufficientData(f"{num_clusters} clusters for {X.shape[0]} documents")
    if normalize:
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        X = np.divide(X, norms, out=np.zeros_like(X), where=norms > 0)
    result = kmeans.lloyd(X, num_clusters, seed=seed, max_iter=max_iter, tol=tol)
    return Clustering(result.labels, num_clusters, _ids(doc_ids, eval_rows))


def write_assignments(path, clustering: Clustering):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["doc_id", "cluster"])
        for doc_id, c in zip(clustering.doc_ids, clustering.assignment):
            w.writerow([doc_id, int(c)])


def read_assignments(path) -> Clustering:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != ["doc_id", "cluster"]:
            raise DataError(f"{path}: expected header doc_id,cluster")
        pairs = [(r[0], int(r[1])) for r in reader if r]
    ids = [p[0] for p in pairs]
    labels = np.array([p[1] for p in pairs], dtype=np.int64)
    return Clustering(labels, int(labels.max()) + 1 if len(labels) else 0, ids)
