"""Bag-of-visual-words image block.

Descriptor vectors (extracted elsewhere) are pooled, clustered into a
codebook, and each image becomes a histogram of nearest-centroid hits.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import kmeans
from .errors import DataError, DimensionError
from .textcorpus import CountMatrix, check_unique_ids


@dataclass(frozen=True)
class DescriptorSet:
    doc_id: str
    descriptors: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.descriptors, dtype=np.float64)
        if d.ndim == 1 and d.size == 0:
            d = d.reshape(0, 0)
        if d.ndim != 2:
            raise DimensionError(f"descriptors of {self.doc_id!r} must be a 2-D array")
        if not np.all(np.isfinite(d)):
            raise DataError(f"non-finite descriptor entries in {self.doc_id!r}")
        object.__setattr__(self, "descriptors", d)

    @property
    def id(self):
        return self.doc_id

    def __len__(self):
        return self.descriptors.shape[0]


@dataclass(frozen=True)
class Codebook:
    centroids: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.centroids, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] < 1:
            raise DimensionError("codebook needs at least one centroid")
        if not np.all(np.isfinite(c)):
            raise DataError("non-finite codebook entries")
        object.__setattr__(self, "centroids", c)

    @property
    def K(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


def train_codebook(all_descriptors, K, seed=0, max_iter=300, tol=1e-6):
    """Cluster pooled descriptors into ``K`` visual words."""
    X = np.asarray(all_descriptors, dtype=np.float64)
    result = kmeans.lloyd(X, K, seed=seed, max_iter=max_iter, tol=tol)
    return Codebook(result.centroids)


def pool_descriptors(images: Sequence[DescriptorSet]) -> np.ndarray:
    nonempty = [img.descriptors for img in images if len(img)]
    if not nonempty:
        return np.empty((0, 0))
    dims = {d.shape[1] for d in nonempty}
    if len(dims) != 1:
        raise DimensionError(f"descriptor dimensions differ across images: {sorted(dims)}")
    return np.vstack(nonempty)


def quantize(images: Sequence[DescriptorSet], codebook: Codebook) -> CountMatrix:
    """Histogram of nearest visual words for each image (rows in input order)."""
    check_unique_ids(images)
    rows = []
    for img in images:
        if len(img) == 0:
            rows.append(np.zeros(codebook.K, dtype=np.int64))
            continue
        if img.descriptors.shape[1] != codebook.dim:
            raise DimensionError(
                f"{img.doc_id!r}: descriptor dim {img.descriptors.shape[1]} != codebook dim {codebook.dim}"
            )
        words, _ = kmeans.nearest(img.descriptors, codebook.centroids)
        rows.append(np.bincount(words, minlength=codebook.K))
    data = np.vstack(rows) if rows else np.zeros((0, codebook.K), dtype=np.int64)
    return CountMatrix(sp.csr_matrix(data), tuple(img.doc_id for img in images))


# -- serialization ----------------------------------------------------------

def read_descriptor_csv(path, doc_id) -> DescriptorSet:
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    return DescriptorSet(doc_id, data)


def write_descriptor_csv(path, descriptors: DescriptorSet):
    np.savetxt(path, descriptors.descriptors, delimiter=",", fmt="%.17g")


def read_descriptor_binary(bin_path, sidecar_path=None) -> list[DescriptorSet]:
    """Little-endian float32 blob with a JSON sidecar of ``{doc_id, offset, count, dim}``.

    ``offset`` counts float32 elements from the start of the blob.
    """
    bin_path = Path(bin_path)
    sidecar_path = Path(sidecar_path) if sidecar_path else bin_path.with_suffix(".json")
    entries = json.loads(sidecar_path.read_text())
    if isinstance(entries, dict):
        entries = entries.get("images", entries.get("entries"))
    blob = np.fromfile(bin_path, dtype="<f4")
    out = []
    for e in entries:
        start, count, dim = int(e["offset"]), int(e["count"]), int(e["dim"])
        end = start + count * dim
        if end > blob.size:
            raise DataError(f"descriptor block for {e['doc_id']!r} runs past the end of {bin_path}")
        out.append(DescriptorSet(str(e["doc_id"]), blob[start:end].astype(np.float64).reshape(count, dim)))
    return out


def write_descriptor_binary(bin_path, images: Sequence[DescriptorSet], sidecar_path=None):
    bin_path = Path(bin_path)
    sidecar_path = Path(sidecar_path) if sidecar_path else bin_path.with_suffix(".json")
    entries, chunks, offset = [], [], 0
    for img in images:
        count, dim = img.descriptors.shape
        entries.append({"doc_id": img.doc_id, "offset": offset, "count": count, "dim": dim})
        chunks.append(img.descriptors.astype("<f4").ravel())
        offset += count * dim
    blob = np.concatenate(chunks) if chunks else np.empty(0, dtype="<f4")
    blob.astype("<f4").tofile(bin_path)
    sidecar_path.write_text(json.dumps(entries, indent=1))


def write_histograms(path, A: CountMatrix):
    dense = A.toarray()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["doc_id"] + [str(j) for j in range(A.cols)])
        for doc_id, row in zip(A.row_ids, dense):
            w.writerow([doc_id] + [str(int(v)) for v in row])


def read_histograms(path) -> CountMatrix:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"empty histogram file {path}")
    header, body = rows[0], rows[1:]
    if header[0] != "doc_id":
        raise DataError(f"{path}: first header column must be doc_id")
    try:
        cols = [int(h) for h in header[1:]]
    except ValueError as exc:
        raise DataError(f"{path}: header must list visual-word indices") from exc
    if cols != list(range(len(cols))):
        raise DataError(f"{path}: visual-word indices must be 0..K-1 in order")
    ids, values = [], []
    for r in body:
        if len(r) != len(header):
            raise DataError(f"{path}: row for {r[0] if r else '?'} has {len(r)} fields")
        ids.append(r[0])
        values.append([int(v) for v in r[1:]])
    arr = np.array(values, dtype=np.int64).reshape(len(ids), len(cols))
    if arr.size and arr.min() < 0:
        raise DataError(f"{path}: negative histogram count")
    return CountMatrix.from_dense(arr, ids)


def write_codebook(path, codebook: Codebook):
    np.savetxt(path, codebook.centroids, delimiter=",", fmt="%.17g")


def read_codebook(path) -> Codebook:
    return Codebook(np.loadtxt(path, delimiter=",", ndmin=2))
