"""Lloyd's k-means with k-means++ seeding.

Shared by codebook training and the k-means readout on topic coordinates.
Distances are squared Euclidean computed from explicit differences so exact
hits and ties resolve identically to a brute-force scan; ties go to the lowest
centroid index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InsufficientData

_CHUNK_ELEMS = 1 << 22


@dataclass(frozen=True)
class KMeansResult:
    centroids: np.ndarray
    labels: np.ndarray
    inertia: float
    inertia_trace: tuple[float, ...]
    iterations: int
    converged: bool


def squared_distances(X, C):
    """(N, K) matrix of squared Euclidean distances, chunked over rows."""
    X = np.asarray(X, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    if X.ndim != 2 or C.ndim != 2 or X.shape[1] != C.shape[1]:
        raise DimensionError(f"dimension mismatch: points {X.shape}, centroids {C.shape}")
    n, k = X.shape[0], C.shape[0]
    out = np.empty((n, k))
    step = max(1, _CHUNK_ELEMS // max(1, k * X.shape[1]))
    for start in range(0, n, step):
        diff = X[start:start + step, None, :] - C[None, :, :]
        out[start:start + step] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def nearest(X, C):
    d2 = squared_distances(X, C)
    labels = np.argmin(d2, axis=1)
    return labels, d2[np.arange(len(labels)), labels]


def kmeans_plusplus(X, k, rng):
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    first = rng.integers(n)
    centers[0] = X[first]
    closest = squared_distances(X, centers[:1])[:, 0]
    for c in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = rng.choice(n, p=closest / total)
        else:
            idx = rng.integers(n)
        centers[c] = X[idx]
        closest = np.minimum(closest, squared_distances(X, centers[c:c + 1])[:, 0])
    return centers


def _fill_empty(labels, point_d2, k):
    """Move the points farthest from their centroid into empty clusters."""
    counts = np.bincount(labels, minlength=k)
    empty = np.flatnonzero(counts == 0)
    if not len(empty):
        return labels
    labels = labels.copy()
    # stable sort: among equally distant points the lowest index moves first
    order = np.argsort(-point_d2, kind="stable")
    pos = 0
    for c in empty:
        while pos < len(order) and counts[labels[order[pos]]] <= 1:
            pos += 1
        if pos == len(order):
            break
        i = order[pos]
        counts[labels[i]] -= 1
        labels[i] = c
        counts[c] += 1
        pos += 1
    return labels


def _means(X, labels, k, previous):
    C = previous.copy()
    for c in range(k):
        members = X[labels == c]
        if len(members):
            C[c] = members.mean(axis=0)
    return C


def _inertia(X, labels, C):
    diff = X - C[labels]
    return float(np.einsum("ij,ij->", diff, diff))


def lloyd(X, k, seed=0, max_iter=300, tol=1e-6, init=None) -> KMeansResult:
    """Run Lloyd's algorithm from k-means++ (or given) initial centroids.

    Stops when the largest centroid shift drops below ``tol`` or after
    ``max_iter`` updates. ``inertia_trace`` holds the within-cluster sum of
    squares after each centroid update; it is non-increasing.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError("points must be a 2-D array")
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > X.shape[0]:
        raise InsufficientData(f"k={k} exceeds the number of points ({X.shape[0]})")
    if not np.all(np.isfinite(X)):
        raise ValueError("points must be finite")

    if init is None:
        C = kmeans_plusplus(X, k, np.random.default_rng(seed))
    else:
        C = np.array(init, dtype=np.float64)
        if C.shape != (k, X.shape[1]):
            raise DimensionError(f"initial centroids have shape {C.shape}, expected {(k, X.shape[1])}")

    trace = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        labels, d2 = nearest(X, C)
        labels = _fill_empty(labels, d2, k)
        new_C = _means(X, labels, k, C)
        shift = float(np.sqrt(np.max(np.sum((new_C - C) ** 2, axis=1))))
        C = new_C
        trace.append(_inertia(X, labels, C))
        if shift < tol:
            converged = True
            break

    labels, d2 = nearest(X, C)
    labels = _fill_empty(labels, d2, k)
    return KMeansResult(C, labels, _inertia(X, labels, C), tuple(trace), it, converged)
