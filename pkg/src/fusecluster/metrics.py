"""Purity and z-Rand scores of a clustering against ground-truth classes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .cluster import Clustering, GroundTruth
from .errors import DegeneratePartition, EmptyInput, IdMismatch


@dataclass(frozen=True)
class PairCounts:
    total: int          # all document pairs
    same_cluster: int   # pairs sharing a cluster
    same_class: int     # pairs sharing a class
    same_both: int      # pairs sharing both

    # symbols used in the z-Rand formulas
    @property
    def M(self):
        return self.total

    @property
    def M1(self):
        return self.same_cluster

    @property
    def M2(self):
        return self.same_class

    @property
    def p(self):
        return self.same_both


def _comb2(x):
    x = np.asarray(x, dtype=np.int64)
    return int(np.sum(x * (x - 1) // 2))


def aligned_labels(truth: GroundTruth, clusters: Clustering):
    """Class and cluster label arrays over the clustering's documents."""
    ids = clusters.doc_ids
    if len(set(ids)) != len(ids):
        raise IdMismatch("duplicate document ids in clustering")
    if set(ids) != set(truth.classes):
        missing = sorted(set(ids) ^ set(truth.classes))[:5]
        raise IdMismatch(f"clustering and ground truth cover different documents, e.g. {missing}")
    classes = np.array([truth.classes[d] for d in ids], dtype=np.int64)
    return classes, clusters.assignment


def _contingency(classes, assignment):
    _, ci = np.unique(classes, return_inverse=True)
    _, ki = np.unique(assignment, return_inverse=True)
    table = np.zeros((ci.max() + 1 if len(ci) else 0, ki.max() + 1 if len(ki) else 0), dtype=np.int64)
    np.add.at(table, (ci, ki), 1)
    return table


def purity(truth: GroundTruth, clusters: Clustering) -> float:
    """Fraction of documents in their cluster's majority class."""
    classes, assignment = aligned_labels(truth, clusters)
    if len(classes) == 0:
        raise EmptyInput("no documents to score")
    table = _contingency(classes, assignment)
    return int(table.max(axis=0).sum()) / len(classes)


def pair_counts(truth: GroundTruth, clusters: Clustering, method: str = "contingency") -> PairCounts:
    classes, assignment = aligned_labels(truth, clusters)
    if method == "contingency":
        return _pair_counts_table(classes, assignment)
    if method == "enumerate":
        return _pair_counts_enumerate(classes, assignment)
    raise ValueError(f"unknown method {method!r}")


def _pair_counts_table(classes, assignment) -> PairCounts:
    N = len(classes)
    table = _contingency(classes, assignment)
    return PairCounts(
        N * (N - 1) // 2,
        _comb2(table.sum(axis=0)),
        _comb2(table.sum(axis=1)),
        _comb2(table),
    )


def _pair_counts_enumerate(classes, assignment) -> PairCounts:
    total = m1 = m2 = both = 0
    for i, j in combinations(range(len(classes)), 2):
        total += 1
        sc = assignment[i] == assignment[j]
        sg = classes[i] == classes[j]
        m1 += sc
        m2 += sg
        both += sc and sg
    return PairCounts(total, int(m1), int(m2), int(both))


def hypergeometric_moments(pc: PairCounts) -> tuple[float, float]:
    """Mean and std of the shared-pair count when the ``M2`` class pairs are
    drawn without replacement from ``M`` pairs, ``M1`` of them co-clustered."""
    M, M1, M2 = pc.M, pc.M1, pc.M2
    if M < 2:
        raise DegeneratePartition("fewer than two document pairs")
    mu = M1 * M2 / M
    var = mu * (1 - M1 / M) * (M - M2) / (M - 1)
    return mu, math.sqrt(max(var, 0.0))


def zrand(truth: GroundTruth, clusters: Clustering) -> float:
    pc = pair_counts(truth, clusters)
    mu, sigma = hypergeometric_moments(pc)
    if sigma == 0:
        raise DegeneratePartition("null-model standard deviation is zero")
    return (pc.p - mu) / sigma


def zrand_mc_oracle(truth: GroundTruth, clusters: Clustering, trials: int = 10_000,
                    seed: int = 0, batch: int = 1000) -> tuple[float, float]:
    """Sample mean and std of the shared-pair count under random relabeling.

    Cluster labels are shuffled across documents (cluster sizes fixed).
    Batch ``b`` draws from its own generator seeded with ``(seed, b)``.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    classes, assignment = aligned_labels(truth, clusters)
    _, ci = np.unique(classes, return_inverse=True)
    _, ki = np.unique(assignment, return_inverse=True)
    n_cls = int(ci.max()) + 1 if len(ci) else 1
    n_clu = int(ki.max()) + 1 if len(ki) else 1
    cells = n_cls * n_clu
    samples = np.empty(trials)
    for b, start in enumerate(range(0, trials, batch)):
        size = min(batch, trials - start)
        rng = np.random.default_rng([seed, b])
        perms = rng.permuted(np.tile(ki, (size, 1)), axis=1)
        codes = ci[None, :] * n_clu + perms + (np.arange(size) * cells)[:, None]
        counts = np.bincount(codes.ravel(), minlength=size * cells).reshape(size, cells)
        samples[start:start + size] = (counts * (counts - 1) // 2).sum(axis=1)
    return float(samples.mean()), float(samples.std())


def metrics_report(truth: GroundTruth, clusters: Clustering, mc_trials: int = 0, mc_seed: int = 0) -> dict:
    pc = pair_counts(truth, clusters)
    mu, sigma = hypergeometric_moments(pc)
    report = {
        "purity": purity(truth, clusters),
        "zrand": (pc.p - mu) / sigma if sigma > 0 else None,
        "M": pc.M, "M1": pc.M1, "M2": pc.M2, "p": pc.p,
        "mu_p": mu, "sigma_p": sigma,
        "null_model": "hypergeometric over pairs",
        "mc_mean": None, "mc_std": None, "mc_trials": mc_trials,
    }
    if mc_trials:
        report["mc_mean"], report["mc_std"] = zrand_mc_oracle(truth, clusters, mc_trials, mc_seed)
    return report
