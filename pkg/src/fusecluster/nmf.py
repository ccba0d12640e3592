"""Non-negative matrix factorization under the squared Frobenius loss.

Multiplicative updates (Lee and Seung), alternating the topic-feature factor
V and the document-topic factor U::

    V <- V * (U^T M) / (U^T U V + eps)
    U <- U * (M V^T) / (U V V^T + eps)

Each update never increases ||M - UV||_F^2 and keeps both factors
non-negative, provided they start strictly positive.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, InvalidRank, NegativeInput, NumericalError

EPS = 1e-12


@dataclass(frozen=True)
class FactorPair:
    U: np.ndarray
    V: np.ndarray
    cost_trace: tuple[float, ...]
    converged: bool = False
    seed: int | None = None

    @property
    def k_star(self) -> int:
        return self.U.shape[1]

    @property
    def iterations(self) -> int:
        return len(self.cost_trace)

    @property
    def final_cost(self) -> float:
        return self.cost_trace[-1] if self.cost_trace else float("nan")

    def report(self) -> dict:
        return {
            "seed": self.seed,
            "k_star": self.k_star,
            "iterations": self.iterations,
            "final_cost": self.final_cost,
            "converged": self.converged,
        }


def _as_dense(M) -> np.ndarray:
    if hasattr(M, "values") and sp.issparse(getattr(M, "values")):
        M = M.values
    if sp.issparse(M):
        return M.toarray().astype(np.float64)
    return np.asarray(M, dtype=np.float64)


def _cost(X, U, V) -> float:
    R = X - U @ V
    return float(np.einsum("ij,ij->", R, R))


def reconstruction_error(M, factors: FactorPair | tuple) -> float:
    """Squared Frobenius norm of ``M - U V``."""
    X = _as_dense(M)
    U, V = (factors.U, factors.V) if isinstance(factors, FactorPair) else factors
    U = np.asarray(U, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    if U.ndim != 2 or V.ndim != 2 or U.shape[1] != V.shape[0] or (U.shape[0], V.shape[1]) != X.shape:
        raise DimensionError(f"cannot reconstruct {X.shape} from U {U.shape} and V {V.shape}")
    return _cost(X, U, V)


def nmf_factorize(M, k_star, seed=0, max_iter=500, rel_tol=1e-5, init=None) -> FactorPair:
    """Factor a non-negative matrix as ``U @ V`` with ``k_star`` topics.

    Factors start uniform on [0.1, 1.1) from ``seed``. Iteration stops when the
    relative cost decrease falls below ``rel_tol`` or after ``max_iter``
    sweeps; ``cost_trace[t]`` is the cost after sweep ``t + 1``.
    """
    X = _as_dense(M)
    if X.ndim != 2:
        raise DimensionError("input must be a matrix")
    rows, cols = X.shape
    if not isinstance(k_star, (int, np.integer)) or not 1 <= k_star < min(rows, cols):
        raise InvalidRank(f"k_star={k_star} must satisfy 1 <= k_star < min{X.shape}")
    if not np.all(np.isfinite(X)):
        raise NegativeInput("input contains non-finite entries")
    if X.size and X.min() < 0:
        raise NegativeInput("input has negative entries")

    if init is None:
        rng = np.random.default_rng(seed)
        U = rng.uniform(0.1, 1.1, size=(rows, k_star))
        V = rng.uniform(0.1, 1.1, size=(k_star, cols))
    else:
        U, V = (np.array(a, dtype=np.float64) for a in init)

    trace = []
    converged = False
    prev = None
    for _ in range(max_iter):
        V *= (U.T @ X) / (U.T @ U @ V + EPS)
        U *= (X @ V.T) / (U @ (V @ V.T) + EPS)
        cost = _cost(X, U, V)
        if not np.isfinite(cost):
            raise NumericalError("factorization diverged (non-finite cost)")
        trace.append(cost)
        if prev is not None and (prev - cost) / max(prev, EPS) < rel_tol:
            converged = True
            break
        prev = cost
    return FactorPair(U, V, tuple(trace), converged, seed)


# -- serialization ----------------------------------------------------------

def write_factors(directory, factors: FactorPair):
    directory = Path(directory)
    np.savetxt(directory / "U.csv", factors.U, delimiter=",", fmt="%.17g")
    np.savetxt(directory / "V.csv", factors.V, delimiter=",", fmt="%.17g")
    report = factors.report()
    report["cost_trace"] = list(factors.cost_trace)
    (directory / "nmf_report.json").write_text(json.dumps(report, indent=1) + "\n")


def read_factors(directory) -> FactorPair:
    directory = Path(directory)
    U = np.loadtxt(directory / "U.csv", delimiter=",", ndmin=2)
    V = np.loadtxt(directory / "V.csv", delimiter=",", ndmin=2)
    report = json.loads((directory / "nmf_report.json").read_text())
    return FactorPair(U, V, tuple(report.get("cost_trace", ())), report["converged"], report["seed"])
