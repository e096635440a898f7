"""Per-mode k-nearest-neighbor similarity graphs and Laplacian smoothness energy.

For each mode the rows of the mode-n unfolding are treated as points; two
rows are connected when either is among the other's k nearest neighbors in
Euclidean distance, with Gaussian edge weights
``w = exp(-||row_s - row_s'||^2 / (2 * sigma))``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .tensors import unfold

# Lower bound on the kernel bandwidth; keeps weights defined when all
# neighbor distances collapse to zero.
_MIN_BANDWIDTH = 1e-12


@dataclass(frozen=True)
class ModeGraph:
    """Similarity graph over one mode of a tensor.

    ``adjacency`` is symmetric with entries in [0, 1] and zero diagonal;
    ``laplacian`` is degree-minus-adjacency, so rows sum to zero and the
    matrix is positive semidefinite.
    """

    mode: int
    adjacency: np.ndarray
    laplacian: np.ndarray
    kernel_bandwidth: float


def _pairwise_sq_dists(rows: np.ndarray) -> np.ndarray:
    sq = np.sum(rows**2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (rows @ rows.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def build_mode_graph(
    t: np.ndarray,
    mode: int,
    k: int = 10,
    bandwidth: Union[str, float] = "median",
) -> ModeGraph:
    """Build the k-NN similarity graph over the rows of the mode-n unfolding.

    Parameters
    ----------
    t : ndarray
        Data tensor (missing entries zero-filled before calling).
    mode : int
        Mode whose unfolding rows become graph vertices.
    k : int
        Neighbor count, ``1 <= k < I_n``.  Neighborhoods are the k nearest
        rows by Euclidean distance with ties broken by lower row index; the
        edge set is symmetrized with the "or" rule.
    bandwidth : "median" or float
        Kernel bandwidth sigma.  The default self-tuning rule uses the median
        over rows of the squared distance to the k-th nearest neighbor.
    """
    if not np.isfinite(t).all():
        raise ValueError("tensor contains non-finite values")
    n_rows = t.shape[mode]
    if n_rows < 2:
        raise ValueError(f"mode {mode} has extent {n_rows}; no graph possible")
    if not 1 <= k < n_rows:
        raise ValueError(f"k={k} out of range for mode extent {n_rows}")

    rows = unfold(t, mode)
    d2 = _pairwise_sq_dists(rows)

    # argsort on distance with the row index as tie-breaker; self sorts first
    # (distance 0, lowest-index tie) and is skipped.
    order = np.argsort(d2, axis=1, kind="stable")
    neighbor_sets = np.zeros((n_rows, n_rows), dtype=bool)
    kth_sq = np.empty(n_rows)
    for s in range(n_rows):
        neighbors = [j for j in order[s] if j != s][:k]
        neighbor_sets[s, neighbors] = True
        kth_sq[s] = d2[s, neighbors[-1]]

    if bandwidth == "median":
        sigma = float(np.median(kth_sq))
    else:
        sigma = float(bandwidth)
        if sigma <= 0:
            raise ValueError(f"bandwidth must be positive, got {sigma}")
    sigma_eff = max(sigma, _MIN_BANDWIDTH)

    mutual = neighbor_sets | neighbor_sets.T
    w = np.where(mutual, np.exp(-d2 / (2.0 * sigma_eff)), 0.0)
    np.fill_diagonal(w, 0.0)
    w = (w + w.T) / 2.0

    degree = np.diag(w.sum(axis=1))
    return ModeGraph(mode=mode, adjacency=w, laplacian=degree - w, kernel_bandwidth=sigma)


def build_all_mode_graphs(
    t: np.ndarray,
    k: int = 10,
    bandwidth: Union[str, float] = "median",
) -> list[ModeGraph]:
    """Build one graph per mode, clamping k to ``I_n - 1`` on short modes."""
    return [build_mode_graph(t, mode, k=min(k, t.shape[mode] - 1), bandwidth=bandwidth) for mode in range(t.ndim)]


def laplacian_energy(t: np.ndarray, graphs: Sequence[ModeGraph], weight: float) -> float:
    """Smoothness energy ``weight * sum_n tr(T_(n)^T Phi^n T_(n))``.

    Equals ``weight/2 * sum_n sum_{i,j} w_ij ||row_i - row_j||^2``, hence
    nonnegative, and zero for tensors constant along every mode.
    """
    total = 0.0
    for g in graphs:
        if g.laplacian.shape[0] != t.shape[g.mode]:
            raise ValueError(
                f"graph for mode {g.mode} has {g.laplacian.shape[0]} vertices, "
                f"tensor extent is {t.shape[g.mode]}"
            )
        u = unfold(t, g.mode)
        total += float(np.sum((g.laplacian @ u) * u))
    return weight * total


def save_mode_graph(path: str, graph: ModeGraph) -> None:
    """Persist the adjacency as text triplets (row, col, weight) plus a JSON header."""
    rows, cols = np.nonzero(np.triu(graph.adjacency, k=1))
    header = {
        "mode": graph.mode,
        "size": int(graph.adjacency.shape[0]),
        "kernel_bandwidth": graph.kernel_bandwidth,
        "edges": int(len(rows)),
    }
    with open(path + ".json", "w", encoding="utf-8") as f:
        json.dump(header, f, indent=2)
    with open(path, "w", encoding="utf-8") as f:
        for i, j in zip(rows, cols):
            f.write(f"{i} {j} {float(graph.adjacency[i, j]):.17g}\n")


def load_mode_graph(path: str) -> ModeGraph:
    """Load a graph persisted by :func:`save_mode_graph`."""
    with open(path + ".json", "r", encoding="utf-8") as f:
        header = json.load(f)
    size = int(header["size"])
    w = np.zeros((size, size))
    if os.path.getsize(path) > 0:
        trips = np.loadtxt(path, ndmin=2)
        for i, j, weight in trips:
            w[int(i), int(j)] = weight
            w[int(j), int(i)] = weight
    degree = np.diag(w.sum(axis=1))
    return ModeGraph(
        mode=int(header["mode"]),
        adjacency=w,
        laplacian=degree - w,
        kernel_bandwidth=float(header["kernel_bandwidth"]),
    )
