"""Proximal operators and precomputed linear solves used by the ADMM updates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

# Singular values below this fraction of the largest are treated as zero when
# reporting ranks.
RANK_TOL = 1e-12


def soft_threshold(a: np.ndarray, threshold: float) -> np.ndarray:
    """Elementwise shrinkage ``sign(a) * max(|a| - threshold, 0)``.

    This is the proximal operator of ``threshold * |.|_1``.
    """
    if threshold < 0:
        raise ValueError(f"threshold must be nonnegative, got {threshold}")
    a = np.asarray(a, dtype=np.float64)
    return np.sign(a) * np.maximum(np.abs(a) - threshold, 0.0)


def svt(m: np.ndarray, threshold: float) -> np.ndarray:
    """Singular value thresholding: soft-threshold the spectrum of ``m``.

    Returns the minimizer of ``threshold * ||X||_* + 0.5 * ||X - m||_F^2``
    using a thin SVD.
    """
    if threshold < 0:
        raise ValueError(f"threshold must be nonnegative, got {threshold}")
    m = np.asarray(m, dtype=np.float64)
    if not np.isfinite(m).all():
        raise ValueError("svt input contains non-finite values")
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    s = np.maximum(s - threshold, 0.0)
    keep = s > 0
    if not keep.any():
        return np.zeros_like(m)
    return (u[:, keep] * s[keep]) @ vt[keep, :]


def singular_rank(m: np.ndarray) -> int:
    """Number of singular values above ``RANK_TOL`` times the largest."""
    s = np.linalg.svd(np.asarray(m, dtype=np.float64), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > RANK_TOL * s[0]))


@dataclass(frozen=True)
class DiffOperator:
    """Circulant first-difference matrix along the temporal mode.

    Row ``i < size-1`` has +1 at ``(i, i)`` and -1 at ``(i, i+1)``; the last
    row wraps with -1 at ``(size-1, 0)`` and +1 at ``(size-1, size-1)``, so
    constant signals are annihilated.
    """

    size: int
    matrix: np.ndarray


def build_diff_operator(size: int) -> DiffOperator:
    """Build the circulant difference operator for signals of length ``size``."""
    if size < 2:
        raise ValueError(f"difference operator needs length >= 2, got {size}")
    d = np.eye(size)
    d -= np.eye(size, k=1)
    d[-1, 0] = -1.0
    d[-1, -1] = 1.0
    return DiffOperator(size=size, matrix=d)


@dataclass(frozen=True)
class CachedInverse:
    """Materialized inverse of a small positive-definite system matrix.

    ``provenance`` records which regularizer produced it ("graph" or "tv").
    """

    matrix: np.ndarray
    provenance: str


def _spd_inverse(system: np.ndarray) -> np.ndarray:
    try:
        c, low = scipy.linalg.cho_factor(system)
    except scipy.linalg.LinAlgError as exc:
        raise ValueError(f"system matrix is not positive definite: {exc}") from exc
    inv = scipy.linalg.cho_solve((c, low), np.eye(system.shape[0]))
    return (inv + inv.T) / 2.0


def precompute_graph_inverse(laplacian: np.ndarray, graph_weight: float, penalty: float) -> CachedInverse:
    """Inverse of ``graph_weight * laplacian + penalty * I``.

    ``laplacian`` must be symmetric positive semidefinite and ``penalty``
    positive, so the system is positive definite and the inverse exists.
    """
    if graph_weight < 0:
        raise ValueError(f"graph weight must be nonnegative, got {graph_weight}")
    if penalty <= 0:
        raise ValueError(f"penalty must be positive, got {penalty}")
    lap = np.asarray(laplacian, dtype=np.float64)
    if lap.ndim != 2 or lap.shape[0] != lap.shape[1]:
        raise ValueError(f"laplacian must be square, got shape {lap.shape}")
    system = graph_weight * lap + penalty * np.eye(lap.shape[0])
    return CachedInverse(matrix=_spd_inverse(system), provenance="graph")


def precompute_tv_inverse(diff: DiffOperator, diff_penalty: float, consensus_penalty: float) -> CachedInverse:
    """Inverse of ``consensus_penalty * I + diff_penalty * D^T D``."""
    if diff_penalty < 0:
        raise ValueError(f"diff penalty must be nonnegative, got {diff_penalty}")
    if consensus_penalty <= 0:
        raise ValueError(f"consensus penalty must be positive, got {consensus_penalty}")
    d = diff.matrix
    system = consensus_penalty * np.eye(diff.size) + diff_penalty * (d.T @ d)
    return CachedInverse(matrix=_spd_inverse(system), provenance="tv")
