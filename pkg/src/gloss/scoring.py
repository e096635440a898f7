"""Anomaly scoring of the sparse tensor, one mode-2 fiber at a time.

Every fiber ``s[i0, i1, :, i3]`` runs across the weeks mode, so each
(hour, day, zone) cell is scored against the same cell in all other weeks.
Two univariate scorers are provided:

* ``ee`` fits a robust location/scale by the shortest contiguous half of the
  sorted fiber and scores each value by its squared standardized distance.
* ``lof`` is the classical local outlier factor on the 1-D values with
  absolute-difference distances.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil

import numpy as np

METHODS = ("ee", "lof")

# Floors for degenerate scales/densities: a constant fiber gets zero EE
# scores, identical points get LOF exactly 1.
_EE_SCALE_FLOOR = 1e-12
_LOF_DENSITY_GUARD = 1e-10


@dataclass(frozen=True)
class ScoreTensor:
    """Per-entry anomaly scores; higher means more anomalous."""

    scores: np.ndarray
    method: str


def _ee_batch(fibers: np.ndarray) -> np.ndarray:
    """Vectorized shortest-half scoring of fibers given as rows."""
    m, n = fibers.shape
    h = n // 2 + 1
    ys = np.sort(fibers, axis=1)
    ranges = ys[:, h - 1 :] - ys[:, : n - h + 1]
    start = np.argmin(ranges, axis=1)[:, None]
    lo = np.take_along_axis(ys, start, axis=1)
    hi = np.take_along_axis(ys, start + h - 1, axis=1)
    loc = (lo + hi) / 2.0

    csum = np.concatenate([np.zeros((m, 1)), np.cumsum(ys, axis=1)], axis=1)
    csq = np.concatenate([np.zeros((m, 1)), np.cumsum(ys**2, axis=1)], axis=1)
    wsum = np.take_along_axis(csum, start + h, axis=1) - np.take_along_axis(csum, start, axis=1)
    wsq = np.take_along_axis(csq, start + h, axis=1) - np.take_along_axis(csq, start, axis=1)
    var = wsq / h - (wsum / h) ** 2
    scale = np.maximum(np.sqrt(np.maximum(var, 0.0)), _EE_SCALE_FLOOR)

    return ((fibers - loc) / scale) ** 2


def ee_fiber_scores(fiber: np.ndarray) -> np.ndarray:
    """Squared standardized distance from a robust location/scale fit.

    The sorted fiber's contiguous half-sample (``n // 2 + 1`` points) of
    minimal range, earliest window on ties, provides the fit: location is the
    midpoint of the window's extremes, scale its standard deviation floored
    at 1e-12.
    """
    fiber = np.asarray(fiber, dtype=np.float64).ravel()
    if fiber.size < 4:
        raise ValueError(f"fiber length {fiber.size} < 4")
    return _ee_batch(fiber[None, :])[0]


def lof_fiber_scores(fiber: np.ndarray, k: int = 10) -> np.ndarray:
    """Local outlier factor of each value among the fiber's values.

    Neighborhoods are the k nearest points by absolute difference (ties on
    distance broken by lower index when ranking, with all distance ties of
    the k-th neighbor included in the neighborhood).  Densities are guarded
    so duplicated points score exactly 1.
    """
    fiber = np.asarray(fiber, dtype=np.float64).ravel()
    n = fiber.size
    if k >= n:
        raise ValueError(f"k={k} must be smaller than fiber length {n}")
    if k < 1:
        raise ValueError("k must be >= 1")

    d = np.abs(fiber[:, None] - fiber[None, :])
    idx = np.arange(n)
    ranking = d.copy()
    np.fill_diagonal(ranking, np.inf)  # self is never its own neighbor
    order = np.lexsort((np.broadcast_to(idx, (n, n)), ranking), axis=1)

    kth = d[idx[:, None], order[:, k - 1 : k]]
    neighbors = (d <= kth) & (idx[None, :] != idx[:, None])

    counts = neighbors.sum(axis=1)
    reach = np.maximum(kth.T, d)
    mean_reach = np.where(neighbors, reach, 0.0).sum(axis=1) / counts
    lrd = 1.0 / (mean_reach + _LOF_DENSITY_GUARD)

    lof = np.where(neighbors, lrd[None, :], 0.0).sum(axis=1) / counts / lrd
    return lof


def score_tensor(s: np.ndarray, method: str = "ee", k: int = 10) -> ScoreTensor:
    """Score every mode-2 fiber of ``s`` and reassemble the score tensor."""
    method = str(method).lower()
    if method not in METHODS:
        raise ValueError(f"unknown scoring method {method!r}; expected one of {METHODS}")
    if s.ndim < 3:
        raise ValueError("score_tensor expects a tensor with a mode-2 fiber axis")

    fibers = np.moveaxis(s, 2, -1)
    lead_shape = fibers.shape[:-1]
    flat = fibers.reshape(-1, fibers.shape[-1])

    if method == "ee":
        if flat.shape[1] < 4:
            raise ValueError(f"fiber length {flat.shape[1]} < 4")
        scored = _ee_batch(flat)
    else:
        scored = np.empty_like(flat)
        for i in range(flat.shape[0]):
            try:
                scored[i] = lof_fiber_scores(flat[i], k=k)
            except ValueError as exc:
                coords = np.unravel_index(i, lead_shape)
                raise ValueError(f"fiber at {coords}: {exc}") from exc

    scores = np.moveaxis(scored.reshape(fibers.shape), -1, 2)
    return ScoreTensor(scores=scores, method=method)


def top_k_labels(st: ScoreTensor, k_percent: float) -> np.ndarray:
    """Boolean mask of the top ``k_percent`` percent highest scores.

    Exactly ``ceil(k_percent / 100 * size)`` entries are flagged; score ties
    at the cut are resolved in favor of the lexicographically smaller index.
    """
    if not 0 < k_percent <= 100:
        raise ValueError(f"k_percent must lie in (0, 100], got {k_percent}")
    flat = st.scores.ravel()
    count = ceil(k_percent / 100.0 * flat.size)
    order = np.argsort(-flat, kind="stable")
    mask = np.zeros(flat.size, dtype=bool)
    mask[order[:count]] = True
    return mask.reshape(st.scores.shape)
