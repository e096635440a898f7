"""Dense N-mode tensor algebra: unfolding, folding, mode products and support masks.

Tensors are plain ``numpy.ndarray`` objects with float64 values stored in
row-major (C) order, i.e. the offset of element ``(i_0, ..., i_{N-1})`` is
``((i_0 * I_1 + i_1) * I_2 + i_2) * ... + i_{N-1}`` (last index fastest).
Modes are 0-based.

The mode-n unfolding maps a tensor to the ``I_n x prod(I_k, k != n)`` matrix
whose row ``i`` collects every entry with n-th index equal to ``i``.  Columns
are ordered by the remaining indices in increasing mode order with the lowest
mode varying fastest.  This single convention is used everywhere; any
self-consistent choice round-trips through ``fold``.

Support sets (observed-entry masks) are boolean arrays of the same shape as
their target tensor.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np


def as_tensor(values) -> np.ndarray:
    """Coerce input to a float64 ndarray with at least one mode."""
    t = np.asarray(values, dtype=np.float64)
    if t.ndim < 1:
        t = t.reshape(1)
    if min(t.shape) < 1:
        raise ValueError(f"tensor extents must be >= 1, got shape {t.shape}")
    return t


def check_finite(t: np.ndarray, name: str = "tensor") -> None:
    """Raise ValueError if ``t`` contains NaN or infinity."""
    if not np.isfinite(t).all():
        raise ValueError(f"{name} contains non-finite values")


def _check_mode(t: np.ndarray, mode: int) -> None:
    if not 0 <= mode < t.ndim:
        raise ValueError(f"mode {mode} out of range for a {t.ndim}-mode tensor")


def unfold(t: np.ndarray, mode: int) -> np.ndarray:
    """Mode-n unfolding of ``t`` as an ``I_n x prod(I_k, k != n)`` matrix.

    Row ``i`` holds all entries whose ``mode``-th index is ``i``; the column
    index runs over the remaining indices with the lowest mode fastest.
    """
    _check_mode(t, mode)
    return np.reshape(np.moveaxis(t, mode, 0), (t.shape[mode], -1), order="F")


def fold(m: np.ndarray, mode: int, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold`: rebuild a tensor of ``shape`` from its mode-n unfolding."""
    shape = tuple(int(s) for s in shape)
    if not 0 <= mode < len(shape):
        raise ValueError(f"mode {mode} out of range for shape {shape}")
    m = np.asarray(m, dtype=np.float64)
    rest = tuple(s for k, s in enumerate(shape) if k != mode)
    expected = (shape[mode], int(np.prod(rest, dtype=np.int64)))
    if m.ndim != 2 or m.shape != expected:
        raise ValueError(f"matrix shape {m.shape} does not match mode-{mode} unfolding {expected} of {shape}")
    return np.moveaxis(np.reshape(m, (shape[mode],) + rest, order="F"), 0, mode)


def mode_n_product(t: np.ndarray, u: np.ndarray, mode: int) -> np.ndarray:
    """Multiply matrix ``u`` (J x I_n) against the mode-n unfolding and refold.

    The result has mode-``mode`` extent J and all other extents unchanged.
    """
    _check_mode(t, mode)
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 2 or u.shape[1] != t.shape[mode]:
        raise ValueError(f"matrix shape {u.shape} incompatible with mode-{mode} extent {t.shape[mode]}")
    new_shape = list(t.shape)
    new_shape[mode] = u.shape[0]
    return fold(u @ unfold(t, mode), mode, new_shape)


def cat_n(tensors: Sequence[np.ndarray], mode: int) -> np.ndarray:
    """Stack the mode-n unfoldings of equally shaped tensors across rows.

    Returns an ``M * I_n x prod(I_k, k != n)`` matrix in list order.
    """
    if len(tensors) == 0:
        raise ValueError("cat_n requires at least one tensor")
    shape = tensors[0].shape
    for i, t in enumerate(tensors):
        if t.shape != shape:
            raise ValueError(f"tensor {i} has shape {t.shape}, expected {shape}")
    return np.vstack([unfold(t, mode) for t in tensors])


def frobenius_norm(t: np.ndarray) -> float:
    """Square root of the sum of squared entries."""
    return float(np.sqrt(np.sum(np.square(t, dtype=np.float64))))


def l1_norm(t: np.ndarray) -> float:
    """Sum of absolute entries."""
    return float(np.sum(np.abs(t), dtype=np.float64))


def _check_mask(t: np.ndarray, mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.dtype != np.bool_:
        raise ValueError("support mask must be boolean")
    if mask.shape != t.shape:
        raise ValueError(f"support mask shape {mask.shape} does not match tensor shape {t.shape}")
    return mask


def project(t: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Zero every entry outside the support mask."""
    mask = _check_mask(t, mask)
    return np.where(mask, t, 0.0)


def project_complement(t: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Zero every entry inside the support mask."""
    mask = _check_mask(t, mask)
    return np.where(mask, 0.0, t)


def full_support(shape: Sequence[int]) -> np.ndarray:
    """All-observed support mask for the given shape."""
    return np.ones(tuple(shape), dtype=bool)
