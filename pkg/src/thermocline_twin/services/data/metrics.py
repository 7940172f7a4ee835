"""Error metrics."""

from collections.abc import Sequence

import numpy as np

from thermocline_twin.exceptions import ShapeError


def rmse(pred: Sequence[float] | np.ndarray, truth: Sequence[float] | np.ndarray) -> float:
    """Root mean squared difference of two equal-length sequences."""
    p = np.asarray(pred, dtype=float).ravel()
    t = np.asarray(truth, dtype=float).ravel()
    if p.size != t.size:
        raise ShapeError(f"Length mismatch: {p.size} vs {t.size}", pred=p.size, truth=t.size)
    if p.size == 0:
        raise ShapeError("rmse needs at least one sample")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def channel_rmse(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Per-column RMSE of two ``(n, k)`` arrays."""
    p = np.asarray(pred, dtype=float)
    t = np.asarray(truth, dtype=float)
    if p.shape != t.shape or p.ndim != 2 or p.shape[0] == 0:
        raise ShapeError(f"Shape mismatch: {p.shape} vs {t.shape}")
    return np.asarray(np.sqrt(np.mean((p - t) ** 2, axis=0)))
