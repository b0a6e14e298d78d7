"""Reconstruction quality metrics."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError, InvalidSpecError
from ..signals import Image

# P[F=1] counts a reconstruction as exact above this fidelity
EXACT_FIDELITY = 1.0 - 1e-6


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(a, Image) and isinstance(b, Image) and a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    x = np.asarray(a.data if isinstance(a, Image) else a, dtype=float).ravel()
    y = np.asarray(b.data if isinstance(b, Image) else b, dtype=float).ravel()
    if x.shape != y.shape:
        raise DimensionError(f"shape mismatch: {x.shape} vs {y.shape}")
    return x, y


def _unit_scale(v: np.ndarray) -> np.ndarray:
    """Divide by the largest magnitude so the products below cannot under- or overflow."""
    top = np.abs(v).max(initial=0.0)
    return v / top if top > 0 else v


def _normalized_dot(x: np.ndarray, y: np.ndarray) -> float:
    x, y = _unit_scale(x), _unit_scale(y)
    # sqrt(p * p) == p in floating point, so identical inputs give exactly 1
    return float(np.clip(x @ y / np.sqrt((x @ x) * (y @ y)), -1.0, 1.0))


def fidelity(a, b) -> float:
    """Normalized inner product; 1 for two zero images, 0 if only one is zero."""
    x, y = _pair(a, b)
    zx, zy = not np.any(x), not np.any(y)
    if zx and zy:
        return 1.0
    if zx or zy:
        return 0.0
    return _normalized_dot(x, y)


def correlation(a, b) -> float:
    """Pearson correlation of the pixel values."""
    x, y = _pair(a, b)
    x = x - x.mean()
    y = y - y.mean()
    if not (np.any(x) and np.any(y)):
        raise InvalidSpecError("correlation is undefined for a constant image")
    return _normalized_dot(x, y)


def is_exact(recon, truth, zero_clip: float = 1e-6) -> bool:
    """Fidelity above ``EXACT_FIDELITY`` and identical support after clipping."""
    x, y = _pair(recon, truth)
    if fidelity(x, y) < EXACT_FIDELITY:
        return False
    return bool(np.array_equal(np.abs(x) >= zero_clip, np.abs(y) >= zero_clip))
