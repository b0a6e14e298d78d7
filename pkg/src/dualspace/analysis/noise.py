"""Effective signal-to-noise ratio of a sampling pattern."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError, InvalidSpecError
from ..signals import Image


def snr_report(truth: Image, noisy: Image | None, sampled_idx=None, sigma: float = 1.0) -> float:
    """Mean clean magnitude over the sampled pixels divided by ``sigma``.

    Without ``sampled_idx`` every pixel counts. ``noisy`` only has its shape
    checked; the ratio uses the clean values.
    """
    if not sigma > 0:
        raise InvalidSpecError("sigma must be positive")
    if noisy is not None and noisy.shape != truth.shape:
        raise DimensionError("truth and noisy image differ in shape")
    mags = np.abs(truth.data)
    if sampled_idx is None:
        return float(mags.mean() / sigma)
    idx = np.asarray(sampled_idx, dtype=np.int64).ravel()
    if idx.size == 0:
        raise InvalidSpecError("sampled_idx is empty")
    if np.any((idx < 0) | (idx >= truth.n)):
        raise InvalidSpecError("sampled index out of range")
    return float(mags[idx].mean() / sigma)
