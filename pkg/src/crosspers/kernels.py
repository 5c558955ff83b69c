from __future__ import annotations

import numpy as np
from scipy.stats import iqr

SQRT_2PI = np.sqrt(2.0 * np.pi)


def silverman_bandwidth(samples: np.ndarray) -> float:
    """Silverman's rule ``0.9 * min(std, IQR / 1.34) * n^(-1/5)``.

    A vanishing IQR falls back to the standard deviation, a constant sample
    to ``1e-3 * max(1, |mean|)``.
    """
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise ValueError("cannot estimate a bandwidth from zero samples")
    std = float(np.std(samples, ddof=1)) if samples.size > 1 else 0.0
    spread = float(iqr(samples)) / 1.34
    scale = min(std, spread) if spread > 0.0 else std
    if scale <= 0.0:
        return 1e-3 * max(1.0, abs(float(np.mean(samples))))
    return 0.9 * scale * samples.size ** (-0.2)


def gaussian(offsets: np.ndarray, bandwidth: float) -> np.ndarray:
    """Normal density with standard deviation ``bandwidth`` at ``offsets``."""
    return np.exp(-0.5 * (offsets / bandwidth) ** 2) / (SQRT_2PI * bandwidth)
