"""Compactly supported product kernels used by the conditional smoothers."""

from __future__ import annotations

import numpy as np

BIWEIGHT = "bw2"
BIWEIGHT4 = "bw4"
KERNEL_NAMES = (BIWEIGHT, BIWEIGHT4)


def biweight(u: np.ndarray) -> np.ndarray:
    """Second-order biweight: (15/16)(1-u^2)^2 on [-1, 1]."""
    u = np.asarray(u, dtype=np.float64)
    t = 1.0 - u * u
    return np.where(np.abs(u) <= 1.0, 0.9375 * t * t, 0.0)


def biweight4(u: np.ndarray) -> np.ndarray:
    """Fourth-order biweight: (105/64)(1-u^2)^2 (1-3u^2) on [-1, 1].

    Integrates to one with vanishing second moment.
    """
    u = np.asarray(u, dtype=np.float64)
    t = 1.0 - u * u
    return np.where(np.abs(u) <= 1.0, 1.640625 * t * t * (1.0 - 3.0 * u * u), 0.0)


def kernel_function(name: str):
    if name == BIWEIGHT:
        return biweight
    if name == BIWEIGHT4:
        return biweight4
    raise ValueError(f"unknown kernel {name!r}; choose from {KERNEL_NAMES}")
