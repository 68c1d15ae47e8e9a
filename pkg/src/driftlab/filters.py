"""Discrete Gaussian smoothing shared by density maps and field downgrading.

The kernel samples exp(-k^2 / 2 sigma^2) at integer offsets, is normalized
to sum to one, and is truncated at radius ceil(4 sigma).  Edges are
zero-padded, so mass near the domain boundary leaks out of the grid.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.ndimage import correlate1d


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian kernel truncated at radius ceil(4*sigma)."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = math.ceil(4.0 * sigma)
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (offsets / sigma) ** 2)
    return kernel / kernel.sum()


def gaussian_smooth(field: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian filter of a 2-D field with zero padding."""
    kernel = gaussian_kernel(sigma)
    field = np.asarray(field, dtype=np.float64)
    if field.ndim != 2:
        raise ValueError(f"expected a 2-D field, got shape {field.shape}")
    # Kernel is symmetric, so correlation equals convolution.
    out = correlate1d(field, kernel, axis=0, mode="constant", cval=0.0)
    return correlate1d(out, kernel, axis=1, mode="constant", cval=0.0)
