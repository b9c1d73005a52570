"""PSNR and SSIM on the 8-bit intensity scale."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

PSNR_CAP = 100.0
LUMA = np.array([0.299, 0.587, 0.114])


def _to_255(img) -> np.ndarray:
    arr = np.asarray(img)
    if arr.dtype == np.uint8:
        return arr.astype(np.float64)
    return arr.astype(np.float64) * 255.0


def psnr(a, b) -> float:
    """``10 log10(255^2 / MSE)``; float inputs are taken to be in [0, 1].

    Identical images give ``PSNR_CAP`` instead of infinity.
    """
    a, b = _to_255(a), _to_255(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = np.mean((a - b) ** 2)
    if mse == 0:
        return PSNR_CAP
    return float(min(PSNR_CAP, 10.0 * np.log10(255.0**2 / mse)))


def luma(img) -> np.ndarray:
    """(3, H, W) or (H, W) -> (H, W) on the 0..255 scale."""
    arr = _to_255(img)
    if arr.ndim == 2:
        return arr
    if arr.ndim == 3 and arr.shape[0] == 3:
        return np.tensordot(LUMA, arr, axes=1)
    raise ValueError(f"expected (3, H, W) or (H, W), got {arr.shape}")


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(r**2) / (2.0 * sigma**2))
    return g / g.sum()


def _filter_valid(x, g):
    half = len(g) // 2
    out = ndimage.correlate1d(x, g, axis=0, mode="constant")
    out = ndimage.correlate1d(out, g, axis=1, mode="constant")
    return out[half:-half, half:-half]


def ssim(a, b, window: int = 11, sigma: float = 1.5, k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean SSIM over valid window positions of the luma channel."""
    x, y = luma(a), luma(b)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    if min(x.shape) < window:
        raise ValueError(f"image {x.shape} is smaller than the {window}x{window} window")
    c1, c2 = (k1 * 255.0) ** 2, (k2 * 255.0) ** 2
    g = gaussian_window(window, sigma)
    mu_x, mu_y = _filter_valid(x, g), _filter_valid(y, g)
    sxx = _filter_valid(x * x, g) - mu_x**2
    syy = _filter_valid(y * y, g) - mu_y**2
    sxy = _filter_valid(x * y, g) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * sxy + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))
