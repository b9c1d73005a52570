"""Channel degradations applied to stego images before recovery."""

from __future__ import annotations

import io

import numpy as np
from PIL import Image
from scipy import ndimage

from ..images import check_image, from_uint8, to_uint8


def gaussian_kernel1d(size: int, sigma: float) -> np.ndarray:
    if size < 1 or size % 2 == 0:
        raise ValueError("kernel size must be a positive odd integer")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    r = np.arange(size, dtype=np.float64) - size // 2
    g = np.exp(-(r**2) / (2.0 * sigma**2))
    return g / g.sum()


def degrade_gaussian_blur(img, kernel: int = 7, sigma: float = 10.0) -> np.ndarray:
    """Separable Gaussian blur, mirrored borders (OpenCV's default border)."""
    img = check_image(img)
    g = gaussian_kernel1d(kernel, sigma)
    out = ndimage.correlate1d(img.astype(np.float64), g, axis=1, mode="mirror")
    out = ndimage.correlate1d(out, g, axis=2, mode="mirror")
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def degrade_jpeg(img, quality: int = 40) -> np.ndarray:
    if not 1 <= quality <= 100:
        raise ValueError("JPEG quality must be in [1, 100]")
    img = check_image(img)
    buf = io.BytesIO()
    Image.fromarray(to_uint8(img)).save(buf, format="JPEG", quality=int(quality))
    buf.seek(0)
    with Image.open(buf) as pil:
        return from_uint8(np.asarray(pil.convert("RGB")))


DEGRADATIONS = {
    "gaussian_blur": degrade_gaussian_blur,
    "jpeg": degrade_jpeg,
}


def total_variation(img) -> float:
    arr = np.asarray(img, dtype=np.float64)
    return float(np.abs(np.diff(arr, axis=-1)).sum() + np.abs(np.diff(arr, axis=-2)).sum())
