"""Deterministic synthetic test images.

Pixel values stay inside [0.1, 0.9] so the toy decoder never clips the
small conditioning shift a hide/recover cycle introduces.
"""

from __future__ import annotations

import numpy as np

LOW, HIGH = 0.1, 0.9


def synthetic_image(index: int, size: int = 64) -> np.ndarray:
    """Smooth plane waves plus a disc, (3, size, size) float32."""
    rng = np.random.default_rng(1000 + index)
    yy, xx = np.mgrid[0:size, 0:size] / max(size - 1, 1)
    chans = []
    cy, cx, r = rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7), rng.uniform(0.15, 0.3)
    disc = ((yy - cy) ** 2 + (xx - cx) ** 2 < r**2).astype(np.float64)
    for _ in range(3):
        fx, fy, ph = rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0), rng.uniform(0, 2 * np.pi)
        wave = 0.5 + 0.5 * np.sin(2 * np.pi * (fx * xx + fy * yy) + ph)
        chans.append(0.7 * wave + 0.3 * disc * rng.uniform(0.2, 1.0))
    img = np.stack(chans)
    img = (img - img.min()) / (img.max() - img.min() + 1e-12)
    return (LOW + (HIGH - LOW) * img).astype(np.float32)


def random_latent(seed: int, shape=(4, 64, 64), dtype=np.float32) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal(shape).astype(dtype)
