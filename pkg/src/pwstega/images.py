"""Image arrays ((3, H, W) float32 in [0, 1]) and PNG/JPEG file I/O."""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np
from PIL import Image


def check_image(img, name: str = "image") -> np.ndarray:
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise ValueError(f"{name} must be (3, H, W), got {arr.shape}")
    if arr.dtype == np.uint8:
        return arr.astype(np.float32) / np.float32(255)
    arr = arr.astype(np.float32, copy=False)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(f"{name} values must lie in [0, 1]")
    return arr


def to_uint8(img: np.ndarray) -> np.ndarray:
    """(3, H, W) float -> (H, W, 3) uint8, rounding to nearest."""
    return np.clip(np.rint(np.asarray(img) * 255.0), 0, 255).astype(np.uint8).transpose(1, 2, 0)


def from_uint8(arr: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(arr, dtype=np.uint8).transpose(2, 0, 1)).astype(np.float32) / np.float32(255)


def center_crop_resize(pil: Image.Image, size: int) -> Image.Image:
    w, h = pil.size
    s = min(w, h)
    left, top = (w - s) // 2, (h - s) // 2
    pil = pil.crop((left, top, left + s, top + s))
    if s != size:
        pil = pil.resize((size, size), Image.BICUBIC)
    return pil


def load_image(path, size: int | None = None) -> np.ndarray:
    with Image.open(path) as pil:
        pil = pil.convert("RGB")
        if size is not None:
            pil = center_crop_resize(pil, size)
        return from_uint8(np.asarray(pil))


def save_png(path, img) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # no text chunks, no metadata: the pixel data is the whole artifact
    Image.fromarray(to_uint8(img)).save(path, format="PNG", pnginfo=None)
    return path


def save_jpeg(path, img, quality: int = 95) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_uint8(img)).save(path, format="JPEG", quality=quality)
    return path


def digest(img) -> str:
    arr = np.ascontiguousarray(np.asarray(img))
    h = hashlib.sha256()
    h.update(str(arr.dtype).encode())
    h.update(str(arr.shape).encode())
    h.update(arr.tobytes())
    return h.hexdigest()
