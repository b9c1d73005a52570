"""Latent arrays, coupled latent pairs and the sign-flip cipher."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .seedkit import FlipMask

DTYPES = {"float32": np.float32, "float64": np.float64}


class NonFiniteLatent(ValueError):
    pass


def as_latent(data, dtype=np.float32) -> np.ndarray:
    """Validate and convert to a (C, H, W) float array."""
    arr = np.asarray(data, dtype=dtype)
    if arr.ndim != 3:
        raise ValueError(f"latent must be (C, H, W), got shape {arr.shape}")
    check_finite(arr)
    return arr


def check_finite(arr: np.ndarray, what: str = "latent") -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteLatent(f"{what} contains NaN or Inf")
    return arr


@dataclass(frozen=True)
class CoupledPair:
    """The two sequences tracked by the exactly invertible coupled sampler."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if self.x.shape != self.y.shape:
            raise ValueError(f"pair shape mismatch: {self.x.shape} vs {self.y.shape}")
        if self.x.dtype != self.y.dtype:
            raise ValueError(f"pair dtype mismatch: {self.x.dtype} vs {self.y.dtype}")

    @classmethod
    def from_latent(cls, z: np.ndarray) -> CoupledPair:
        z = np.asarray(z)
        z = as_latent(z, dtype=z.dtype if z.dtype == np.float64 else np.float32)
        return cls(z.copy(), z.copy())

    @property
    def shape(self):
        return self.x.shape

    @property
    def dtype(self):
        return self.x.dtype


def noise_flip(latent: np.ndarray, mask: FlipMask | np.ndarray) -> np.ndarray:
    bits = mask.bits if isinstance(mask, FlipMask) else np.asarray(mask, dtype=bool)
    latent = np.asarray(latent)
    if latent.shape != bits.shape:
        raise ValueError(f"mask shape {bits.shape} does not match latent {latent.shape}")
    # negation is exact, so this is a bit-exact involution
    return np.where(bits, -latent, latent)


def flip_pair(pair: CoupledPair, mask: FlipMask | np.ndarray) -> CoupledPair:
    return CoupledPair(noise_flip(pair.x, mask), noise_flip(pair.y, mask))
