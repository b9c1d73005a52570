"""Password-keyed random material.

Everything random in the protocol (the flip mask and the reference-generator
start noise) is derived here from the password, so the hiding and recovering
parties reproduce it bit-for-bit on any machine.

Algorithms, fixed and versioned:

* seed: ``SHA-256(DOMAIN || 0x00 || context || 0x00 || password)``, 32 bytes.
* stream: NumPy ``Philox`` (Philox4x64-10, counter based). Key is the first
  16 seed bytes read as a little-endian integer, the initial counter is the
  last 16 bytes. Only ``random_raw`` output is consumed, whose stream NumPy
  guarantees across releases.
* flip mask: one raw 64-bit word per element, indices stably argsorted by
  word; the first ``floor(eta * N)`` indices of that permutation are set.
* gaussian: Box-Muller on pairs of 53-bit uniforms in (0, 1), computed in
  float64 and rounded to the requested dtype.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

DOMAIN = b"pwstega/seed/v1"
CONTEXTS = ("noise-flip", "refgen-init")


class Password:
    """An opaque secret. ``repr`` and ``str`` never show the bytes."""

    __slots__ = ("_secret",)

    def __init__(self, secret: str | bytes | int | Password):
        if isinstance(secret, Password):
            secret = secret.secret
        elif isinstance(secret, int) and not isinstance(secret, bool):
            secret = str(secret)
        if isinstance(secret, str):
            secret = secret.encode("utf-8")
        if not isinstance(secret, bytes):
            raise TypeError(f"unsupported password type {type(secret).__name__}")
        if not secret:
            raise ValueError("password must be non-empty")
        self._secret = secret

    @property
    def secret(self) -> bytes:
        return self._secret

    def __eq__(self, other):
        if not isinstance(other, Password):
            return NotImplemented
        return self._secret == other._secret

    def __hash__(self):
        return hash(self._secret)

    def __repr__(self):
        return "Password(<redacted>)"

    __str__ = __repr__


@dataclass(frozen=True)
class SeedMaterial:
    seed: bytes
    context: str

    def __post_init__(self):
        if len(self.seed) != 32:
            raise ValueError("seed must be 32 bytes")

    def __repr__(self):
        # the seed is password-equivalent for our purposes
        return f"SeedMaterial(context={self.context!r}, seed=<redacted>)"


@dataclass(frozen=True)
class FlipMask:
    bits: np.ndarray
    eta: float

    @property
    def shape(self) -> tuple[int, ...]:
        return self.bits.shape

    @property
    def count(self) -> int:
        return int(self.bits.sum())

    def digest(self) -> str:
        return hashlib.sha256(np.packbits(self.bits.ravel()).tobytes()).hexdigest()


def derive_seed(password, context: str) -> SeedMaterial:
    if context not in CONTEXTS:
        raise ValueError(f"unknown seed context {context!r}; expected one of {CONTEXTS}")
    pw = Password(password)
    h = hashlib.sha256()
    h.update(DOMAIN)
    h.update(b"\x00")
    h.update(context.encode("ascii"))
    h.update(b"\x00")
    h.update(pw.secret)
    return SeedMaterial(h.digest(), context)


def _check_shape(shape) -> tuple[int, ...]:
    shape = tuple(int(s) for s in shape)
    if not shape or any(s <= 0 for s in shape):
        raise ValueError(f"invalid shape {shape}")
    return shape


def _philox(seed: SeedMaterial) -> np.random.Philox:
    key = int.from_bytes(seed.seed[:16], "little")
    counter = int.from_bytes(seed.seed[16:], "little")
    return np.random.Philox(key=key, counter=counter)


def raw_words(seed: SeedMaterial, n: int) -> np.ndarray:
    """First ``n`` raw 64-bit words of the seed's stream."""
    return np.asarray(_philox(seed).random_raw(n), dtype=np.uint64)


def generate_flip_mask(seed: SeedMaterial, shape, eta: float) -> FlipMask:
    shape = _check_shape(shape)
    eta = float(eta)
    if not 0.0 <= eta <= 1.0 or math.isnan(eta):
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    n = math.prod(shape)
    k = math.floor(eta * n)
    order = np.argsort(raw_words(seed, n), kind="stable")
    bits = np.zeros(n, dtype=bool)
    bits[order[:k]] = True
    bits.flags.writeable = False
    return FlipMask(bits.reshape(shape), eta)


def generate_gaussian(seed: SeedMaterial, shape, dtype=np.float32) -> np.ndarray:
    shape = _check_shape(shape)
    n = math.prod(shape)
    m = (n + 1) // 2
    words = raw_words(seed, 2 * m)
    # 53-bit uniforms strictly inside (0, 1)
    u = ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    u1, u2 = u[0::2], u[1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    z = np.empty(2 * m, dtype=np.float64)
    z[0::2] = r * np.cos(theta)
    z[1::2] = r * np.sin(theta)
    return z[:n].reshape(shape).astype(dtype)
