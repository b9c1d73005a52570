"""Analytic stand-ins for the diffusion model, for tests and desk-scale runs.

Latents have the image's own shape. The autoencoder is the usual
``2 * img - 1`` normalisation and its inverse, with no spatial change. The
decoder clips to [0, 1], so exact round trips need images whose latents stay
clear of +-1 after the conditioning shift (about 0.05 at default gain).

Noise predictors (``kind``):

``zero``
    always 0.
``affine``
    ``coeff * latent``.
``random``
    ``tanh(W @ latent + t / T_train)`` with a seeded channel-mixing matrix W.
``analytic``
    ignores the latent and returns ``gain * (text + w * ip + s * control)``.
    Because the prediction does not depend on the latent, both members of a
    coupled pair receive the same update and stay equal, which keeps the
    hide/recover chain exact up to float rounding.

Only ``analytic`` reads the conditioning.
"""

from __future__ import annotations

import hashlib

import numpy as np

from ..images import check_image
from ..seedkit import SeedMaterial, generate_gaussian
from .base import CONCURRENT_SAFE, Backend, ControlHint, ImagePrompt, TextEmbedding

KINDS = ("zero", "affine", "random", "analytic")


def _hashed_gaussian(label: bytes, shape) -> np.ndarray:
    seed = SeedMaterial(hashlib.sha256(label).digest(), "toy")
    return generate_gaussian(seed, shape, dtype=np.float64)


class ToyBackend(Backend):
    concurrency = CONCURRENT_SAFE
    deterministic = True

    def __init__(self, kind: str = "analytic", coeff: float = 0.1, seed: int = 0, gain: float = 0.01, salt: str = "", channels: int = 3, dtype=np.float32):
        if kind not in KINDS:
            raise ValueError(f"unknown toy kind {kind!r}; expected one of {KINDS}")
        self.kind = kind
        self.coeff = coeff
        self.seed = seed
        self.gain = gain
        self.salt = salt
        self.channels = channels
        self.dtype = np.dtype(dtype).type
        self.model_id = f"toy:{kind}" + {"affine": f":{coeff:g}", "random": f":{seed}", "analytic": f":{salt}" if salt else ""}.get(kind, "")
        if kind == "random":
            w = _hashed_gaussian(f"toy-random-weights:{seed}".encode(), (channels, channels))
            self._weights = (w / np.sqrt(channels)).astype(self.dtype)

    def latent_shape(self, image_shape):
        c, h, w = image_shape
        return (c, h, w)

    def _check_latent(self, latent):
        if latent.ndim != 3 or latent.shape[0] != self.channels:
            raise ValueError(f"{self.model_id} expects ({self.channels}, H, W) latents, got {latent.shape}")

    def predict_noise(self, latent, t, cond):
        latent = np.asarray(latent)
        self._check_latent(latent)
        f = latent.dtype.type
        if self.kind == "zero":
            return np.zeros_like(latent)
        if self.kind == "affine":
            return f(self.coeff) * latent
        if self.kind == "random":
            mixed = np.einsum("ij,jhw->ihw", self._weights.astype(latent.dtype), latent)
            return np.tanh(mixed + f(t / 1000.0))
        return self._offset(cond, latent.shape).astype(latent.dtype)

    def _offset(self, cond, shape):
        total = np.broadcast_to(np.asarray(cond.text.data, dtype=np.float64)[:, None, None], shape)
        ip = cond.image_prompt
        if ip is not None and ip.weight != 0:
            total = total + ip.weight * self._spatial(ip.data, shape)
        ctrl = cond.control
        if ctrl is not None and ctrl.scale != 0:
            total = total + ctrl.scale * self._spatial(ctrl.data, shape)
        return self.gain * total

    @staticmethod
    def _spatial(data, shape):
        data = np.asarray(data, dtype=np.float64)
        if data.shape != shape:
            raise ValueError(f"conditioning map {data.shape} does not match latent {shape}")
        return data

    def encode_image(self, image):
        image = check_image(image)
        f = self.dtype
        return (image.astype(f) * f(2) - f(1)).astype(f)

    def decode_latent(self, latent):
        latent = np.asarray(latent)
        self._check_latent(latent)
        img = (latent.astype(np.float32) + np.float32(1)) / np.float32(2)
        return np.clip(img, 0.0, 1.0).astype(np.float32)

    def embed_text(self, prompt: str) -> TextEmbedding:
        label = b"toy-text\x00" + self.salt.encode() + b"\x00" + prompt.encode("utf-8")
        return TextEmbedding(prompt, _hashed_gaussian(label, (self.channels,)))

    def embed_image_prompt(self, ref, weight: float = 1.0):
        if weight < 0:
            raise ValueError("image prompt weight must be >= 0")
        return ImagePrompt(self.encode_image(ref).astype(np.float64), float(weight))

    def apply_control(self, ctrl, scale: float = 1.0, kind: str = "seg"):
        if ctrl is None:
            return None
        return ControlHint(self.encode_image(ctrl).astype(np.float64), float(scale), kind)


def parse_toy_id(model_id: str, dtype=np.float32) -> ToyBackend:
    """``toy:zero``, ``toy:affine[:coeff]``, ``toy:random[:seed]``, ``toy:analytic[:salt]``."""
    parts = model_id.split(":", 2)
    if parts[0] != "toy" or len(parts) < 2:
        raise ValueError(f"not a toy model id: {model_id!r}")
    kind = parts[1]
    arg = parts[2] if len(parts) > 2 else None
    if kind == "affine":
        return ToyBackend("affine", coeff=float(arg) if arg else 0.1, dtype=dtype)
    if kind == "random":
        return ToyBackend("random", seed=int(arg) if arg else 0, dtype=dtype)
    if kind == "analytic":
        return ToyBackend("analytic", salt=arg or "", dtype=dtype)
    return ToyBackend(kind, dtype=dtype)
