from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any

import numpy as np

SERIAL_ONLY = "serial-only"
CONCURRENT_SAFE = "concurrent-safe"


class BackendUnavailable(RuntimeError):
    """The requested model cannot be loaded in this environment."""


@dataclass(frozen=True)
class TextEmbedding:
    prompt: str
    data: Any


@dataclass(frozen=True)
class ImagePrompt:
    data: Any
    weight: float = 1.0


@dataclass(frozen=True)
class ControlHint:
    data: Any
    scale: float = 1.0
    kind: str = "seg"


@dataclass(frozen=True)
class Conditioning:
    text: TextEmbedding
    image_prompt: ImagePrompt | None = None
    control: ControlHint | None = None

    def with_image_prompt(self, fragment: ImagePrompt | None) -> Conditioning:
        return replace(self, image_prompt=fragment)

    def with_control(self, fragment: ControlHint | None) -> Conditioning:
        return replace(self, control=fragment)

    def label(self) -> str:
        """Short public description used in call traces."""
        parts = ["null-text" if self.text.prompt == "" else "text"]
        if self.image_prompt is not None:
            parts.append(f"ip(w={self.image_prompt.weight:g})")
        if self.control is not None:
            parts.append(f"ctrl({self.control.kind},s={self.control.scale:g})")
        return "+".join(parts)


class Backend:
    """Noise predictor, autoencoder and conditioning encoders for one checkpoint.

    Subclasses set ``model_id``, ``concurrency`` and ``deterministic`` and
    implement the six methods below.
    """

    model_id: str = ""
    concurrency: str = SERIAL_ONLY
    deterministic: bool = True
    dtype = np.float32

    def latent_shape(self, image_shape: tuple[int, ...]) -> tuple[int, int, int]:
        raise NotImplementedError

    def predict_noise(self, latent: np.ndarray, t: int, cond: Conditioning) -> np.ndarray:
        raise NotImplementedError

    def encode_image(self, image: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def decode_latent(self, latent: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def embed_text(self, prompt: str) -> TextEmbedding:
        raise NotImplementedError

    def embed_image_prompt(self, ref: np.ndarray, weight: float = 1.0) -> ImagePrompt | None:
        raise NotImplementedError

    def apply_control(self, ctrl: np.ndarray | None, scale: float = 1.0, kind: str = "seg") -> ControlHint | None:
        raise NotImplementedError

    def conditioning(self, prompt: str, ref=None, weight: float = 1.0, ctrl=None, ctrl_scale: float = 1.0, ctrl_kind: str = "seg") -> Conditioning:
        cond = Conditioning(self.embed_text(prompt))
        if ref is not None:
            cond = cond.with_image_prompt(self.embed_image_prompt(ref, weight))
        if ctrl is not None:
            cond = cond.with_control(self.apply_control(ctrl, ctrl_scale, ctrl_kind))
        return cond

    def __repr__(self):
        return f"{type(self).__name__}({self.model_id!r})"
