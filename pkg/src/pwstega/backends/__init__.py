"""Model backends: an analytic toy family and diffusers checkpoints."""

from __future__ import annotations

import threading

import numpy as np

from .base import (
    CONCURRENT_SAFE,
    SERIAL_ONLY,
    Backend,
    BackendUnavailable,
    Conditioning,
    ControlHint,
    ImagePrompt,
    TextEmbedding,
)
from .toy import ToyBackend, parse_toy_id

__all__ = [
    "Backend", "BackendUnavailable", "Conditioning", "ControlHint", "ImagePrompt",
    "TextEmbedding", "ToyBackend", "get_backend", "SERIAL_ONLY", "CONCURRENT_SAFE",
]

_cache: dict = {}
_lock = threading.Lock()


def get_backend(model_id: str, dtype=np.float32, **options) -> Backend:
    """Resolve a model identifier, caching one handle per (id, dtype)."""
    key = (model_id, np.dtype(dtype).str, tuple(sorted(options.items())))
    with _lock:
        if key not in _cache:
            if model_id.startswith("toy:"):
                _cache[key] = parse_toy_id(model_id, dtype=dtype)
            else:
                from .pretrained import DiffusersBackend

                _cache[key] = DiffusersBackend(model_id, **options)
        return _cache[key]
