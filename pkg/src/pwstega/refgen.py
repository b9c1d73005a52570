"""Password-seeded reference image generation.

The reference image is secret material: it is never written to public
outputs. Only its digest goes to the private audit record.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backends import Backend
from .images import check_image
from .scheduler import build_schedule, classifier_free, ddim_sample
from .seedkit import Password, derive_seed, generate_gaussian


class NondeterministicBackend(RuntimeError):
    pass


@dataclass(frozen=True)
class RefRequest:
    password: Password
    prompt2: str
    model: Backend
    image_shape: tuple[int, int, int] = (3, 512, 512)
    control: np.ndarray | None = None
    control_type: str | None = None
    control_scale: float = 1.0
    steps: int = 50
    guidance_scale: float = 1.0
    allow_nondeterministic: bool = False

    def __post_init__(self):
        object.__setattr__(self, "password", Password(self.password))
        if not self.prompt2:
            raise ValueError("prompt 2 must be non-empty")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")


def initial_noise(password, shape, dtype=np.float32) -> np.ndarray:
    return generate_gaussian(derive_seed(password, "refgen-init"), shape, dtype=dtype)


def generate_reference(req: RefRequest) -> np.ndarray:
    model = req.model
    if not model.deterministic and not req.allow_nondeterministic:
        raise NondeterministicBackend(
            f"{model.model_id} does not declare deterministic outputs; the reference image "
            "could not be reproduced at recovery time"
        )
    shape = model.latent_shape(req.image_shape)
    latent = initial_noise(req.password, shape, dtype=model.dtype)
    ctrl = None
    if req.control is not None:
        ctrl = check_image(req.control, "control image")
    cond = model.conditioning(req.prompt2, ctrl=ctrl, ctrl_scale=req.control_scale, ctrl_kind=req.control_type or "seg")
    predict = model.predict_noise
    if req.guidance_scale != 1.0:
        uncond = model.conditioning("", ctrl=ctrl, ctrl_scale=req.control_scale, ctrl_kind=req.control_type or "seg")
        predict = classifier_free(model.predict_noise, uncond, req.guidance_scale)
    schedule = build_schedule(T=req.steps)
    return model.decode_latent(ddim_sample(latent, cond, predict, schedule))
