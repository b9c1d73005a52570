"""Hide, recover, and the two scripted attacks.

Hiding::

    ref   = reference image from (password, prompt 2, control)
    pair  = (encode(I_ori), encode(I_ori))            model A autoencoder
    pair  = invert to depth under null text           model A
    pair  = sign-flip both members with the password mask
    pair  = denoise from depth under prompt 2 + ref   model B
    I_enc = decode(pair.x)                            model B autoencoder

Recovery runs the same stages mirrored: encode with B, invert under
prompt 2 + ref, flip back, denoise under null text with A, decode with A.
The pair is re-initialised from the single stego image (y := x) unless
``transport_pair`` is set and the caller hands over the hidden y member.
"""

from __future__ import annotations

import hashlib
import json
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any

import numpy as np

from . import __version__
from .backends import Backend, get_backend
from .images import check_image, digest
from .latentops import DTYPES, CoupledPair, flip_pair
from .refgen import RefRequest, generate_reference
from .scheduler import EdictParams, build_schedule, classifier_free, denoise_from_depth, invert_to_depth
from .seedkit import Password, derive_seed, generate_flip_mask

SD15 = "runwayml/stable-diffusion-v1-5"
PICX_REAL = "GraydientPlatformAPI/picx-real"
CATEGORIES = ("content", "style", "similar")


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class ReferenceMismatch(StageError):
    pass


@dataclass(frozen=True)
class StegoConfig:
    T: int = 50
    xi: float = 0.6
    eta: float = 0.05
    p: float = 0.93
    image_prompt_weight: float = 1.0
    guidance_scale: float = 1.0
    refgen_guidance_scale: float = 1.0
    refgen_steps: int | None = None
    model_a: str = SD15
    model_b: str = PICX_REAL
    style_model_b: str = SD15
    refgen_model: str = PICX_REAL
    use_control: bool = True
    control_in_stego: bool = False
    control_scale: float = 1.0
    prompt1: str = ""
    transport_pair: bool = False
    dtype: str = "float32"
    T_train: int = 1000
    beta_start: float = 0.00085
    beta_end: float = 0.012
    allow_nondeterministic: bool = False

    def __post_init__(self):
        if not 1 <= self.T <= self.T_train:
            raise ValueError(f"T must be in [1, {self.T_train}]")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must be in [0, 1]")
        if self.image_prompt_weight < 0:
            raise ValueError("image prompt weight must be >= 0")
        if self.guidance_scale <= 0 or self.refgen_guidance_scale <= 0:
            raise ValueError("guidance scales must be > 0")
        if self.dtype not in DTYPES:
            raise ValueError(f"dtype must be one of {sorted(DTYPES)}")
        EdictParams(self.p, self.xi).depth_steps(self.T)

    @classmethod
    def toy(cls, **overrides) -> StegoConfig:
        base = dict(model_a="toy:analytic:a", model_b="toy:analytic:b", style_model_b="toy:analytic:b", refgen_model="toy:analytic:r")
        base.update(overrides)
        return cls.from_dict(base)

    @classmethod
    def from_dict(cls, data: dict) -> StegoConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def for_category(self, category: str) -> StegoConfig:
        if category not in CATEGORIES:
            raise ValueError(f"category must be one of {CATEGORIES}")
        if category == "style":
            return replace(self, xi=0.7, use_control=False, model_b=self.style_model_b)
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    @property
    def depth_steps(self) -> int:
        return EdictParams(self.p, self.xi).depth_steps(self.T)


@dataclass
class StegoResult:
    image: np.ndarray
    audit: dict[str, Any] = field(default_factory=dict)
    # secret side only, populated when transport_pair is on
    pair_y: np.ndarray | None = field(default=None, repr=False)


class _Counter:
    def __init__(self, fn):
        self.fn = fn
        self.calls = 0

    def __call__(self, latent, t, cond):
        self.calls += 1
        return self.fn(latent, t, cond)


@contextmanager
def _stage(name: str, timings: dict):
    start = time.perf_counter()
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, f"{type(exc).__name__}: {exc}") from exc
    finally:
        timings[name] = round(time.perf_counter() - start, 6)


class _Run:
    """Resolved models, schedule and bookkeeping for one protocol call."""

    def __init__(self, cfg: StegoConfig, label: str):
        self.cfg = cfg
        self.label = label
        dtype = DTYPES[cfg.dtype]
        self.A = get_backend(cfg.model_a, dtype=dtype)
        self.B = get_backend(cfg.model_b, dtype=dtype)
        self.R = get_backend(cfg.refgen_model, dtype=dtype)
        self.schedule = build_schedule(cfg.T_train, cfg.T, cfg.beta_start, cfg.beta_end)
        self.params = EdictParams(cfg.p, cfg.xi)
        self.depth = self.params.depth_steps(cfg.T)
        self.trace: list[dict] = []
        self.timings: dict[str, float] = {}
        self.audit: dict[str, Any] = {"stage": label, "T": cfg.T, "depth_steps": self.depth, "config_hash": cfg.digest()}

    def record(self, op: str, **info):
        self.trace.append({"op": op, **info})

    def reference(self, password, prompt2, image_shape, ctrl, ctrl_type):
        with _stage("refgen", self.timings):
            ref = reference_image(password, prompt2, image_shape, self.cfg, ctrl, ctrl_type, model=self.R)
        self.audit["ref_digest"] = digest(ref)
        self.record("refgen", model="R", control=bool(self.cfg.use_control and ctrl is not None))
        return ref

    def null_cond(self):
        return self.A.conditioning(self.cfg.prompt1)

    def prompt_cond(self, prompt2, ref, ctrl, ctrl_type):
        cfg = self.cfg
        cond = self.B.conditioning(prompt2)
        if ref is not None:
            cond = cond.with_image_prompt(self.B.embed_image_prompt(ref, cfg.image_prompt_weight))
        if cfg.control_in_stego and ctrl is not None:
            cond = cond.with_control(self.B.apply_control(ctrl, cfg.control_scale, ctrl_type or "seg"))
        return cond

    def _predictor(self, model: Backend, uncond_prompt: str):
        predict = model.predict_noise
        if self.cfg.guidance_scale != 1.0:
            predict = classifier_free(predict, model.conditioning(uncond_prompt), self.cfg.guidance_scale)
        return _Counter(predict)

    def encode(self, slot, image):
        model = getattr(self, slot)
        with _stage("encode", self.timings):
            z = model.encode_image(image)
        self.record("encode", model=slot)
        return z

    def decode(self, slot, latent):
        model = getattr(self, slot)
        with _stage("decode", self.timings):
            img = model.decode_latent(latent)
        self.record("decode", model=slot)
        return img

    def invert(self, slot, pair, cond):
        model = getattr(self, slot)
        predict = self._predictor(model, "")
        with _stage("invert", self.timings):
            pair = invert_to_depth(pair, cond, self.depth, predict, self.params, self.schedule)
        self.record("invert", model=slot, cond=cond.label(), calls=predict.calls)
        return pair

    def denoise(self, slot, pair, cond):
        model = getattr(self, slot)
        predict = self._predictor(model, "")
        with _stage("denoise", self.timings):
            pair = denoise_from_depth(pair, cond, self.depth, predict, self.params, self.schedule)
        self.record("denoise", model=slot, cond=cond.label(), calls=predict.calls)
        return pair

    def flip(self, pair, password):
        with _stage("flip", self.timings):
            mask = generate_flip_mask(derive_seed(password, "noise-flip"), pair.shape, self.cfg.eta)
            pair = flip_pair(pair, mask)
        self.audit["mask_digest"] = mask.digest()
        self.audit["mask_count"] = mask.count
        self.record("flip", eta=self.cfg.eta)
        return pair

    def finish(self, image, pair=None) -> StegoResult:
        self.audit["trace"] = self.trace
        self.audit["timings"] = self.timings
        self.audit["denoiser_calls"] = sum(s.get("calls", 0) for s in self.trace)
        y = pair.y.copy() if (pair is not None and self.cfg.transport_pair) else None
        return StegoResult(image, self.audit, y)


def reference_image(password, prompt2: str, image_shape, cfg: StegoConfig, ctrl=None, ctrl_type: str | None = None, model: Backend | None = None) -> np.ndarray:
    """The password-seeded reference image exactly as hide/recover generate it. Secret."""
    model = model or get_backend(cfg.refgen_model, dtype=DTYPES[cfg.dtype])
    use_ctrl = cfg.use_control and ctrl is not None
    req = RefRequest(
        password, prompt2, model, image_shape=tuple(image_shape),
        control=ctrl if use_ctrl else None, control_type=ctrl_type if use_ctrl else None,
        control_scale=cfg.control_scale, steps=cfg.refgen_steps or cfg.T,
        guidance_scale=cfg.refgen_guidance_scale, allow_nondeterministic=cfg.allow_nondeterministic,
    )
    return generate_reference(req)


def _start_pair(z, pair_y, cfg):
    if cfg.transport_pair and pair_y is not None:
        return CoupledPair(z, np.asarray(pair_y, dtype=z.dtype))
    return CoupledPair.from_latent(z)


def hide(image, prompt2: str, password, cfg: StegoConfig | None = None, ctrl=None, ctrl_type: str | None = None) -> StegoResult:
    cfg = cfg or StegoConfig()
    if not prompt2:
        raise ValueError("prompt 2 must be non-empty")
    password = Password(password)
    image = check_image(image, "original image")
    ctrl = None if ctrl is None else check_image(ctrl, "control image")
    run = _Run(cfg, "hide")
    ref = run.reference(password, prompt2, image.shape, ctrl, ctrl_type)
    pair = CoupledPair.from_latent(run.encode("A", image))
    pair = run.invert("A", pair, run.null_cond())
    pair = run.flip(pair, password)
    pair = run.denoise("B", pair, run.prompt_cond(prompt2, ref, ctrl, ctrl_type))
    return run.finish(run.decode("B", pair.x), pair)


def recover(stego, prompt2: str, password, cfg: StegoConfig | None = None, ctrl=None, ctrl_type: str | None = None, audit: dict | None = None, pair_y=None, label: str = "recover") -> StegoResult:
    cfg = cfg or StegoConfig()
    password = Password(password)
    stego = check_image(stego, "stego image")
    ctrl = None if ctrl is None else check_image(ctrl, "control image")
    run = _Run(cfg, label)
    ref = run.reference(password, prompt2, stego.shape, ctrl, ctrl_type)
    expected = (audit or {}).get("ref_digest")
    if expected is not None and expected != run.audit["ref_digest"]:
        raise ReferenceMismatch("refgen", "regenerated reference image does not match the hiding-side digest")
    pair = _start_pair(run.encode("B", stego), pair_y, cfg)
    pair = run.invert("B", pair, run.prompt_cond(prompt2, ref, ctrl, ctrl_type))
    pair = run.flip(pair, password)
    pair = run.denoise("A", pair, run.null_cond())
    return run.finish(run.decode("A", pair.x))


def attack_recover_no_password(stego, prompt2: str, cfg: StegoConfig | None = None, ctrl=None, ctrl_type: str | None = None) -> StegoResult:
    """Recovery from public material only: no reference image, no flip-back."""
    cfg = cfg or StegoConfig()
    stego = check_image(stego, "stego image")
    ctrl = None if ctrl is None else check_image(ctrl, "control image")
    run = _Run(cfg, "attack-none")
    pair = CoupledPair.from_latent(run.encode("B", stego))
    pair = run.invert("B", pair, run.prompt_cond(prompt2, None, ctrl, ctrl_type))
    pair = run.denoise("A", pair, run.null_cond())
    return run.finish(run.decode("A", pair.x))


def attack_recover_wrong_password(stego, prompt2: str, wrong_password, cfg: StegoConfig | None = None, ctrl=None, ctrl_type: str | None = None) -> StegoResult:
    return recover(stego, prompt2, wrong_password, cfg, ctrl, ctrl_type, label="attack-wrong")


def check_distinct_passwords(correct, wrong) -> None:
    """Guard for harnesses: a 'wrong' password equal to the real one is a broken fixture."""
    if Password(correct) == Password(wrong):
        raise ValueError("wrong-password fixture equals the correct password")


def public_metadata(result: StegoResult, prompt2: str, cfg: StegoConfig, control_type: str | None = None, category: str | None = None) -> dict:
    """Everything a recipient needs besides the password. Contains nothing secret."""
    return {
        "tool": "pwstega",
        "version": __version__,
        "stage": result.audit.get("stage"),
        "prompt2": prompt2,
        "control_type": control_type,
        "category": category,
        "config": cfg.to_dict(),
        "config_hash": cfg.digest(),
        "image_shape": list(result.image.shape),
    }
