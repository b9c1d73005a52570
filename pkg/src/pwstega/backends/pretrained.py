"""Stable-Diffusion-family checkpoints through ``diffusers``.

Requires ``torch`` and ``diffusers`` plus downloadable (or cached) weights.
Image-prompt injection uses an IP-Adapter; structural control uses a
ControlNet picked by control type. Both are loaded lazily on first use.
"""

from __future__ import annotations

import logging
import os

import numpy as np

from ..images import check_image
from .base import SERIAL_ONLY, Backend, BackendUnavailable, ControlHint, ImagePrompt, TextEmbedding

log = logging.getLogger(__name__)

IP_ADAPTER = ("h94/IP-Adapter", "models", "ip-adapter-plus_sd15.bin")
CONTROLNETS = {
    "seg": "lllyasviel/control_v11p_sd15_seg",
    "pose": "lllyasviel/control_v11p_sd15_openpose",
}


def _require_torch():
    try:
        import torch
        import diffusers
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise BackendUnavailable("the pretrained backend needs `torch` and `diffusers` installed") from exc
    return torch, diffusers


class DiffusersBackend(Backend):
    concurrency = SERIAL_ONLY

    def __init__(self, model_id: str, device: str | None = None, torch_dtype: str = "float32", deterministic_algorithms: bool = True, ip_adapter=IP_ADAPTER, controlnets=None):
        torch, diffusers = _require_torch()
        self._torch = torch
        self.model_id = model_id
        self.device = device or ("cuda" if torch.cuda.is_available() else "cpu")
        self.torch_dtype = getattr(torch, torch_dtype)
        self.ip_adapter = ip_adapter
        self.controlnet_ids = dict(CONTROLNETS if controlnets is None else controlnets)
        self._controlnets = {}
        self._ip_loaded = False
        if deterministic_algorithms:
            os.environ.setdefault("CUBLAS_WORKSPACE_CONFIG", ":4096:8")
            torch.use_deterministic_algorithms(True)
            torch.backends.cudnn.benchmark = False
        self.deterministic = bool(deterministic_algorithms) or self.device == "cpu"
        try:
            pipe = diffusers.StableDiffusionPipeline.from_pretrained(model_id, torch_dtype=self.torch_dtype, safety_checker=None, requires_safety_checker=False)
        except Exception as exc:  # noqa: BLE001 - any load failure means unavailable
            raise BackendUnavailable(f"could not load {model_id!r}: {exc}") from exc
        pipe.set_progress_bar_config(disable=True)
        self.pipe = pipe.to(self.device)
        self.scaling = float(self.pipe.vae.config.scaling_factor)
        self.vae_factor = 2 ** (len(self.pipe.vae.config.block_out_channels) - 1)

    # tensors

    def _t(self, arr):
        return self._torch.from_numpy(np.ascontiguousarray(arr)).to(self.device, self.torch_dtype)[None]

    def _np(self, tensor, dtype=np.float32):
        return tensor[0].detach().float().cpu().numpy().astype(dtype)

    def latent_shape(self, image_shape):
        _, h, w = image_shape
        return (int(self.pipe.unet.config.in_channels), h // self.vae_factor, w // self.vae_factor)

    # conditioning

    def embed_text(self, prompt: str) -> TextEmbedding:
        with self._torch.no_grad():
            emb, _ = self.pipe.encode_prompt(prompt, self.device, 1, False)
        return TextEmbedding(prompt, emb)

    def _load_ip(self):
        if not self._ip_loaded:
            repo, sub, weight = self.ip_adapter
            self.pipe.load_ip_adapter(repo, subfolder=sub, weight_name=weight)
            self._ip_loaded = True

    def embed_image_prompt(self, ref, weight: float = 1.0):
        if weight < 0:
            raise ValueError("image prompt weight must be >= 0")
        self._load_ip()
        ref = check_image(ref, "reference image")
        pil = _to_pil(ref)
        with self._torch.no_grad():
            embeds = self.pipe.prepare_ip_adapter_image_embeds([pil], None, self.device, 1, False)
        return ImagePrompt(embeds, float(weight))

    def _controlnet(self, kind):
        if kind not in self._controlnets:
            from diffusers import ControlNetModel

            if kind not in self.controlnet_ids:
                raise BackendUnavailable(f"no control model configured for control type {kind!r}")
            net = ControlNetModel.from_pretrained(self.controlnet_ids[kind], torch_dtype=self.torch_dtype)
            self._controlnets[kind] = net.to(self.device)
        return self._controlnets[kind]

    def apply_control(self, ctrl, scale: float = 1.0, kind: str = "seg"):
        if ctrl is None:
            return None
        ctrl = check_image(ctrl, "control image")
        self._controlnet(kind)
        return ControlHint(self._t(ctrl), float(scale), kind)

    # model calls

    def predict_noise(self, latent, t, cond):
        torch = self._torch
        latent = np.asarray(latent)
        sample = self._t(latent)
        timestep = torch.tensor(int(t), device=self.device)
        text = cond.text.data
        kwargs = {}
        ip = cond.image_prompt
        if self._ip_loaded:
            if ip is not None and ip.weight != 0:
                self.pipe.set_ip_adapter_scale(ip.weight)
                kwargs["added_cond_kwargs"] = {"image_embeds": ip.data}
            else:
                # adapter attached but unused: zero-scale path with placeholder embeddings
                self.pipe.set_ip_adapter_scale(0.0)
                kwargs["added_cond_kwargs"] = {"image_embeds": self._zero_image_embeds()}
        ctrl = cond.control
        with torch.no_grad():
            if ctrl is not None and ctrl.scale != 0:
                down, mid = self._controlnet(ctrl.kind)(
                    sample, timestep, encoder_hidden_states=text, controlnet_cond=ctrl.data,
                    conditioning_scale=ctrl.scale, return_dict=False,
                )
                kwargs["down_block_additional_residuals"] = down
                kwargs["mid_block_additional_residual"] = mid
            out = self.pipe.unet(sample, timestep, encoder_hidden_states=text, **kwargs).sample
        eps = self._np(out, latent.dtype)
        if not np.all(np.isfinite(eps)):
            raise FloatingPointError(f"{self.model_id} produced a non-finite noise prediction")
        return eps

    def _zero_image_embeds(self):
        if not hasattr(self, "_zero_embeds"):
            blank = _to_pil(np.zeros((3, 224, 224), dtype=np.float32))
            with self._torch.no_grad():
                embeds = self.pipe.prepare_ip_adapter_image_embeds([blank], None, self.device, 1, False)
            self._zero_embeds = [self._torch.zeros_like(e) for e in embeds]
        return self._zero_embeds

    def encode_image(self, image):
        image = check_image(image)
        with self._torch.no_grad():
            dist = self.pipe.vae.encode(self._t(image * 2.0 - 1.0)).latent_dist
            latent = dist.mean * self.scaling
        return self._np(latent, self.dtype)

    def decode_latent(self, latent):
        with self._torch.no_grad():
            img = self.pipe.vae.decode(self._t(np.asarray(latent) / self.scaling)).sample
        return np.clip((self._np(img) + 1.0) / 2.0, 0.0, 1.0).astype(np.float32)


def _to_pil(img):
    from PIL import Image

    from ..images import to_uint8

    return Image.fromarray(to_uint8(img))
