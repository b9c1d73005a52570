"""Noise schedule and the exactly invertible coupled (EDICT-style) sampler.

Step algebra, with ``a = sqrt(abar_prev / abar_t)`` and
``b = sqrt(1 - abar_prev) - a * sqrt(1 - abar_t)``::

    denoise:  x_i = a*x + b*eps(y)        invert:  y_i = (y' - (1-p)*x') / p
              y_i = a*y + b*eps(x_i)               x_i = (x' - (1-p)*y_i) / p
              x'  = p*x_i + (1-p)*y_i              y   = (y_i - b*eps(x_i)) / a
              y'  = p*y_i + (1-p)*x'               x   = (x_i - b*eps(y)) / a

All arithmetic runs in the latent dtype, in exactly the order written above.
The noise predictor is always called as ``predict_noise(latent, t, cond)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .latentops import CoupledPair, check_finite

NoisePredictor = Callable[[np.ndarray, int, Any], np.ndarray]


@dataclass(frozen=True)
class NoiseSchedule:
    T_train: int
    T: int
    alpha_bar: np.ndarray  # (T_train,), float64
    timesteps: np.ndarray  # (T,), ascending training steps

    def index_of(self, t: int) -> int:
        idx = np.flatnonzero(self.timesteps == t)
        if idx.size == 0:
            raise ValueError(f"timestep {t} is not in the schedule")
        return int(idx[0])

    def prev_alpha_bar(self, index: int) -> float:
        # terminal step falls back to the first training step, not to 1
        if index == 0:
            return float(self.alpha_bar[0])
        return float(self.alpha_bar[self.timesteps[index - 1]])

    def coefficients(self, t: int) -> tuple[float, float]:
        i = self.index_of(t)
        abar_t = float(self.alpha_bar[t])
        abar_prev = self.prev_alpha_bar(i)
        a = math.sqrt(abar_prev / abar_t)
        b = math.sqrt(1.0 - abar_prev) - a * math.sqrt(1.0 - abar_t)
        return a, b


def build_schedule(T_train: int = 1000, T: int = 50, beta_start: float = 0.00085, beta_end: float = 0.012) -> NoiseSchedule:
    """Scaled-linear betas (sqrt-beta linear) and evenly spaced leading timesteps."""
    if not 1 <= T <= T_train:
        raise ValueError(f"need 1 <= T <= T_train, got T={T}, T_train={T_train}")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise ValueError(f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
    betas = np.linspace(math.sqrt(beta_start), math.sqrt(beta_end), T_train, dtype=np.float64) ** 2
    alpha_bar = np.cumprod(1.0 - betas)
    timesteps = np.arange(T, dtype=np.int64) * (T_train // T)
    alpha_bar.flags.writeable = False
    timesteps.flags.writeable = False
    return NoiseSchedule(T_train, T, alpha_bar, timesteps)


@dataclass(frozen=True)
class EdictParams:
    p: float = 0.93
    xi: float = 0.6

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"mixing coefficient must be in (0, 1], got {self.p}")
        if not 0.0 < self.xi <= 1.0:
            raise ValueError(f"depth fraction must be in (0, 1], got {self.xi}")

    def depth_steps(self, T: int) -> int:
        d = math.floor(self.xi * T + 0.5)
        if d < 1:
            raise ValueError(f"depth fraction {self.xi} gives zero steps at T={T}")
        return d


def classifier_free(predict_noise: NoisePredictor, uncond, scale: float) -> NoisePredictor:
    """Wrap a predictor with classifier-free guidance; scale 1 is a pass-through."""
    if scale == 1.0:
        return predict_noise

    def guided(latent, t, cond):
        e_u = predict_noise(latent, t, uncond)
        e_c = predict_noise(latent, t, cond)
        return e_u + latent.dtype.type(scale) * (e_c - e_u)

    return guided


def _eps(predict_noise, latent, t, cond):
    out = np.asarray(predict_noise(latent, t, cond))
    if out.shape != latent.shape:
        raise ValueError(f"noise prediction shape {out.shape} does not match latent {latent.shape}")
    return out.astype(latent.dtype, copy=False)


def edict_denoise_step(pair: CoupledPair, t: int, cond, predict_noise: NoisePredictor, params: EdictParams, schedule: NoiseSchedule) -> CoupledPair:
    a, b = schedule.coefficients(t)
    f = pair.dtype.type
    a, b, p, q = f(a), f(b), f(params.p), f(1.0 - params.p)
    x, y = pair.x, pair.y
    x_inter = a * x + b * _eps(predict_noise, y, t, cond)
    y_inter = a * y + b * _eps(predict_noise, x_inter, t, cond)
    x_new = p * x_inter + q * y_inter
    y_new = p * y_inter + q * x_new
    check_finite(x_new, "denoised latent")
    check_finite(y_new, "denoised latent")
    return CoupledPair(x_new, y_new)


def edict_invert_step(pair: CoupledPair, t: int, cond, predict_noise: NoisePredictor, params: EdictParams, schedule: NoiseSchedule) -> CoupledPair:
    a, b = schedule.coefficients(t)
    f = pair.dtype.type
    a, b, p, q = f(a), f(b), f(params.p), f(1.0 - params.p)
    x, y = pair.x, pair.y
    y_inter = (y - q * x) / p
    x_inter = (x - q * y_inter) / p
    y_new = (y_inter - b * _eps(predict_noise, x_inter, t, cond)) / a
    x_new = (x_inter - b * _eps(predict_noise, y_new, t, cond)) / a
    check_finite(x_new, "inverted latent")
    check_finite(y_new, "inverted latent")
    return CoupledPair(x_new, y_new)


def _check_depth(depth_steps: int, schedule: NoiseSchedule) -> None:
    if not 1 <= depth_steps <= schedule.T:
        raise ValueError(f"depth must be in [1, {schedule.T}], got {depth_steps}")


def invert_to_depth(pair: CoupledPair, cond, depth_steps: int, predict_noise: NoisePredictor, params: EdictParams, schedule: NoiseSchedule) -> CoupledPair:
    """Noise ``pair`` from step 0 up through the first ``depth_steps`` timesteps."""
    _check_depth(depth_steps, schedule)
    for t in schedule.timesteps[:depth_steps]:
        pair = edict_invert_step(pair, int(t), cond, predict_noise, params, schedule)
    return pair


def denoise_from_depth(pair: CoupledPair, cond, depth_steps: int, predict_noise: NoisePredictor, params: EdictParams, schedule: NoiseSchedule) -> CoupledPair:
    _check_depth(depth_steps, schedule)
    for t in schedule.timesteps[:depth_steps][::-1]:
        pair = edict_denoise_step(pair, int(t), cond, predict_noise, params, schedule)
    return pair


def ddim_sample(latent: np.ndarray, cond, predict_noise: NoisePredictor, schedule: NoiseSchedule) -> np.ndarray:
    """Plain deterministic DDIM from the top timestep down to step 0."""
    f = latent.dtype.type
    x = latent
    for t in schedule.timesteps[::-1]:
        a, b = schedule.coefficients(int(t))
        x = f(a) * x + f(b) * _eps(predict_noise, x, int(t), cond)
        check_finite(x, "sampled latent")
    return x
