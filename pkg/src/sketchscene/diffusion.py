"""Schedule construction, forward noising, the deterministic sampler
step, latent blending, and mask downsampling.

Conventions used throughout the package:

* Latents are float64 arrays of shape ``(C, h, w)``.
* Latent masks are float64 arrays of shape ``(h, w)`` with values in
  ``{0.0, 1.0}``.
* A schedule with ``steps = T`` exposes ``alpha_bar`` of length ``T+1``
  with ``alpha_bar[0] == 1.0`` exactly and ``alpha_bar`` strictly
  decreasing; index ``t`` is the noise level after ``t`` of ``T``
  noising steps.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import MaskError, NumericError, RangeError, ConfigError, ShapeError

BASE_TRAIN_STEPS = 1000
DEFAULT_BETA_START = 0.00085
DEFAULT_BETA_END = 0.012
SCHEDULE_KINDS = ("scaled_linear",)


@dataclass(frozen=True)
class NoiseSchedule:
    """Cumulative signal-retention table for a T-step sampler run.

    ``alpha_bar[t]`` is the cumulative product of per-step retention up
    to level ``t``; ``base_indices[t-1]`` records which row of the
    underlying 1000-step training table level ``t`` was taken from.
    """

    steps: int
    alpha_bar: np.ndarray
    base_indices: np.ndarray

    def signal_coef(self, t: int) -> float:
        return float(np.sqrt(self.alpha_bar[t]))

    def noise_coef(self, t: int) -> float:
        return float(np.sqrt(1.0 - self.alpha_bar[t]))


def make_schedule(
    steps: int,
    kind: str = "scaled_linear",
    beta_start: float = DEFAULT_BETA_START,
    beta_end: float = DEFAULT_BETA_END,
) -> NoiseSchedule:
    """Build a T-step schedule by subsampling the 1000-step training table.

    The training table uses scaled-linear betas (linear in sqrt(beta))
    from ``beta_start`` to ``beta_end``.  Sampling at ``steps < 1000``
    keeps the final (noisiest) row so the terminal level is always deep
    in the noise regime regardless of step count.
    """
    if kind not in SCHEDULE_KINDS:
        raise ConfigError(f"unknown schedule kind: {kind!r}")
    if not isinstance(steps, (int, np.integer)) or isinstance(steps, bool):
        raise ConfigError(f"steps must be an integer, got {steps!r}")
    if not 1 <= steps <= BASE_TRAIN_STEPS:
        raise RangeError(f"steps must be in [1, {BASE_TRAIN_STEPS}], got {steps}")
    if not (0.0 < beta_start < beta_end < 1.0):
        raise ConfigError(
            f"betas must satisfy 0 < beta_start < beta_end < 1, got "
            f"({beta_start}, {beta_end})"
        )

    sqrt_betas = np.linspace(
        np.sqrt(beta_start), np.sqrt(beta_end), BASE_TRAIN_STEPS, dtype=np.float64
    )
    base_bar = np.cumprod(1.0 - sqrt_betas**2)

    # Evenly spaced rows, always including the last; ascending order.
    idx = np.round(np.linspace(BASE_TRAIN_STEPS - 1, 0, steps)).astype(np.int64)[::-1]
    alpha_bar = np.empty(steps + 1, dtype=np.float64)
    alpha_bar[0] = 1.0
    alpha_bar[1:] = base_bar[idx]

    if not np.all(np.diff(alpha_bar) < 0):
        raise ConfigError("schedule is not strictly decreasing")
    if not 0.0 < alpha_bar[steps] <= 0.05:
        raise ConfigError(
            f"terminal retention {alpha_bar[steps]:.6f} outside (0, 0.05]"
        )
    alpha_bar.setflags(write=False)
    idx = idx.copy()
    idx.setflags(write=False)
    return NoiseSchedule(steps=int(steps), alpha_bar=alpha_bar, base_indices=idx)


def _check_latent(z: np.ndarray, name: str) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 3:
        raise ShapeError(f"{name} must be (C, h, w), got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise NumericError(f"{name} contains non-finite values")
    return z


def check_mask(m: np.ndarray, spatial: tuple[int, int] | None = None) -> np.ndarray:
    """Validate a latent mask: 2-D, binary, optionally matching (h, w)."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise MaskError(f"mask must be 2-D, got shape {m.shape}")
    if spatial is not None and m.shape != tuple(spatial):
        raise MaskError(f"mask shape {m.shape} does not match latent {spatial}")
    if not np.all((m == 0.0) | (m == 1.0)):
        raise MaskError("mask values must be exactly 0 or 1")
    return m


def forward_noise(
    schedule: NoiseSchedule, z0: np.ndarray, t: int, eps: np.ndarray
) -> np.ndarray:
    """Noise a clean latent to level ``t``:
    ``sqrt(alpha_bar[t])*z0 + sqrt(1-alpha_bar[t])*eps``.

    ``t = 0`` is the identity map on ``z0``.
    """
    if not 0 <= t <= schedule.steps:
        raise RangeError(f"t must be in [0, {schedule.steps}], got {t}")
    z0 = _check_latent(z0, "z0")
    eps = _check_latent(eps, "eps")
    if z0.shape != eps.shape:
        raise ShapeError(f"z0 shape {z0.shape} != eps shape {eps.shape}")
    return kernels.lincomb(z0, eps, schedule.signal_coef(t), schedule.noise_coef(t))


def sampler_step(
    schedule: NoiseSchedule, z_t: np.ndarray, eps_hat: np.ndarray, t: int
) -> np.ndarray:
    """One deterministic (variance-free) sampler update from level ``t``
    to level ``t-1``.

    Reconstructs the clean estimate
    ``(z_t - sqrt(1-alpha_bar[t])*eps_hat) / sqrt(alpha_bar[t])`` and
    re-noises it to level ``t-1`` with the same predicted noise.
    """
    if not 1 <= t <= schedule.steps:
        raise RangeError(f"t must be in [1, {schedule.steps}], got {t}")
    z_t = _check_latent(z_t, "z_t")
    eps_hat = _check_latent(eps_hat, "eps_hat")
    if z_t.shape != eps_hat.shape:
        raise ShapeError(f"z_t shape {z_t.shape} != eps_hat shape {eps_hat.shape}")
    out = kernels.ddim_step(
        z_t,
        eps_hat,
        schedule.signal_coef(t),
        schedule.noise_coef(t),
        schedule.signal_coef(t - 1),
        schedule.noise_coef(t - 1),
    )
    if not np.all(np.isfinite(out)):
        raise NumericError("sampler step produced non-finite values")
    return out


def blend_latents(
    z_bg: np.ndarray, z_fg: np.ndarray, mask: np.ndarray
) -> np.ndarray:
    """Per-pixel selection: foreground latent where ``mask == 1``, else
    background latent.  Exact (no arithmetic on the selected values).
    """
    z_bg = _check_latent(z_bg, "z_bg")
    z_fg = _check_latent(z_fg, "z_fg")
    if z_bg.shape != z_fg.shape:
        raise ShapeError(f"z_bg shape {z_bg.shape} != z_fg shape {z_fg.shape}")
    mask = check_mask(mask, z_bg.shape[1:])
    return kernels.where_blend(z_bg, z_fg, mask)


def downsample_mask(mask: np.ndarray, factor: int) -> np.ndarray:
    """Downsample a binary pixel mask to latent resolution.

    Each ``factor x factor`` block maps to 1 when at least half of its
    pixels are 1 (ties round to 1), else 0.  Output is binary.  The
    half-coverage test is done on exact pixel counts, so ties behave
    correctly for every factor.
    """
    mask = np.asarray(mask, dtype=np.float64)
    if mask.ndim != 2:
        raise MaskError(f"mask must be 2-D, got shape {mask.shape}")
    if not np.all((mask == 0.0) | (mask == 1.0)):
        raise MaskError("mask values must be exactly 0 or 1")
    factor = int(factor)
    if factor < 1:
        raise RangeError(f"factor must be >= 1, got {factor}")
    if mask.shape[0] % factor or mask.shape[1] % factor:
        raise ShapeError(
            f"mask shape {mask.shape} not divisible by factor {factor}"
        )
    # Block sums of a {0,1} mask are small integers, exact in float64;
    # rint undoes the mean's rounded 1/f^2 scaling.
    counts = np.rint(kernels.block_mean_2d(mask, factor) * (factor * factor))
    return np.where(2.0 * counts >= factor * factor, 1.0, 0.0)


def initial_noise(shape: tuple[int, ...], seed: int) -> np.ndarray:
    """The run's starting latent: standard normal from a fresh
    ``default_rng(seed)`` stream."""
    return np.random.default_rng(int(seed)).standard_normal(shape)


def step_noise_seed(seed: int, t: int) -> int:
    """Stable per-level seed for the foreground forward-noise draws."""
    digest = hashlib.sha256(f"{int(seed)}|fg-noise|{int(t)}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def step_noise(shape: tuple[int, ...], seed: int, t: int) -> np.ndarray:
    """Foreground noise draw for level ``t``, independent per level."""
    return np.random.default_rng(step_noise_seed(seed, t)).standard_normal(shape)
