"""Scene-level synthesis: prompt pair construction and the two-phase
deterministic sampling loop.

The loop runs levels ``t = T .. 1``; each iteration produces the level
``t-1`` latent.  While ``t > alpha * T`` (evaluated in float64) the
update denoises with the *background* prompt and pastes a forward-
noised copy of the composite-guide latent inside the union mask; at and
below the boundary it denoises with the *global* prompt over the whole
canvas.  ``alpha = 1`` therefore never blends (plain global-prompt
sampling) and ``alpha = 0`` blends at every level.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import diffusion
from .backend import PromptEncoding, ToyBackend
from .diffusion import NoiseSchedule
from .errors import RangeError, ShapeError
from .model import SceneSpec, SWEEP_PRESET

# Leading location prepositions dropped when turning the background
# phrase into a standalone prompt ("in a room" -> "a photo of a room").
_LEADING_PREPOSITIONS = {
    "in", "on", "at", "inside", "within", "under", "beneath", "near",
    "by", "beside", "among", "amid", "around", "against", "atop",
}


@dataclass(frozen=True, slots=True)
class PromptPair:
    """Global prompt (objects + background) and background-only prompt."""

    global_text: str
    background_text: str

    def to_document(self) -> dict:
        return {"global": self.global_text, "background": self.background_text}


def background_prompt(background_text: str) -> str:
    words = background_text.strip().split()
    if words and words[0].lower() in _LEADING_PREPOSITIONS:
        words = words[1:]
    phrase = " ".join(words)
    return f"a photo of {phrase}" if phrase else "a photo"


def build_prompt_pair(
    scene: SceneSpec, identity_tokens: dict[str, str] | None = None
) -> PromptPair:
    """Build the prompt pair for a scene.

    ``identity_tokens`` maps object_id -> slot token for objects with a
    trained identity; everything else is described by its class label.
    The global prompt lists objects in paint order joined by "and",
    with a single leading article, followed by the background phrase.
    """
    identity_tokens = identity_tokens or {}
    descriptors = [
        identity_tokens.get(ann.object_id, ann.class_label.strip().lower())
        for ann in scene.objects
    ]
    bg = scene.background_text.strip()
    if descriptors:
        global_text = f"a photo of a {' and '.join(descriptors)} {bg}".strip()
    else:
        global_text = background_prompt(bg)
    return PromptPair(global_text=global_text, background_text=background_prompt(bg))


@dataclass(frozen=True, slots=True)
class StepRecord:
    """What one loop iteration did (for tests and tracing)."""

    t: int
    phase: str  # "blended" | "global"
    z_bg: np.ndarray | None
    z_fg: np.ndarray | None
    z_out: np.ndarray


StepHook = Callable[[StepRecord], None]


def blended_levels(steps: int, alpha: float) -> list[int]:
    """Levels whose iteration blends, i.e. every t with t > alpha*steps."""
    return [t for t in range(steps, 0, -1) if t > alpha * steps]


def infer_scene_latent(
    toy: ToyBackend,
    schedule: NoiseSchedule,
    z_start: np.ndarray,
    z_init: np.ndarray,
    m_init: np.ndarray,
    enc_global: PromptEncoding,
    enc_background: PromptEncoding,
    alpha: float,
    seed: int,
    on_step: StepHook | None = None,
) -> np.ndarray:
    """Run the two-phase loop from the starting noise down to level 0."""
    if not 0.0 <= float(alpha) <= 1.0:
        raise RangeError(f"alpha must be in [0, 1], got {alpha}")
    z_start = np.asarray(z_start, dtype=np.float64)
    z_init = np.asarray(z_init, dtype=np.float64)
    if z_start.shape != z_init.shape:
        raise ShapeError(
            f"start latent {z_start.shape} != guide latent {z_init.shape}"
        )
    m_init = diffusion.check_mask(m_init, z_start.shape[1:])
    alpha = float(alpha)
    steps = schedule.steps

    z = z_start
    for t in range(steps, 0, -1):
        if t > alpha * steps:
            eps_bg = toy.predict_noise(z, t, enc_background)
            z_bg = diffusion.sampler_step(schedule, z, eps_bg, t)
            eps_fg = diffusion.step_noise(z_init.shape, seed, t - 1)
            z_fg = diffusion.forward_noise(schedule, z_init, t - 1, eps_fg)
            z = diffusion.blend_latents(z_bg, z_fg, m_init)
            if on_step is not None:
                on_step(StepRecord(t=t, phase="blended", z_bg=z_bg, z_fg=z_fg, z_out=z))
        else:
            eps_g = toy.predict_noise(z, t, enc_global)
            z = diffusion.sampler_step(schedule, z, eps_g, t)
            if on_step is not None:
                on_step(StepRecord(t=t, phase="global", z_bg=None, z_fg=None, z_out=z))
    return z


def sample_plain(
    toy: ToyBackend,
    schedule: NoiseSchedule,
    z_start: np.ndarray,
    enc: PromptEncoding,
) -> np.ndarray:
    """Vanilla prompt-conditioned sampling (no guide, no blending)."""
    z = np.asarray(z_start, dtype=np.float64)
    for t in range(schedule.steps, 0, -1):
        z = diffusion.sampler_step(schedule, z, toy.predict_noise(z, t, enc), t)
    return z


def sweep_alphas(alphas) -> list[float]:
    """Validate and normalize a sweep list (defaults to the preset)."""
    alphas = list(SWEEP_PRESET) if alphas is None else [float(a) for a in alphas]
    if not alphas:
        raise RangeError("alpha sweep is empty")
    for a in alphas:
        if not 0.0 <= a <= 1.0:
            raise RangeError(f"sweep alpha {a} outside [0, 1]")
    return alphas


# ---------------------------------------------------------------------------
# output diagnostics
# ---------------------------------------------------------------------------

def _luma(image: np.ndarray) -> np.ndarray:
    return image.astype(np.float64).mean(axis=2)


def diagnostics(rendered: np.ndarray, guide_image: np.ndarray, guide_mask: np.ndarray) -> dict:
    """Foreground fidelity (mean |rendered - guide| inside the mask,
    normalized to [0, 1]) and seam score (mean luma jump across the mask
    boundary, normalized to [0, 1])."""
    if rendered.shape != guide_image.shape:
        raise ShapeError(
            f"rendered {rendered.shape} != guide {guide_image.shape}"
        )
    mask = guide_mask != 0.0
    if mask.any():
        diff = np.abs(rendered.astype(np.float64) - guide_image.astype(np.float64))
        fidelity = float(diff[mask].mean() / 255.0)
    else:
        fidelity = 0.0

    luma = _luma(rendered)
    inner = mask & ~_erode4(mask)
    seam_vals = []
    h, w = mask.shape
    ys, xs = np.nonzero(inner)
    for y, x in zip(ys, xs):
        for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ny, nx = y + dy, x + dx
            if 0 <= ny < h and 0 <= nx < w and not mask[ny, nx]:
                seam_vals.append(abs(luma[y, x] - luma[ny, nx]))
    seam = float(np.mean(seam_vals) / 255.0) if seam_vals else 0.0
    return {"fg_fidelity": fidelity, "seam_score": seam}


def _erode4(mask: np.ndarray) -> np.ndarray:
    out = mask.copy()
    out[1:] &= mask[:-1]
    out[:-1] &= mask[1:]
    out[:, 1:] &= mask[:, :-1]
    out[:, :-1] &= mask[:, 1:]
    return out
