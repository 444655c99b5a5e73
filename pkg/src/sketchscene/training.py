"""Identity capture: learn a per-object embedding vector by minimizing
a masked noise-prediction loss on the object's own latent.

The loss for one draw ``(t, eps)`` is the mean over ALL latent elements
of ``((eps - eps_hat) * mask)**2`` — out-of-mask elements contribute
zeros rather than being dropped, so a full mask reduces the loss to the
plain noise-prediction MSE.  With the toy backend the prediction is
affine in the slot vector, making the loss an exactly quadratic
function with a closed-form gradient."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import diffusion, kernels
from .backend import ToyBackend, require_identity_training
from .diffusion import NoiseSchedule
from .errors import ConfigError, MaskError, ShapeError


@dataclass(frozen=True, slots=True)
class TrainConfig:
    """Settings for one identity-training run."""

    steps: int = 50
    lr: float = 0.02
    seed: int = 0
    window: int = 10

    def validate(self) -> None:
        if not isinstance(self.steps, int) or isinstance(self.steps, bool) or self.steps < 0:
            raise ConfigError(f"steps must be a non-negative int, got {self.steps!r}")
        if not self.lr > 0:
            raise ConfigError(f"lr must be positive, got {self.lr!r}")
        if not isinstance(self.window, int) or self.window < 1:
            raise ConfigError(f"window must be a positive int, got {self.window!r}")

    def to_document(self) -> dict:
        return {"steps": self.steps, "lr": self.lr, "seed": self.seed,
                "window": self.window}


@dataclass(slots=True)
class IdentityEmbedding:
    """A trained (or freshly initialized) identity vector for one token."""

    token: str
    class_label: str
    vector: np.ndarray
    steps_trained: int = 0

    def to_document(self) -> dict:
        return {
            "token": self.token,
            "class_label": self.class_label,
            "vector": [float(v) for v in self.vector],
            "steps_trained": self.steps_trained,
        }

    @staticmethod
    def from_document(doc: dict) -> "IdentityEmbedding":
        return IdentityEmbedding(
            token=doc["token"],
            class_label=doc["class_label"],
            vector=np.asarray(doc["vector"], dtype=np.float64),
            steps_trained=int(doc["steps_trained"]),
        )


@dataclass(slots=True)
class TrainingTrace:
    """Per-step losses plus running window means."""

    losses: list[float] = field(default_factory=list)
    window: int = 10

    def window_means(self) -> list[float]:
        n = len(self.losses) // self.window
        return [
            float(np.mean(self.losses[k * self.window : (k + 1) * self.window]))
            for k in range(n)
        ]

    def windows_strictly_decreasing(self) -> bool:
        means = self.window_means()
        return all(b < a for a, b in zip(means, means[1:]))


def masked_loss(eps: np.ndarray, eps_hat: np.ndarray, mask: np.ndarray) -> float:
    """Mean over all latent elements of the squared masked residual."""
    eps = np.asarray(eps, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    if eps.shape != eps_hat.shape:
        raise ShapeError(f"eps shape {eps.shape} != eps_hat shape {eps_hat.shape}")
    if eps.ndim != 3:
        raise ShapeError(f"latents must be (C, h, w), got {eps.shape}")
    mask = diffusion.check_mask(mask, eps.shape[1:])
    return float(np.mean(kernels.masked_sq_residual(eps, eps_hat, mask)))


def loss_and_grad(
    toy: ToyBackend,
    schedule: NoiseSchedule,
    z0: np.ndarray,
    mask: np.ndarray,
    token: str,
    vector: np.ndarray,
    prompt_text: str,
    t: int,
    eps: np.ndarray,
) -> tuple[float, np.ndarray]:
    """Loss and its exact gradient w.r.t. the slot vector for one draw."""
    enc = toy.encode_prompt(prompt_text, {token: vector})
    if not any(s.token == token for s in enc.slots):
        raise ConfigError(f"prompt {prompt_text!r} does not mention {token!r}")
    z_t = diffusion.forward_noise(schedule, z0, t, eps)
    eps_hat = toy.predict_noise(z_t, t, enc)
    mask = diffusion.check_mask(mask, z0.shape[1:])
    residual = (eps - eps_hat) * mask[None, :, :]
    loss = float(np.mean(kernels.masked_sq_residual(eps, eps_hat, mask)))
    proj = toy.slot_projection(token, z0.shape)
    grad = (-2.0 / eps.size) * np.tensordot(proj, residual, axes=3)
    return loss, grad


def identity_prompt(token: str) -> str:
    """The training prompt for one object identity."""
    return f"a photo of a {token}"


def init_identity(toy: ToyBackend, token: str, class_label: str) -> IdentityEmbedding:
    """Start from the class word's embedding (so an untrained identity
    behaves like its class)."""
    return IdentityEmbedding(
        token=token,
        class_label=class_label,
        vector=toy.embed_token(class_label.strip().lower()),
        steps_trained=0,
    )


def train_identity(
    toy: ToyBackend,
    schedule: NoiseSchedule,
    z0: np.ndarray,
    mask: np.ndarray,
    token: str,
    class_label: str,
    cfg: TrainConfig = TrainConfig(),
) -> tuple[IdentityEmbedding, TrainingTrace]:
    """SGD on the masked loss: each step draws a level ``t`` uniform on
    [1, T] and fresh Gaussian noise, then moves the slot vector along
    the exact gradient."""
    cfg.validate()
    if cfg.steps > 0:
        require_identity_training(toy.profile)
    if mask is not None and not np.any(np.asarray(mask) == 1.0):
        raise MaskError("training mask is empty")
    ident = init_identity(toy, token, class_label)
    trace = TrainingTrace(window=cfg.window)
    prompt = identity_prompt(token)
    rng = np.random.default_rng(int(cfg.seed))
    v = ident.vector.copy()
    for _ in range(cfg.steps):
        t = int(rng.integers(1, schedule.steps + 1))
        eps = rng.standard_normal(z0.shape)
        loss, grad = loss_and_grad(
            toy, schedule, z0, mask, token, v, prompt, t, eps
        )
        trace.losses.append(loss)
        v = v - cfg.lr * grad
    ident.vector = v
    ident.steps_trained = cfg.steps
    return ident, trace
