"""Denoiser backends: capability profiles, prompt encoding with identity
slots, and the analytic toy backend used for desk-scale runs and tests.

The toy backend predicts noise with a fixed affine map

    eps_hat = A * z + b_text + sum_s P_s @ v_s

where ``A`` is a profile-derived positive diagonal, ``b_text`` is a
hash-seeded offset determined by the prompt's token ids, and each
identity slot contributes through a fixed hash-seeded linear projection
``P_s`` of its embedding vector ``v_s``.  The prediction is level-
independent and affine in both the latent and the slot vectors, so
whole sampling runs and training gradients can be checked against
scalar references and finite differences.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (
    BindingError,
    CapabilityError,
    NumericError,
    RangeError,
    ShapeError,
    TokenizationError,
)

IDENTITY_TOKEN_RE = re.compile(r"^<[a-z0-9][a-z0-9_.-]*>$")
_WORD_TRIM = ".,!?;:\"'()"

# Toy affine-map constants (fixed; tests pin behaviour against them).
TOY_DIAG_LOW = 0.05
TOY_DIAG_HIGH = 0.3
TOY_TEXT_OFFSET_SCALE = 0.35
TOY_SLOT_PROJECTION_SCALE = 1.0


@dataclass(frozen=True, slots=True)
class BackendProfile:
    """Static capabilities of a denoiser backend."""

    name: str
    latent_channels: int
    downsample_factor: int
    embedding_dim: int
    max_prompt_tokens: int
    supports_identity_training: bool

    def latent_shape(self, width: int, height: int) -> tuple[int, int, int]:
        f = self.downsample_factor
        if width < f or height < f or width % f or height % f:
            raise ShapeError(
                f"image {width}x{height} not divisible by latent factor {f}"
            )
        return (self.latent_channels, height // f, width // f)

    def to_document(self) -> dict:
        return {
            "name": self.name,
            "latent_channels": self.latent_channels,
            "downsample_factor": self.downsample_factor,
            "embedding_dim": self.embedding_dim,
            "max_prompt_tokens": self.max_prompt_tokens,
            "supports_identity_training": self.supports_identity_training,
        }


TOY_PROFILE = BackendProfile(
    name="toy",
    latent_channels=2,
    downsample_factor=2,
    embedding_dim=8,
    max_prompt_tokens=77,
    supports_identity_training=True,
)

SD_PROFILE = BackendProfile(
    name="sd15",
    latent_channels=4,
    downsample_factor=8,
    embedding_dim=768,
    max_prompt_tokens=77,
    supports_identity_training=False,
)

PROFILES = {p.name: p for p in (TOY_PROFILE, SD_PROFILE)}


@dataclass(frozen=True, slots=True)
class SlotBinding:
    """An identity token occurrence inside a prompt."""

    position: int
    token: str
    vector: np.ndarray


@dataclass(frozen=True, slots=True)
class PromptEncoding:
    """Tokenized prompt with resolved identity-slot vectors."""

    text: str
    tokens: tuple[str, ...]
    token_ids: tuple[int, ...]
    slots: tuple[SlotBinding, ...] = field(default=())


def _stable_seed(*parts) -> int:
    joined = "\x1f".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(joined.encode()).digest()[:8], "big")


def is_identity_token(token: str) -> bool:
    return bool(IDENTITY_TOKEN_RE.match(token))


def tokenize(text: str) -> list[str]:
    """Whitespace tokenizer: plain words are lowercased and stripped of
    surrounding punctuation; ``<name>`` identity tokens pass through
    verbatim (and must be well-formed)."""
    tokens: list[str] = []
    for raw in text.split():
        if raw.startswith("<") or raw.endswith(">"):
            if not is_identity_token(raw):
                raise TokenizationError(f"malformed identity token {raw!r}")
            tokens.append(raw)
            continue
        word = raw.strip(_WORD_TRIM).lower()
        if word:
            tokens.append(word)
    return tokens


def token_id(token: str) -> int:
    """Stable 31-bit id (vocabulary-free hashing)."""
    digest = hashlib.sha256(b"tok\x1f" + token.encode()).digest()
    return int.from_bytes(digest[:4], "big") & 0x7FFFFFFF


class ToyBackend:
    """Analytic latent-diffusion stand-in. All behaviour is a pure
    function of (profile, shapes, prompt tokens, slot vectors)."""

    def __init__(self, profile: BackendProfile = TOY_PROFILE):
        if profile.latent_channels != 2:
            raise ShapeError("toy backend requires exactly 2 latent channels")
        self.profile = profile

    # -- prompt encoding ----------------------------------------------------

    def embed_token(self, token: str) -> np.ndarray:
        """Deterministic unit-scale embedding; used to seed identity
        vectors from a class word."""
        seed = _stable_seed("toy-embed", self.profile.name, self.profile.embedding_dim, token)
        return np.random.default_rng(seed).standard_normal(self.profile.embedding_dim)

    def encode_prompt(
        self, text: str, bindings: dict[str, np.ndarray] | None = None
    ) -> PromptEncoding:
        """Tokenize and resolve identity slots against ``bindings``.

        Every ``<name>`` token must have a bound vector of the profile's
        embedding dimension.
        """
        bindings = bindings or {}
        tokens = tokenize(text)
        if len(tokens) > self.profile.max_prompt_tokens:
            raise TokenizationError(
                f"prompt has {len(tokens)} tokens, max is "
                f"{self.profile.max_prompt_tokens}"
            )
        slots = []
        for pos, tok in enumerate(tokens):
            if not is_identity_token(tok):
                continue
            if tok not in bindings:
                raise BindingError(f"identity token {tok!r} has no bound vector")
            vec = np.asarray(bindings[tok], dtype=np.float64)
            if vec.shape != (self.profile.embedding_dim,):
                raise ShapeError(
                    f"binding for {tok!r} has shape {vec.shape}, expected "
                    f"({self.profile.embedding_dim},)"
                )
            if not np.all(np.isfinite(vec)):
                raise NumericError(f"binding for {tok!r} is not finite")
            vec = vec.copy()
            vec.setflags(write=False)
            slots.append(SlotBinding(position=pos, token=tok, vector=vec))
        return PromptEncoding(
            text=text,
            tokens=tuple(tokens),
            token_ids=tuple(token_id(t) for t in tokens),
            slots=tuple(slots),
        )

    # -- affine denoiser ----------------------------------------------------

    def _check_latent_shape(self, z: np.ndarray) -> tuple[int, int, int]:
        z = np.asarray(z)
        if z.ndim != 3 or z.shape[0] != self.profile.latent_channels:
            raise ShapeError(
                f"latent must be ({self.profile.latent_channels}, h, w), "
                f"got {z.shape}"
            )
        return z.shape

    def a_diag(self, shape: tuple[int, int, int]) -> np.ndarray:
        """Fixed positive diagonal of the affine map for this geometry."""
        seed = _stable_seed("toy-a", self.profile.name, *shape)
        return np.random.default_rng(seed).uniform(TOY_DIAG_LOW, TOY_DIAG_HIGH, shape)

    def text_offset(self, enc: PromptEncoding, shape: tuple[int, int, int]) -> np.ndarray:
        """Prompt-text part of the offset (slot vectors do not enter)."""
        slot_positions = tuple(s.position for s in enc.slots)
        seed = _stable_seed(
            "toy-text", self.profile.name, *shape, enc.token_ids, slot_positions
        )
        return np.random.default_rng(seed).normal(
            0.0, TOY_TEXT_OFFSET_SCALE, shape
        )

    def slot_projection(self, token: str, shape: tuple[int, int, int]) -> np.ndarray:
        """Fixed projection (dim, C, h, w) carrying a slot vector into
        latent space; owned by the token, independent of position."""
        seed = _stable_seed("toy-proj", self.profile.name, *shape, token)
        return np.random.default_rng(seed).normal(
            0.0, TOY_SLOT_PROJECTION_SCALE, (self.profile.embedding_dim, *shape)
        )

    def cond_offset(self, enc: PromptEncoding, shape: tuple[int, int, int]) -> np.ndarray:
        """Full conditioning offset: text part plus projected slots."""
        b = self.text_offset(enc, shape)
        for slot in enc.slots:
            b = b + np.tensordot(slot.vector, self.slot_projection(slot.token, shape), axes=1)
        return b

    def predict_noise(self, z: np.ndarray, t: int, enc: PromptEncoding) -> np.ndarray:
        """``A*z + cond_offset``; level-independent by design so whole
        runs stay analytically checkable."""
        shape = self._check_latent_shape(z)
        if not isinstance(t, (int, np.integer)) or isinstance(t, bool) or t < 0:
            raise RangeError(f"t must be a non-negative integer, got {t!r}")
        if not np.all(np.isfinite(z)):
            raise NumericError("latent contains non-finite values")
        return kernels.mul_add(self.a_diag(shape), np.asarray(z, dtype=np.float64),
                               self.cond_offset(enc, shape))

    # -- latent codec ---------------------------------------------------------

    def encode_image(self, image: np.ndarray) -> np.ndarray:
        """Image (H, W, 3) uint8 -> latent (2, H/f, W/f).

        Channel 0 holds block means of normalized luma (r+g+b)/3,
        channel 1 block means of the normalized (r-b)/2 opponent
        difference.
        """
        image = np.asarray(image)
        if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
            raise ShapeError(f"image must be (H, W, 3) uint8, got {image.shape} {image.dtype}")
        f = self.profile.downsample_factor
        if image.shape[0] % f or image.shape[1] % f:
            raise ShapeError(
                f"image {image.shape[:2]} not divisible by latent factor {f}"
            )
        v = image.astype(np.float64) / 127.5 - 1.0
        luma = (v[:, :, 0] + v[:, :, 1] + v[:, :, 2]) / 3.0
        diff = (v[:, :, 0] - v[:, :, 2]) / 2.0
        planes = np.stack([luma, diff])
        return kernels.block_mean_3d(planes, f)

    def decode_latent(self, z: np.ndarray) -> np.ndarray:
        """Latent (2, h, w) -> image (h*f, w*f, 3) uint8 (nearest
        upsample, inverse colour transform, clip to byte range)."""
        shape = self._check_latent_shape(z)
        z = np.asarray(z, dtype=np.float64)
        if not np.all(np.isfinite(z)):
            raise NumericError("latent contains non-finite values")
        up = kernels.upsample_nn_3d(z, self.profile.downsample_factor)
        luma, diff = up[0], up[1]
        rgb = np.stack([luma + diff, luma, luma - diff], axis=-1)
        return np.clip(np.rint((rgb + 1.0) * 127.5), 0.0, 255.0).astype(np.uint8)

    def latent_shape(self, width: int, height: int) -> tuple[int, int, int]:
        return self.profile.latent_shape(width, height)


def require_identity_training(profile: BackendProfile) -> None:
    if not profile.supports_identity_training:
        raise CapabilityError(
            f"backend {profile.name!r} cannot train identity embeddings"
        )
