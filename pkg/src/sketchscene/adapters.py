"""External-tool adapters for object generation.

Two tool roles: a *generator* turns a square sketch crop plus a prompt
into an RGB image; a *segmenter* extracts the object's binary mask from
that image.  Production deployments wire these to real services over
HTTP; desk runs use the deterministic stubs; recorded fixtures replay
byte-exact responses without any tool present.
"""

from __future__ import annotations

import base64
import hashlib
import json
from pathlib import Path
from typing import Protocol

import httpx
import numpy as np

from . import pngio
from .errors import (
    AdapterConnectivityError,
    AdapterContractError,
    ShapeError,
)


class GeneratorAdapter(Protocol):
    def generate(self, sketch: np.ndarray, prompt: str, seed: int) -> np.ndarray:
        """(G, G) uint8 sketch + prompt + seed -> (G, G, 3) uint8 image."""
        ...


class SegmenterAdapter(Protocol):
    def segment(self, image: np.ndarray, class_label: str) -> np.ndarray:
        """(G, G, 3) uint8 image -> (G, G) float binary mask."""
        ...


def _check_sketch(sketch: np.ndarray) -> np.ndarray:
    sketch = np.asarray(sketch)
    if sketch.ndim != 2 or sketch.dtype != np.uint8:
        raise ShapeError(f"sketch must be (G, G) uint8, got {sketch.shape} {sketch.dtype}")
    return sketch


def _check_image(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise ShapeError(f"image must be (G, G, 3) uint8, got {image.shape} {image.dtype}")
    return image


# ---------------------------------------------------------------------------
# deterministic stubs
# ---------------------------------------------------------------------------

class StubGenerator:
    """Paints the sketch's ink with a prompt+seed-derived dark colour on
    a white ground.  Deterministic, and dark-on-light by construction so
    the stub segmenter can recover the silhouette."""

    def generate(self, sketch: np.ndarray, prompt: str, seed: int) -> np.ndarray:
        sketch = _check_sketch(sketch)
        digest = hashlib.sha256(f"stub-gen\x1f{prompt}\x1f{int(seed)}".encode()).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
        colour = rng.integers(0, 112, size=3, dtype=np.int64)
        ink = sketch < 128
        out = np.full((*sketch.shape, 3), 255, dtype=np.uint8)
        out[ink] = colour.astype(np.uint8)
        return out


class StubSegmenter:
    """Thresholds darkness: pixels with luma < 128 belong to the object."""

    def segment(self, image: np.ndarray, class_label: str) -> np.ndarray:
        image = _check_image(image)
        luma = image.astype(np.float64).mean(axis=2)
        return (luma < 128.0).astype(np.float64)


# ---------------------------------------------------------------------------
# record / replay
# ---------------------------------------------------------------------------

def _request_key(kind: str, payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(f"{kind}\x1f".encode() + blob).hexdigest()


class RecordingGenerator:
    """Wraps a generator, saving every response under a request-keyed
    file so later runs can replay without the tool."""

    def __init__(self, inner: GeneratorAdapter, directory: str | Path):
        self.inner = inner
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def generate(self, sketch, prompt, seed):
        image = self.inner.generate(sketch, prompt, seed)
        key = _request_key(
            "generate",
            {"sketch": pngio.to_png_bytes(sketch).hex(), "prompt": prompt, "seed": seed},
        )
        (self.directory / f"{key}.png").write_bytes(pngio.to_png_bytes(image))
        return image


class ReplayGenerator:
    """Serves recorded responses; unknown requests fail loudly."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    def generate(self, sketch, prompt, seed):
        key = _request_key(
            "generate",
            {"sketch": pngio.to_png_bytes(_check_sketch(sketch)).hex(),
             "prompt": prompt, "seed": seed},
        )
        path = self.directory / f"{key}.png"
        if not path.exists():
            raise AdapterConnectivityError(
                f"no recorded generator response for key {key[:12]}..."
            )
        return pngio.from_png_bytes(path.read_bytes(), "RGB")


# ---------------------------------------------------------------------------
# HTTP wire clients
# ---------------------------------------------------------------------------

class HttpGenerator:
    """POST {prompt, seed, sketch_png_b64} to ``/generate``, expect
    {image_png_b64} back."""

    def __init__(self, base_url: str, timeout: float = 30.0, client: httpx.Client | None = None):
        self.client = client or httpx.Client(base_url=base_url, timeout=timeout)

    def generate(self, sketch, prompt, seed):
        sketch = _check_sketch(sketch)
        payload = {
            "prompt": prompt,
            "seed": int(seed),
            "sketch_png_b64": base64.b64encode(pngio.to_png_bytes(sketch)).decode(),
        }
        try:
            resp = self.client.post("/generate", json=payload)
        except httpx.HTTPError as exc:
            raise AdapterConnectivityError(f"generator unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise AdapterContractError(
                f"generator returned HTTP {resp.status_code}: {resp.text[:200]}"
            )
        try:
            image = pngio.from_png_bytes(
                base64.b64decode(resp.json()["image_png_b64"]), "RGB"
            )
        except Exception as exc:
            raise AdapterContractError(f"malformed generator reply: {exc}") from exc
        if image.shape[:2] != sketch.shape:
            raise AdapterContractError(
                f"generator returned {image.shape[:2]}, expected {sketch.shape}"
            )
        return image


class HttpSegmenter:
    """POST {class_label, image_png_b64} to ``/segment``, expect
    {mask_png_b64} back (0/255 PNG)."""

    def __init__(self, base_url: str, timeout: float = 30.0, client: httpx.Client | None = None):
        self.client = client or httpx.Client(base_url=base_url, timeout=timeout)

    def segment(self, image, class_label):
        image = _check_image(image)
        payload = {
            "class_label": class_label,
            "image_png_b64": base64.b64encode(pngio.to_png_bytes(image)).decode(),
        }
        try:
            resp = self.client.post("/segment", json=payload)
        except httpx.HTTPError as exc:
            raise AdapterConnectivityError(f"segmenter unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise AdapterContractError(
                f"segmenter returned HTTP {resp.status_code}: {resp.text[:200]}"
            )
        try:
            mask_img = pngio.from_png_bytes(
                base64.b64decode(resp.json()["mask_png_b64"]), "L"
            )
        except Exception as exc:
            raise AdapterContractError(f"malformed segmenter reply: {exc}") from exc
        if mask_img.shape != image.shape[:2]:
            raise AdapterContractError(
                f"segmenter returned {mask_img.shape}, expected {image.shape[:2]}"
            )
        return (mask_img >= 128).astype(np.float64)
