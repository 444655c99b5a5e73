"""Object-level generation: crop a sketched box to the generator canvas,
run the generator/segmenter pair, clean the mask, and keep the exact
geometry needed to place results back on the scene canvas.

The crop uses the largest integer nearest-neighbour upscale that fits,
centered with white padding, so placing back is an exact subsampling:
``placed[i, j] == content[i * scale, j * scale]``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import model
from .adapters import GeneratorAdapter, SegmenterAdapter
from .errors import (
    EmptyMaskError,
    ObjectGenerationError,
    PlacementError,
    RangeError,
    ShapeError,
)

DEFAULT_OBJECT_CANVAS = 64
DEFAULT_MAX_RETRIES = 1


@dataclass(frozen=True, slots=True)
class CropGeometry:
    """How a scene box was mapped onto the square object canvas."""

    box: model.Box
    canvas: int
    scale: int
    pad_left: int
    pad_top: int

    @property
    def content_width(self) -> int:
        return self.box.width * self.scale

    @property
    def content_height(self) -> int:
        return self.box.height * self.scale

    def to_document(self) -> dict:
        return {
            "box": {
                "left": self.box.left,
                "top": self.box.top,
                "width": self.box.width,
                "height": self.box.height,
            },
            "canvas": self.canvas,
            "scale": self.scale,
            "pad_left": self.pad_left,
            "pad_top": self.pad_top,
        }


@dataclass(slots=True)
class ObjectAsset:
    """One generated object: image + binary mask on the object canvas."""

    object_id: str
    class_label: str
    prompt: str
    seed: int
    attempts: int
    geometry: CropGeometry
    image: np.ndarray
    mask: np.ndarray


def object_seed(scene_seed: int, object_id: str) -> int:
    """Per-object seed: scene seed plus a stable id-derived offset."""
    digest = hashlib.sha256(object_id.encode()).digest()
    return (int(scene_seed) + int.from_bytes(digest[:4], "big")) % (2**31)


def default_prompt(class_label: str) -> str:
    return f"a photo of a {class_label.strip()}"


def crop_object_sketch(
    sketch: np.ndarray, box: model.Box, canvas: int = DEFAULT_OBJECT_CANVAS
) -> tuple[np.ndarray, CropGeometry]:
    """Cut the box from the sketch and letterbox it onto a white square.

    The box content is upscaled by the largest integer factor that fits
    ``canvas`` and centered; the returned geometry makes the mapping
    invertible via :func:`place_back`.
    """
    sketch = np.asarray(sketch)
    if sketch.ndim != 2 or sketch.dtype != np.uint8:
        raise ShapeError(f"sketch must be (H, W) uint8, got {sketch.shape} {sketch.dtype}")
    if canvas < 1:
        raise RangeError(f"canvas must be positive, got {canvas}")
    if box.width < 1 or box.height < 1:
        raise PlacementError(f"box {box.width}x{box.height} has no area")
    if box.left < 0 or box.top < 0 or box.right > sketch.shape[1] or box.bottom > sketch.shape[0]:
        raise PlacementError(
            f"box [{box.left},{box.top},{box.width},{box.height}] leaves the sketch"
        )
    scale = min(canvas // box.width, canvas // box.height)
    if scale < 1:
        raise PlacementError(
            f"box {box.width}x{box.height} does not fit the {canvas}px object canvas"
        )
    content = sketch[box.top : box.bottom, box.left : box.right]
    content = np.repeat(np.repeat(content, scale, axis=0), scale, axis=1)
    out = np.full((canvas, canvas), 255, dtype=np.uint8)
    pad_top = (canvas - content.shape[0]) // 2
    pad_left = (canvas - content.shape[1]) // 2
    out[pad_top : pad_top + content.shape[0], pad_left : pad_left + content.shape[1]] = content
    return out, CropGeometry(
        box=box, canvas=canvas, scale=scale, pad_left=pad_left, pad_top=pad_top
    )


def place_back(array: np.ndarray, geometry: CropGeometry) -> np.ndarray:
    """Map an object-canvas array back to box resolution by exact
    subsampling of the content region (works for 2-D masks/sketches and
    HW3 images)."""
    array = np.asarray(array)
    if array.shape[0] != geometry.canvas or array.shape[1] != geometry.canvas:
        raise ShapeError(
            f"array {array.shape[:2]} does not match object canvas {geometry.canvas}"
        )
    n = geometry.scale
    content = array[
        geometry.pad_top : geometry.pad_top + geometry.content_height,
        geometry.pad_left : geometry.pad_left + geometry.content_width,
    ]
    return content[::n, ::n].copy()


def clean_mask(mask: np.ndarray) -> np.ndarray:
    """Keep the largest connected component and fill its holes; returns
    a binary float mask (all zeros when the input has no foreground)."""
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ShapeError(f"mask must be 2-D, got {mask.shape}")
    binary = mask != 0
    if not binary.any():
        return np.zeros(mask.shape, dtype=np.float64)
    labels, count = ndimage.label(binary)
    if count > 1:
        sizes = ndimage.sum_labels(binary, labels, index=np.arange(1, count + 1))
        binary = labels == (int(np.argmax(sizes)) + 1)
    binary = ndimage.binary_fill_holes(binary)
    return binary.astype(np.float64)


def generate_object(
    sketch: np.ndarray,
    annotation: model.ObjectAnnotation,
    generator: GeneratorAdapter,
    segmenter: SegmenterAdapter,
    scene_seed: int = 0,
    canvas: int = DEFAULT_OBJECT_CANVAS,
    max_retries: int = DEFAULT_MAX_RETRIES,
) -> ObjectAsset:
    """Run the crop -> generate -> segment -> clean pipeline for one
    annotation.  An empty cleaned mask triggers a reseeded retry; when
    retries are exhausted the failure names the object."""
    crop, geometry = crop_object_sketch(sketch, annotation.box, canvas)
    prompt = annotation.prompt_text or default_prompt(annotation.class_label)
    seed = object_seed(scene_seed, annotation.object_id)
    last_error: Exception | None = None
    for attempt in range(max_retries + 1):
        image = generator.generate(crop, prompt, seed + attempt)
        image = np.asarray(image)
        if image.shape != (canvas, canvas, 3) or image.dtype != np.uint8:
            raise ObjectGenerationError(
                f"generator returned {image.shape} {image.dtype} for "
                f"{annotation.object_id!r}",
                object_id=annotation.object_id,
            )
        mask = clean_mask(segmenter.segment(image, annotation.class_label))
        if mask.any():
            return ObjectAsset(
                object_id=annotation.object_id,
                class_label=annotation.class_label,
                prompt=prompt,
                seed=seed + attempt,
                attempts=attempt + 1,
                geometry=geometry,
                image=image,
                mask=mask,
            )
        last_error = EmptyMaskError(
            f"empty mask for {annotation.object_id!r} with seed {seed + attempt}"
        )
    raise ObjectGenerationError(
        f"object {annotation.object_id!r} failed after {max_retries + 1} attempts: "
        f"{last_error}",
        object_id=annotation.object_id,
    )
