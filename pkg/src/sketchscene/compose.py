"""Scene composition: place generated objects back on the canvas in
paint order and build the composite guide (image + union mask) that
seeds the blended phase of scene inference."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import model
from .errors import PlacementError, ShapeError
from .objects import ObjectAsset, place_back


@dataclass(slots=True)
class CompositeGuide:
    """Foreground composite on a white canvas plus the union mask.

    ``placements`` records paint order (later entries painted over
    earlier ones inside overlaps).
    """

    image: np.ndarray
    mask: np.ndarray
    placements: list[str] = field(default_factory=list)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.image.shape}|{self.mask.shape}".encode())
        h.update(self.image.tobytes())
        h.update(self.mask.astype(np.uint8).tobytes())
        return h.hexdigest()


def place_asset(
    canvas_image: np.ndarray,
    canvas_mask: np.ndarray,
    asset: ObjectAsset,
) -> None:
    """Paint one asset into the canvas arrays in place.

    The asset's own mask decides which pixels paint; painted pixels
    also switch the union mask on.  Later calls overwrite earlier ones
    wherever masks overlap.
    """
    box = asset.geometry.box
    if box.right > canvas_image.shape[1] or box.bottom > canvas_image.shape[0]:
        raise PlacementError(
            f"box [{box.left},{box.top},{box.width},{box.height}] exceeds canvas "
            f"{canvas_image.shape[1]}x{canvas_image.shape[0]}"
        )
    img_box = place_back(asset.image, asset.geometry)
    mask_box = place_back(asset.mask, asset.geometry)
    sel = mask_box != 0.0
    region = (slice(box.top, box.bottom), slice(box.left, box.right))
    canvas_image[region][sel] = img_box[sel]
    canvas_mask[region][sel] = 1.0


def compose_guide(scene: model.SceneSpec, assets: list[ObjectAsset]) -> CompositeGuide:
    """Assemble all assets on a white canvas in scene paint order.

    ``assets`` may arrive in any order; the scene's object order wins.
    Objects without an asset are an error (generation must run first).
    """
    by_id = {a.object_id: a for a in assets}
    missing = [ann.object_id for ann in scene.objects if ann.object_id not in by_id]
    if missing:
        raise PlacementError(f"no generated assets for objects: {missing}")
    extra = set(by_id) - {ann.object_id for ann in scene.objects}
    if extra:
        raise PlacementError(f"assets do not belong to the scene: {sorted(extra)}")

    image = np.full((scene.height, scene.width, 3), 255, dtype=np.uint8)
    mask = np.zeros((scene.height, scene.width), dtype=np.float64)
    order = []
    for ann in scene.objects:
        asset = by_id[ann.object_id]
        if asset.geometry.box != ann.box:
            raise PlacementError(
                f"asset for {ann.object_id!r} was generated for a different box"
            )
        place_asset(image, mask, asset)
        order.append(ann.object_id)
    return CompositeGuide(image=image, mask=mask, placements=order)


def guide_latents(guide: CompositeGuide, toy) -> tuple[np.ndarray, np.ndarray]:
    """Encode the guide for inference: foreground latent plus the
    mask downsampled to latent resolution."""
    from . import diffusion  # local import to keep module load light

    z_init = toy.encode_image(guide.image)
    m_init = diffusion.downsample_mask(guide.mask, toy.profile.downsample_factor)
    if m_init.shape != z_init.shape[1:]:
        raise ShapeError(
            f"latent mask {m_init.shape} does not match latent {z_init.shape[1:]}"
        )
    return z_init, m_init
