"""PNG encode/decode helpers (Pillow-backed, deterministic output)."""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ParseError, ShapeError


def to_png_bytes(arr: np.ndarray) -> bytes:
    """Encode a (H, W) grayscale or (H, W, 3) RGB uint8 array as PNG."""
    arr = np.asarray(arr)
    if arr.dtype != np.uint8:
        raise ShapeError(f"image must be uint8, got {arr.dtype}")
    if arr.ndim == 2:
        img = Image.fromarray(arr, mode="L")
    elif arr.ndim == 3 and arr.shape[2] == 3:
        img = Image.fromarray(arr, mode="RGB")
    else:
        raise ShapeError(f"image must be (H, W) or (H, W, 3), got {arr.shape}")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def from_png_bytes(data: bytes, mode: str) -> np.ndarray:
    """Decode PNG bytes to a uint8 array; mode is 'L' or 'RGB'."""
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except Exception as exc:
        raise ParseError(f"invalid PNG data: {exc}") from exc
    return np.asarray(img.convert(mode), dtype=np.uint8)


def save_png(path: str | Path, arr: np.ndarray) -> None:
    Path(path).write_bytes(to_png_bytes(arr))


def load_gray(path: str | Path) -> np.ndarray:
    return from_png_bytes(Path(path).read_bytes(), "L")


def load_rgb(path: str | Path) -> np.ndarray:
    return from_png_bytes(Path(path).read_bytes(), "RGB")
