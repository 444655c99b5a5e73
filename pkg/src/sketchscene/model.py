"""Scene domain model: annotated sketches, render settings, validation,
and a canonical JSON document format.

A scene is a monochrome sketch on a fixed canvas plus a list of
annotated object boxes (back-to-front paint order) and a free-text
background description.  The JSON document carries everything except
pixels; the sketch rides along as an optional in-memory array and is
persisted as a PNG next to the document by :func:`save_scene`.
"""

from __future__ import annotations

import datetime as _dt
import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import ImageDraw, Image

from . import pngio
from .errors import ParseError, RangeError, SchemaVersionError, ShapeError

SCHEMA_VERSION = 1
DEFAULT_CANVAS = 512
DEFAULT_STEPS = 50
DEFAULT_ALPHA = 0.5
DEFAULT_GUIDANCE = 7.5
SWEEP_PRESET = (0.4, 0.5, 0.6)
INK_THRESHOLD = 128  # pixel values below this count as ink

_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.-]*$")


@dataclass(slots=True)
class Box:
    """Axis-aligned pixel box; ``left``/``top`` inclusive origin."""

    left: int
    top: int
    width: int
    height: int

    @property
    def right(self) -> int:
        return self.left + self.width

    @property
    def bottom(self) -> int:
        return self.top + self.height


@dataclass(slots=True)
class ObjectAnnotation:
    """One sketched object: id, class word, box, optional prompt and strokes.

    ``prompt_text`` of None means "use the default prompt for the class
    label".  ``strokes`` are polylines in canvas coordinates, kept so
    editors can re-render the sketch.
    """

    object_id: str
    class_label: str
    box: Box
    prompt_text: str | None = None
    strokes: list[list[tuple[float, float]]] | None = None


@dataclass(slots=True)
class SceneSpec:
    """A full annotated scene.  ``objects`` order is paint order:
    later entries overlap earlier ones wherever boxes intersect."""

    scene_id: str
    background_text: str
    width: int = DEFAULT_CANVAS
    height: int = DEFAULT_CANVAS
    created_at: str = ""
    sketch_path: str = "sketch.png"
    objects: list[ObjectAnnotation] = field(default_factory=list)
    extras: dict = field(default_factory=dict)
    sketch: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.created_at:
            self.created_at = (
                _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
            )

    def object_by_id(self, object_id: str) -> ObjectAnnotation:
        for ann in self.objects:
            if ann.object_id == object_id:
                return ann
        raise KeyError(object_id)


@dataclass(slots=True)
class RenderConfig:
    """Settings for one scene render."""

    steps: int = DEFAULT_STEPS
    alpha: float = DEFAULT_ALPHA
    seed: int = 0
    guidance_scale: float = DEFAULT_GUIDANCE

    def to_document(self) -> dict:
        return {
            "steps": self.steps,
            "alpha": self.alpha,
            "seed": self.seed,
            "guidance_scale": self.guidance_scale,
        }


@dataclass(frozen=True, slots=True)
class Violation:
    """One validation finding; ``object_id`` is set for per-object issues."""

    code: str
    message: str
    object_id: str | None = None

    def to_document(self) -> dict:
        doc = {"code": self.code, "message": self.message}
        if self.object_id is not None:
            doc["object_id"] = self.object_id
        return doc


def validate_scene(
    scene: SceneSpec, latent_factor: int | None = None
) -> list[Violation]:
    """Structural checks; returns an empty list when the scene is valid.

    ``latent_factor`` (the active backend's downsample factor) enables
    the canvas-divisibility check used before rendering.
    """
    out: list[Violation] = []
    if not scene.scene_id or not _ID_RE.match(scene.scene_id):
        out.append(Violation("bad_scene_id", f"invalid scene_id {scene.scene_id!r}"))
    if not scene.background_text.strip():
        out.append(Violation("empty_background", "background_text is empty"))
    if scene.width < 1 or scene.height < 1:
        out.append(
            Violation("bad_canvas", f"canvas {scene.width}x{scene.height} not positive")
        )
    elif latent_factor is not None and (
        scene.width % latent_factor or scene.height % latent_factor
    ):
        out.append(
            Violation(
                "canvas_factor",
                f"canvas {scene.width}x{scene.height} not divisible by "
                f"latent factor {latent_factor}",
            )
        )

    seen: set[str] = set()
    for ann in scene.objects:
        oid = ann.object_id
        if not oid or not _ID_RE.match(oid):
            out.append(Violation("bad_object_id", f"invalid object_id {oid!r}", oid))
        if oid in seen:
            out.append(Violation("duplicate_object_id", f"duplicate id {oid!r}", oid))
        seen.add(oid)
        if not ann.class_label.strip():
            out.append(Violation("empty_class_label", "class_label is empty", oid))
        b = ann.box
        if b.width < 1 or b.height < 1:
            out.append(
                Violation("empty_box", f"box {b.width}x{b.height} has no area", oid)
            )
        elif (
            b.left < 0
            or b.top < 0
            or b.right > scene.width
            or b.bottom > scene.height
        ):
            out.append(
                Violation(
                    "box_out_of_bounds",
                    f"box [{b.left},{b.top},{b.width},{b.height}] exceeds canvas",
                    oid,
                )
            )
        for stroke in ann.strokes or []:
            if any(
                not (0 <= x <= scene.width and 0 <= y <= scene.height)
                for x, y in stroke
            ):
                out.append(
                    Violation("stroke_out_of_bounds", "stroke leaves canvas", oid)
                )
                break

    if scene.sketch is not None:
        s = scene.sketch
        if s.ndim != 2 or s.dtype != np.uint8:
            out.append(
                Violation("bad_sketch", f"sketch must be (H, W) uint8, got "
                                        f"{s.shape} {s.dtype}")
            )
        elif s.shape != (scene.height, scene.width):
            out.append(
                Violation(
                    "sketch_dims",
                    f"sketch {s.shape} does not match canvas "
                    f"({scene.height}, {scene.width})",
                )
            )
    return out


def validate_render_config(cfg: RenderConfig) -> list[Violation]:
    out: list[Violation] = []
    if not isinstance(cfg.steps, int) or isinstance(cfg.steps, bool) or not (
        1 <= cfg.steps <= 1000
    ):
        out.append(Violation("bad_steps", f"steps must be in [1, 1000], got {cfg.steps!r}"))
    if not isinstance(cfg.alpha, (int, float)) or not 0.0 <= float(cfg.alpha) <= 1.0:
        out.append(Violation("bad_alpha", f"alpha must be in [0, 1], got {cfg.alpha!r}"))
    if not isinstance(cfg.seed, int) or isinstance(cfg.seed, bool) or cfg.seed < 0:
        out.append(Violation("bad_seed", f"seed must be a non-negative int, got {cfg.seed!r}"))
    if not isinstance(cfg.guidance_scale, (int, float)) or float(cfg.guidance_scale) < 0:
        out.append(
            Violation(
                "bad_guidance",
                f"guidance_scale must be >= 0, got {cfg.guidance_scale!r}",
            )
        )
    return out


# ---------------------------------------------------------------------------
# canonical JSON document
# ---------------------------------------------------------------------------

_KNOWN_SCENE_KEYS = {
    "schema_version",
    "scene_id",
    "background_text",
    "width",
    "height",
    "created_at",
    "sketch_path",
    "objects",
}
_KNOWN_OBJECT_KEYS = {"object_id", "class_label", "prompt_text", "box", "strokes"}


def scene_to_document(scene: SceneSpec) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "scene_id": scene.scene_id,
        "background_text": scene.background_text,
        "width": scene.width,
        "height": scene.height,
        "created_at": scene.created_at,
        "sketch_path": scene.sketch_path,
        "objects": [],
    }
    for ann in scene.objects:
        entry: dict = {
            "object_id": ann.object_id,
            "class_label": ann.class_label,
            "box": {
                "left": ann.box.left,
                "top": ann.box.top,
                "width": ann.box.width,
                "height": ann.box.height,
            },
        }
        if ann.prompt_text is not None:
            entry["prompt_text"] = ann.prompt_text
        if ann.strokes is not None:
            entry["strokes"] = [
                [[float(x), float(y)] for x, y in stroke] for stroke in ann.strokes
            ]
        doc["objects"].append(entry)
    for key in sorted(scene.extras):
        doc[key] = scene.extras[key]
    return doc


def serialize_scene(scene: SceneSpec) -> bytes:
    """Canonical UTF-8 JSON bytes (stable across round-trips)."""
    return (json.dumps(scene_to_document(scene), indent=2) + "\n").encode()


def _req(doc: dict, key: str, kind, where: str):
    if key not in doc:
        raise ParseError(f"{where}: missing key {key!r}")
    val = doc[key]
    if kind is int:
        ok = isinstance(val, int) and not isinstance(val, bool)
    else:
        ok = isinstance(val, kind)
    if not ok:
        raise ParseError(f"{where}.{key}: expected {kind.__name__}, got {type(val).__name__}")
    return val


def scene_from_document(doc: dict) -> SceneSpec:
    if not isinstance(doc, dict):
        raise ParseError(f"scene document must be an object, got {type(doc).__name__}")
    version = _req(doc, "schema_version", int, "scene")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(f"unsupported schema_version {version}")
    objects = []
    raw_objects = _req(doc, "objects", list, "scene")
    for n, entry in enumerate(raw_objects):
        where = f"objects[{n}]"
        if not isinstance(entry, dict):
            raise ParseError(f"{where}: expected object, got {type(entry).__name__}")
        box_doc = _req(entry, "box", dict, where)
        box = Box(
            left=_req(box_doc, "left", int, f"{where}.box"),
            top=_req(box_doc, "top", int, f"{where}.box"),
            width=_req(box_doc, "width", int, f"{where}.box"),
            height=_req(box_doc, "height", int, f"{where}.box"),
        )
        strokes = None
        if "strokes" in entry:
            raw = _req(entry, "strokes", list, where)
            strokes = []
            for stroke in raw:
                if not isinstance(stroke, list):
                    raise ParseError(f"{where}.strokes: expected list of polylines")
                pts = []
                for pt in stroke:
                    if (
                        not isinstance(pt, list)
                        or len(pt) != 2
                        or not all(isinstance(v, (int, float)) for v in pt)
                    ):
                        raise ParseError(f"{where}.strokes: points must be [x, y]")
                    pts.append((float(pt[0]), float(pt[1])))
                strokes.append(pts)
        prompt = entry.get("prompt_text")
        if prompt is not None and not isinstance(prompt, str):
            raise ParseError(f"{where}.prompt_text: expected string")
        objects.append(
            ObjectAnnotation(
                object_id=_req(entry, "object_id", str, where),
                class_label=_req(entry, "class_label", str, where),
                box=box,
                prompt_text=prompt,
                strokes=strokes,
            )
        )
    extras = {k: v for k, v in doc.items() if k not in _KNOWN_SCENE_KEYS}
    return SceneSpec(
        scene_id=_req(doc, "scene_id", str, "scene"),
        background_text=_req(doc, "background_text", str, "scene"),
        width=_req(doc, "width", int, "scene"),
        height=_req(doc, "height", int, "scene"),
        created_at=_req(doc, "created_at", str, "scene"),
        sketch_path=_req(doc, "sketch_path", str, "scene"),
        objects=objects,
        extras=extras,
    )


def deserialize_scene(data: bytes) -> SceneSpec:
    try:
        doc = json.loads(data.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise ParseError(f"scene document is not UTF-8: {exc}", offset=exc.start) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", offset=exc.pos) from exc
    return scene_from_document(doc)


def save_scene(scene: SceneSpec, directory: str | Path) -> Path:
    """Write ``scene.json`` (and the sketch PNG when attached); returns
    the document path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    doc_path = directory / "scene.json"
    doc_path.write_bytes(serialize_scene(scene))
    if scene.sketch is not None:
        pngio.save_png(directory / scene.sketch_path, scene.sketch)
    return doc_path


def load_scene(directory: str | Path) -> SceneSpec:
    """Read ``scene.json``; attaches the sketch when its PNG exists."""
    directory = Path(directory)
    scene = deserialize_scene((directory / "scene.json").read_bytes())
    sketch_file = directory / scene.sketch_path
    if sketch_file.exists():
        scene.sketch = pngio.load_gray(sketch_file)
    return scene


# ---------------------------------------------------------------------------
# sketch helpers
# ---------------------------------------------------------------------------

def blank_sketch(width: int, height: int) -> np.ndarray:
    """White canvas, no ink."""
    if width < 1 or height < 1:
        raise RangeError(f"canvas must be positive, got {width}x{height}")
    return np.full((height, width), 255, dtype=np.uint8)


def render_strokes(scene: SceneSpec, line_width: int = 2) -> np.ndarray:
    """Rasterize all annotation strokes onto a white canvas."""
    img = Image.new("L", (scene.width, scene.height), 255)
    draw = ImageDraw.Draw(img)
    for ann in scene.objects:
        for stroke in ann.strokes or []:
            if len(stroke) == 1:
                x, y = stroke[0]
                r = max(line_width // 2, 1)
                draw.ellipse([x - r, y - r, x + r, y + r], fill=0)
            elif stroke:
                draw.line([(x, y) for x, y in stroke], fill=0, width=line_width)
    return np.asarray(img, dtype=np.uint8)


def ink_mask(sketch: np.ndarray) -> np.ndarray:
    """Binary {0,1} float mask of inked (dark) pixels."""
    sketch = np.asarray(sketch)
    if sketch.ndim != 2:
        raise ShapeError(f"sketch must be 2-D, got {sketch.shape}")
    return (sketch < INK_THRESHOLD).astype(np.float64)


def with_sketch(scene: SceneSpec, sketch: np.ndarray) -> SceneSpec:
    """Copy of the scene with a different attached sketch."""
    return replace(scene, sketch=sketch)
