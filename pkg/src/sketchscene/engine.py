"""End-to-end orchestration over a project workspace.

A workspace directory holds scenes, their generated assets, trained
identities, renders, the content-addressed artifact store, and queue
state:

    <root>/
      scenes/<scene_id>/scene.json        canonical scene document
      scenes/<scene_id>/sketch.png        attached sketch (optional)
      scenes/<scene_id>/revision          optimistic-concurrency counter
      scenes/<scene_id>/assets/...        per-object images + masks
      scenes/<scene_id>/identities.json   trained identity vectors
      scenes/<scene_id>/renders/<id>/manifest.json (+ timings.json)
      store/blobs/..                      content-addressed artifacts
      jobs.json                           queue persistence

Everything written into manifests is a pure function of the scene
document, the render settings, and the pipeline config — wall-clock
timings go to the sibling ``timings.json`` so repeated runs (or the
same run through CLI vs service) produce byte-identical manifests.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import compose, diffusion, inference, model, objects, pngio, training
from .backend import ToyBackend
from .config import PipelineConfig, build_generator, build_segmenter
from .errors import ConfigError, NotFoundError, ValidationFailure
from .store import ArtifactStore

MANIFEST_SCHEMA_VERSION = 1


def canonical_json(doc: dict) -> bytes:
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode()


class Workspace:
    """Path layout and shared handles for one project root."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.store = ArtifactStore(self.root / "store")

    @property
    def scenes_root(self) -> Path:
        return self.root / "scenes"

    @property
    def jobs_path(self) -> Path:
        return self.root / "jobs.json"

    def scene_dir(self, scene_id: str) -> Path:
        return self.scenes_root / scene_id

    def list_scene_ids(self) -> list[str]:
        if not self.scenes_root.exists():
            return []
        return sorted(
            p.name for p in self.scenes_root.iterdir() if (p / "scene.json").exists()
        )

    def has_scene(self, scene_id: str) -> bool:
        return (self.scene_dir(scene_id) / "scene.json").exists()

    def save_scene(self, scene: model.SceneSpec) -> None:
        model.save_scene(scene, self.scene_dir(scene.scene_id))

    def load_scene(self, scene_id: str) -> model.SceneSpec:
        if not self.has_scene(scene_id):
            raise NotFoundError(f"scene {scene_id!r} not found")
        return model.load_scene(self.scene_dir(scene_id))

    def get_revision(self, scene_id: str) -> int:
        path = self.scene_dir(scene_id) / "revision"
        return int(path.read_text()) if path.exists() else 0

    def set_revision(self, scene_id: str, revision: int) -> None:
        (self.scene_dir(scene_id) / "revision").write_text(str(revision))


def identity_token(object_id: str) -> str:
    return f"<{object_id.lower()}>"


@dataclass(slots=True)
class StageTimer:
    """Wall-clock stage durations (reported separately from manifests)."""

    stages: dict = field(default_factory=dict)
    _t0: float = 0.0

    def start(self) -> None:
        self._t0 = time.perf_counter()

    def stop(self, name: str) -> None:
        self.stages[name] = self.stages.get(name, 0.0) + time.perf_counter() - self._t0


def require_valid(scene: model.SceneSpec, latent_factor: int) -> None:
    violations = model.validate_scene(scene, latent_factor=latent_factor)
    if violations:
        raise ValidationFailure(violations)


def scene_sketch(scene: model.SceneSpec) -> np.ndarray:
    """The attached sketch, or a rasterization of the strokes."""
    if scene.sketch is not None:
        return scene.sketch
    return model.render_strokes(scene)


# ---------------------------------------------------------------------------
# object + identity stages
# ---------------------------------------------------------------------------

def generate_scene_objects(
    ws: Workspace,
    scene: model.SceneSpec,
    cfg: PipelineConfig,
    scene_seed: int,
) -> list[objects.ObjectAsset]:
    """Run object generation for every annotation and persist the assets."""
    generator = build_generator(cfg.generator)
    segmenter = build_segmenter(cfg.segmenter)
    sketch = scene_sketch(scene)
    assets = []
    for ann in scene.objects:
        assets.append(
            objects.generate_object(
                sketch, ann, generator, segmenter,
                scene_seed=scene_seed,
                canvas=cfg.object_canvas,
                max_retries=cfg.max_retries,
            )
        )
    save_assets(ws, scene.scene_id, assets)
    return assets


def save_assets(ws: Workspace, scene_id: str, assets: list[objects.ObjectAsset]) -> None:
    directory = ws.scene_dir(scene_id) / "assets"
    directory.mkdir(parents=True, exist_ok=True)
    index = {}
    for asset in assets:
        image_png = pngio.to_png_bytes(asset.image)
        mask_png = pngio.to_png_bytes((asset.mask * 255).astype(np.uint8))
        (directory / f"{asset.object_id}.png").write_bytes(image_png)
        (directory / f"{asset.object_id}.mask.png").write_bytes(mask_png)
        index[asset.object_id] = {
            "class_label": asset.class_label,
            "prompt": asset.prompt,
            "seed": asset.seed,
            "attempts": asset.attempts,
            "geometry": asset.geometry.to_document(),
            "image_sha256": ArtifactStore.digest_of(image_png),
            "mask_sha256": ArtifactStore.digest_of(mask_png),
        }
    (directory / "assets.json").write_bytes(canonical_json(index))


def load_assets(ws: Workspace, scene: model.SceneSpec) -> list[objects.ObjectAsset]:
    directory = ws.scene_dir(scene.scene_id) / "assets"
    index_path = directory / "assets.json"
    if not index_path.exists():
        raise NotFoundError(f"scene {scene.scene_id!r} has no generated assets")
    index = json.loads(index_path.read_text())
    assets = []
    for ann in scene.objects:
        entry = index.get(ann.object_id)
        if entry is None:
            raise NotFoundError(f"no asset recorded for object {ann.object_id!r}")
        geo_doc = entry["geometry"]
        geometry = objects.CropGeometry(
            box=model.Box(**geo_doc["box"]),
            canvas=geo_doc["canvas"],
            scale=geo_doc["scale"],
            pad_left=geo_doc["pad_left"],
            pad_top=geo_doc["pad_top"],
        )
        image = pngio.load_rgb(directory / f"{ann.object_id}.png")
        mask_img = pngio.load_gray(directory / f"{ann.object_id}.mask.png")
        assets.append(
            objects.ObjectAsset(
                object_id=ann.object_id,
                class_label=entry["class_label"],
                prompt=entry["prompt"],
                seed=entry["seed"],
                attempts=entry["attempts"],
                geometry=geometry,
                image=image,
                mask=(mask_img >= 128).astype(np.float64),
            )
        )
    return assets


def train_scene_identities(
    ws: Workspace,
    scene: model.SceneSpec,
    assets: list[objects.ObjectAsset],
    cfg: PipelineConfig,
    toy: ToyBackend,
    schedule: diffusion.NoiseSchedule,
    base_seed: int,
) -> dict[str, training.IdentityEmbedding]:
    """Train one identity per object on its own asset; persists results.

    Objects whose mask vanishes at latent resolution keep their
    class-word initialization (recorded with zero steps)."""
    tokens = [identity_token(a.object_id) for a in assets]
    if len(set(tokens)) != len(tokens):
        raise ConfigError("object ids collide case-insensitively; identity tokens must be unique")
    identities: dict[str, training.IdentityEmbedding] = {}
    traces: dict[str, list[float]] = {}
    for asset in assets:
        token = identity_token(asset.object_id)
        z0 = toy.encode_image(asset.image)
        latent_mask = diffusion.downsample_mask(
            asset.mask, toy.profile.downsample_factor
        )
        seed = int.from_bytes(
            hashlib.sha256(f"{base_seed}|train|{asset.object_id}".encode()).digest()[:4],
            "big",
        )
        train_cfg = training.TrainConfig(
            steps=cfg.train.steps, lr=cfg.train.lr, seed=seed, window=cfg.train.window,
        )
        if cfg.train.steps == 0 or not latent_mask.any():
            ident = training.init_identity(toy, token, asset.class_label)
            trace = training.TrainingTrace(window=train_cfg.window)
        else:
            ident, trace = training.train_identity(
                toy, schedule, z0, latent_mask, token, asset.class_label, train_cfg
            )
        identities[asset.object_id] = ident
        traces[asset.object_id] = trace.window_means()
    doc = {
        oid: {**ident.to_document(), "window_means": traces[oid]}
        for oid, ident in identities.items()
    }
    path = ws.scene_dir(scene.scene_id) / "identities.json"
    path.write_bytes(canonical_json(doc))
    return identities


def load_identities(ws: Workspace, scene_id: str) -> dict[str, training.IdentityEmbedding]:
    path = ws.scene_dir(scene_id) / "identities.json"
    if not path.exists():
        return {}
    doc = json.loads(path.read_text())
    return {
        oid: training.IdentityEmbedding.from_document(entry)
        for oid, entry in doc.items()
    }


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------

@dataclass(slots=True)
class RenderResult:
    render_id: str
    manifest: dict
    manifest_path: Path
    image: np.ndarray


def _render_id(scene: model.SceneSpec, cfg: PipelineConfig, render_cfg: model.RenderConfig) -> str:
    payload = {
        "scene": model.scene_to_document(scene),
        "config": render_cfg.to_document(),
        "object_canvas": cfg.object_canvas,
        "train": cfg.train.to_document(),
    }
    digest = hashlib.sha256(canonical_json(payload)).hexdigest()
    return f"r-{digest[:12]}"


def render_scene(
    ws: Workspace,
    scene: model.SceneSpec,
    cfg: PipelineConfig,
    render_cfg: model.RenderConfig,
    assets: list[objects.ObjectAsset],
    identities: dict[str, training.IdentityEmbedding],
    toy: ToyBackend | None = None,
) -> RenderResult:
    """One deterministic render of a prepared scene (assets + identities
    already available)."""
    toy = toy or ToyBackend()
    timer = StageTimer()
    violations = model.validate_render_config(render_cfg)
    if violations:
        raise ValidationFailure(violations)
    require_valid(scene, toy.profile.downsample_factor)

    timer.start()
    schedule = diffusion.make_schedule(render_cfg.steps)
    guide = compose.compose_guide(scene, assets)
    z_init, m_init = compose.guide_latents(guide, toy)
    timer.stop("compose")

    tokens = {oid: ident.token for oid, ident in identities.items()}
    bindings = {ident.token: ident.vector for ident in identities.values()}
    pair = inference.build_prompt_pair(scene, tokens)
    enc_global = toy.encode_prompt(pair.global_text, bindings)
    enc_background = toy.encode_prompt(pair.background_text, bindings)

    timer.start()
    shape = toy.latent_shape(scene.width, scene.height)
    z_start = diffusion.initial_noise(shape, render_cfg.seed)
    z_final = inference.infer_scene_latent(
        toy, schedule, z_start, z_init, m_init,
        enc_global, enc_background, render_cfg.alpha, render_cfg.seed,
    )
    rendered = toy.decode_latent(z_final)
    timer.stop("inference")

    diag = inference.diagnostics(rendered, guide.image, guide.mask)

    image_png = pngio.to_png_bytes(rendered)
    guide_png = pngio.to_png_bytes(guide.image)
    mask_png = pngio.to_png_bytes((guide.mask * 255).astype(np.uint8))
    image_hash, image_path = ws.store.put_bytes(image_png)
    guide_hash, guide_path = ws.store.put_bytes(guide_png)
    mask_hash, mask_path = ws.store.put_bytes(mask_png)

    object_entries = []
    for asset in assets:
        ident = identities.get(asset.object_id)
        object_entries.append(
            {
                "object_id": asset.object_id,
                "class_label": asset.class_label,
                "prompt": asset.prompt,
                "seed": asset.seed,
                "attempts": asset.attempts,
                "identity": (
                    {"token": ident.token, "steps_trained": ident.steps_trained}
                    if ident is not None
                    else None
                ),
            }
        )

    render_id = _render_id(scene, cfg, render_cfg)
    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "kind": "render",
        "render_id": render_id,
        "scene_id": scene.scene_id,
        "config": render_cfg.to_document(),
        "backend_profile": toy.profile.to_document(),
        "prompts": pair.to_document(),
        "objects": object_entries,
        "guide": {
            "image_sha256": guide_hash,
            "image_path": guide_path,
            "mask_sha256": mask_hash,
            "mask_path": mask_path,
            "content_hash": guide.content_hash(),
        },
        "output": {"image_sha256": image_hash, "image_path": image_path},
        "diagnostics": diag,
    }
    render_dir = ws.scene_dir(scene.scene_id) / "renders" / render_id
    render_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = render_dir / "manifest.json"
    manifest_path.write_bytes(canonical_json(manifest))
    (render_dir / "timings.json").write_bytes(
        canonical_json({"stages_s": timer.stages})
    )
    return RenderResult(
        render_id=render_id, manifest=manifest,
        manifest_path=manifest_path, image=rendered,
    )


def prepare_scene(
    ws: Workspace,
    scene_id: str,
    cfg: PipelineConfig,
    seed: int,
    toy: ToyBackend | None = None,
    train_steps_schedule: diffusion.NoiseSchedule | None = None,
) -> tuple[model.SceneSpec, list[objects.ObjectAsset], dict[str, training.IdentityEmbedding]]:
    """Load + validate the scene, then run the object and identity
    stages with seeds derived from ``seed``."""
    toy = toy or ToyBackend()
    scene = ws.load_scene(scene_id)
    require_valid(scene, toy.profile.downsample_factor)
    assets = generate_scene_objects(ws, scene, cfg, scene_seed=seed)
    schedule = train_steps_schedule or diffusion.make_schedule(model.DEFAULT_STEPS)
    identities = train_scene_identities(ws, scene, assets, cfg, toy, schedule, seed)
    return scene, assets, identities


def run_render(
    ws: Workspace, scene_id: str, cfg: PipelineConfig, render_cfg: model.RenderConfig
) -> RenderResult:
    """Full chain for one render: objects -> identities -> scene."""
    toy = ToyBackend()
    scene, assets, identities = prepare_scene(
        ws, scene_id, cfg, seed=render_cfg.seed, toy=toy,
        train_steps_schedule=diffusion.make_schedule(render_cfg.steps),
    )
    return render_scene(ws, scene, cfg, render_cfg, assets, identities, toy)


def run_sweep(
    ws: Workspace,
    scene_id: str,
    cfg: PipelineConfig,
    render_cfg: model.RenderConfig,
    alphas=None,
) -> tuple[dict, Path, list[RenderResult]]:
    """Render the same prepared scene at each sweep alpha (same seed)."""
    alphas = inference.sweep_alphas(alphas)
    toy = ToyBackend()
    scene, assets, identities = prepare_scene(
        ws, scene_id, cfg, seed=render_cfg.seed, toy=toy,
        train_steps_schedule=diffusion.make_schedule(render_cfg.steps),
    )
    results = []
    entries = []
    for alpha in alphas:
        cfg_a = model.RenderConfig(
            steps=render_cfg.steps, alpha=alpha,
            seed=render_cfg.seed, guidance_scale=render_cfg.guidance_scale,
        )
        result = render_scene(ws, scene, cfg, cfg_a, assets, identities, toy)
        results.append(result)
        entries.append(
            {
                "alpha": alpha,
                "render_id": result.render_id,
                "image_sha256": result.manifest["output"]["image_sha256"],
                "image_path": result.manifest["output"]["image_path"],
            }
        )
    sweep_payload = {
        "scene": model.scene_to_document(scene),
        "config": render_cfg.to_document(),
        "alphas": alphas,
    }
    sweep_id = "w-" + hashlib.sha256(canonical_json(sweep_payload)).hexdigest()[:12]
    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "kind": "sweep",
        "sweep_id": sweep_id,
        "scene_id": scene_id,
        "config": render_cfg.to_document(),
        "alphas": alphas,
        "renders": entries,
    }
    sweep_dir = ws.scene_dir(scene_id) / "renders" / sweep_id
    sweep_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = sweep_dir / "manifest.json"
    manifest_path.write_bytes(canonical_json(manifest))
    return manifest, manifest_path, results


def list_renders(ws: Workspace, scene_id: str) -> list[dict]:
    renders_dir = ws.scene_dir(scene_id) / "renders"
    if not renders_dir.exists():
        return []
    out = []
    for manifest_path in sorted(renders_dir.glob("*/manifest.json")):
        out.append(json.loads(manifest_path.read_text()))
    return out
