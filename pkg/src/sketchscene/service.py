"""HTTP service exposing the pipeline: scene CRUD with optimistic
concurrency, an asynchronous job queue with idempotent submission, a
long-poll NDJSON event stream, and content-addressed artifact serving.

Run it with ``sketchscene serve`` or mount :func:`create_app` under any
ASGI server.  All state lives in the workspace directory, so the CLI
and the service operate interchangeably on the same project.
"""

from __future__ import annotations

import base64
import binascii
import contextlib
import threading

from fastapi import FastAPI, Header, Query, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel, Field

from . import engine, inference, model, pngio
from .backend import TOY_PROFILE
from .config import PipelineConfig
from .errors import (
    ConflictError,
    JobStateError,
    NotFoundError,
    ParseError,
    RangeError,
    SketchSceneError,
    ValidationFailure,
)
from .jobs import JOB_KINDS, JobQueue

_POLL_INTERVAL_S = 0.05
_MAX_EVENT_WAIT_S = 30.0


class SceneCreate(BaseModel):
    document: dict
    sketch_png_b64: str | None = None


class SceneUpdate(BaseModel):
    document: dict
    revision: int
    sketch_png_b64: str | None = None


class JobSubmit(BaseModel):
    kind: str
    params: dict = Field(default_factory=dict)


def _decode_sketch(b64: str):
    try:
        raw = base64.b64decode(b64, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise ParseError(f"sketch_png_b64 is not valid base64: {exc}") from exc
    return pngio.from_png_bytes(raw, "L")


def _render_config(params: dict) -> model.RenderConfig:
    base = model.RenderConfig()
    known = {"steps", "alpha", "seed", "guidance_scale"}
    unknown = set(params) - known - {"alphas"}
    if unknown:
        raise ValidationFailure(
            [model.Violation("unknown_param", f"unknown params: {sorted(unknown)}")]
        )
    cfg = model.RenderConfig(
        steps=params.get("steps", base.steps),
        alpha=params.get("alpha", base.alpha),
        seed=params.get("seed", base.seed),
        guidance_scale=params.get("guidance_scale", base.guidance_scale),
    )
    violations = model.validate_render_config(cfg)
    if violations:
        raise ValidationFailure(violations)
    return cfg


class _JobCancelled(Exception):
    pass


def execute_job(ws: engine.Workspace, cfg: PipelineConfig, queue: JobQueue, job) -> dict:
    """Run one job to completion; checks for cooperative cancellation
    between stages."""

    def checkpoint():
        if queue.get(job.job_id).cancel_requested:
            raise _JobCancelled()

    params = job.params or {}
    if job.kind == "objects":
        scene = ws.load_scene(job.scene_id)
        engine.require_valid(scene, TOY_PROFILE.downsample_factor)
        assets = engine.generate_scene_objects(
            ws, scene, cfg, scene_seed=int(params.get("seed", 0))
        )
        return {
            "objects": [
                {"object_id": a.object_id, "seed": a.seed, "attempts": a.attempts}
                for a in assets
            ]
        }
    if job.kind == "train":
        render_cfg = _render_config(params)
        scene, assets, identities = engine.prepare_scene(
            ws, job.scene_id, cfg, seed=render_cfg.seed
        )
        checkpoint()
        return {
            "identities": {
                oid: {"token": ident.token, "steps_trained": ident.steps_trained}
                for oid, ident in identities.items()
            }
        }
    if job.kind == "render":
        render_cfg = _render_config(params)
        checkpoint()
        result = engine.run_render(ws, job.scene_id, cfg, render_cfg)
        return {
            "render_id": result.render_id,
            "output": result.manifest["output"],
            "diagnostics": result.manifest["diagnostics"],
        }
    if job.kind == "sweep":
        render_cfg = _render_config(params)
        alphas = inference.sweep_alphas(params.get("alphas"))
        checkpoint()
        manifest, _, _ = engine.run_sweep(ws, job.scene_id, cfg, render_cfg, alphas)
        return {"sweep_id": manifest["sweep_id"], "renders": manifest["renders"]}
    raise JobStateError(f"unknown job kind {job.kind!r}")


def _worker_loop(stop: threading.Event, ws, cfg, queue: JobQueue):
    while not stop.is_set():
        job = queue.claim_next()
        if job is None:
            stop.wait(_POLL_INTERVAL_S)
            continue
        try:
            result = execute_job(ws, cfg, queue, job)
            queue.mark_succeeded(job.job_id, result)
        except _JobCancelled:
            queue.mark_failed(job.job_id, {"type": "cancelled", "message": "cancelled"})
        except SketchSceneError as exc:
            doc = {"type": type(exc).__name__, "message": str(exc)}
            if isinstance(exc, ValidationFailure):
                doc["violations"] = [v.to_document() for v in exc.violations]
            queue.mark_failed(job.job_id, doc)
        except Exception as exc:  # noqa: BLE001 - job isolation boundary
            queue.mark_failed(
                job.job_id, {"type": type(exc).__name__, "message": str(exc)}
            )


def create_app(
    cfg: PipelineConfig | None = None, workspace: engine.Workspace | None = None
) -> FastAPI:
    cfg = cfg or PipelineConfig()
    ws = workspace or engine.Workspace(cfg.project_root)
    queue = JobQueue(ws.jobs_path)
    stop = threading.Event()
    threads: list[threading.Thread] = []

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        stop.clear()
        for n in range(cfg.workers):
            thread = threading.Thread(
                target=_worker_loop, args=(stop, ws, cfg, queue),
                name=f"sketchscene-worker-{n}", daemon=True,
            )
            thread.start()
            threads.append(thread)
        yield
        stop.set()
        queue.notify_all()
        for thread in threads:
            thread.join(timeout=2.0)
        threads.clear()

    app = FastAPI(title="sketchscene", lifespan=lifespan)
    app.state.workspace = ws
    app.state.queue = queue
    app.state.config = cfg

    # The browser studio is served from its own origin (static file server);
    # the service is a local, single-user tool, so a permissive policy is fine.
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    # -- error mapping -----------------------------------------------------

    def _error_response(status: int, exc: Exception) -> JSONResponse:
        body = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        if isinstance(exc, ValidationFailure):
            body["error"]["violations"] = [v.to_document() for v in exc.violations]
        if isinstance(exc, ParseError) and exc.offset is not None:
            body["error"]["offset"] = exc.offset
        return JSONResponse(status_code=status, content=body)

    @app.exception_handler(NotFoundError)
    async def _nf(request: Request, exc: NotFoundError):
        return _error_response(404, exc)

    @app.exception_handler(ConflictError)
    async def _conflict(request: Request, exc: ConflictError):
        return _error_response(409, exc)

    @app.exception_handler(JobStateError)
    async def _jobstate(request: Request, exc: JobStateError):
        return _error_response(409, exc)

    @app.exception_handler(ValidationFailure)
    async def _invalid(request: Request, exc: ValidationFailure):
        return _error_response(422, exc)

    @app.exception_handler(ParseError)
    async def _parse(request: Request, exc: ParseError):
        return _error_response(400, exc)

    @app.exception_handler(SketchSceneError)
    async def _generic(request: Request, exc: SketchSceneError):
        return _error_response(500, exc)

    # -- meta ----------------------------------------------------------------

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/capabilities")
    def capabilities():
        return {
            "backend_profile": TOY_PROFILE.to_document(),
            "defaults": {
                "steps": model.DEFAULT_STEPS,
                "alpha": model.DEFAULT_ALPHA,
                "canvas": model.DEFAULT_CANVAS,
                "sweep": list(model.SWEEP_PRESET),
            },
            "object_canvas": cfg.object_canvas,
        }

    # -- scenes ----------------------------------------------------------------

    def _load_scene_payload(document: dict, sketch_b64: str | None) -> model.SceneSpec:
        scene = model.scene_from_document(document)
        if sketch_b64 is not None:
            scene.sketch = _decode_sketch(sketch_b64)
        violations = model.validate_scene(scene)
        if violations:
            raise ValidationFailure(violations)
        return scene

    @app.post("/scenes", status_code=201)
    def create_scene(payload: SceneCreate):
        scene = _load_scene_payload(payload.document, payload.sketch_png_b64)
        if ws.has_scene(scene.scene_id):
            raise ConflictError(f"scene {scene.scene_id!r} already exists")
        ws.save_scene(scene)
        ws.set_revision(scene.scene_id, 1)
        return {"scene_id": scene.scene_id, "revision": 1}

    @app.get("/scenes")
    def list_scenes():
        return {
            "scenes": [
                {"scene_id": sid, "revision": ws.get_revision(sid)}
                for sid in ws.list_scene_ids()
            ]
        }

    @app.get("/scenes/{scene_id}")
    def get_scene(scene_id: str):
        scene = ws.load_scene(scene_id)
        return {
            "document": model.scene_to_document(scene),
            "revision": ws.get_revision(scene_id),
            "has_sketch": scene.sketch is not None,
        }

    @app.put("/scenes/{scene_id}")
    def update_scene(scene_id: str, payload: SceneUpdate):
        if not ws.has_scene(scene_id):
            raise NotFoundError(f"scene {scene_id!r} not found")
        current = ws.get_revision(scene_id)
        if payload.revision != current:
            raise ConflictError(
                f"revision mismatch: expected {current}, got {payload.revision}"
            )
        scene = _load_scene_payload(payload.document, payload.sketch_png_b64)
        if scene.scene_id != scene_id:
            raise ConflictError(
                f"document scene_id {scene.scene_id!r} does not match {scene_id!r}"
            )
        if payload.sketch_png_b64 is None and scene.sketch is None:
            # keep any previously uploaded sketch
            existing = ws.load_scene(scene_id)
            scene.sketch = existing.sketch
        ws.save_scene(scene)
        ws.set_revision(scene_id, current + 1)
        return {"scene_id": scene_id, "revision": current + 1}

    @app.get("/scenes/{scene_id}/sketch")
    def get_sketch(scene_id: str):
        scene = ws.load_scene(scene_id)
        if scene.sketch is None:
            raise NotFoundError(f"scene {scene_id!r} has no sketch")
        return Response(pngio.to_png_bytes(scene.sketch), media_type="image/png")

    @app.get("/scenes/{scene_id}/validation")
    def get_validation(scene_id: str):
        scene = ws.load_scene(scene_id)
        violations = model.validate_scene(
            scene, latent_factor=TOY_PROFILE.downsample_factor
        )
        return {"violations": [v.to_document() for v in violations]}

    # -- jobs -------------------------------------------------------------------

    @app.post("/scenes/{scene_id}/jobs")
    def submit_job(
        scene_id: str,
        payload: JobSubmit,
        response: Response,
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ):
        if not ws.has_scene(scene_id):
            raise NotFoundError(f"scene {scene_id!r} not found")
        if payload.kind not in JOB_KINDS:
            raise ValidationFailure(
                [model.Violation("bad_kind", f"unknown job kind {payload.kind!r}")]
            )
        if payload.kind in ("render", "train", "sweep"):
            _render_config(payload.params)  # early 422 on bad params
        if payload.kind == "sweep":
            try:
                inference.sweep_alphas(payload.params.get("alphas"))
            except RangeError as exc:
                raise ValidationFailure(
                    [model.Violation("bad_alphas", str(exc))]
                ) from exc
        job, created = queue.submit(
            scene_id, payload.kind, payload.params, idempotency_key=idempotency_key
        )
        response.status_code = 202 if created else 200
        return job.to_document()

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        return queue.get(job_id).to_document()

    @app.get("/scenes/{scene_id}/jobs")
    def list_scene_jobs(scene_id: str):
        return {"jobs": [j.to_document() for j in queue.list_jobs(scene_id)]}

    @app.post("/jobs/{job_id}/cancel")
    def cancel_job(job_id: str):
        return queue.cancel(job_id).to_document()

    # -- events ------------------------------------------------------------------

    @app.get("/events")
    def events(
        after: int = Query(default=0, ge=0),
        timeout: float = Query(default=0.0, ge=0.0),
    ):
        found = queue.wait_events(after, min(timeout, _MAX_EVENT_WAIT_S))

        def lines():
            import json as _json

            for event in found:
                yield _json.dumps(event, sort_keys=True) + "\n"

        return StreamingResponse(lines(), media_type="application/x-ndjson")

    # -- artifacts & renders --------------------------------------------------------

    @app.get("/artifacts/{digest}")
    def get_artifact(digest: str):
        data = ws.store.get_bytes(digest)
        media = "image/png" if data[:8] == b"\x89PNG\r\n\x1a\n" else "application/octet-stream"
        return Response(data, media_type=media)

    @app.get("/scenes/{scene_id}/renders")
    def list_scene_renders(scene_id: str):
        if not ws.has_scene(scene_id):
            raise NotFoundError(f"scene {scene_id!r} not found")
        return {"renders": engine.list_renders(ws, scene_id)}

    return app
