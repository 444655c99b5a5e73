"""Command line interface.

Exit codes: 0 success, 1 operational failure (invalid scene, generation
or adapter errors, missing resources), 2 usage or configuration errors.

Scene arguments accept either the id of a scene already in the
workspace, or a path to a ``scene.json`` file / directory, which is
imported (and revalidated) before the command runs.
"""

from __future__ import annotations

import functools
import json
import shutil
import sys
from pathlib import Path

import click

from . import bench as bench_mod
from . import engine, kernels, model
from .backend import TOY_PROFILE
from .config import CONFIG_ENV_VAR, PipelineConfig, load_config
from .errors import ConfigError, NotFoundError, SketchSceneError, ValidationFailure


def _fail(message: str) -> "click.exceptions.ClickException":
    exc = click.ClickException(message)
    exc.exit_code = 1
    return exc


def operational(fn):
    """Map domain errors to exit code 1 with a readable message."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationFailure as exc:
            lines = [f"  - [{v.code}] {v.message}" for v in exc.violations]
            raise _fail("scene is invalid:\n" + "\n".join(lines)) from exc
        except ConfigError as exc:
            raise click.UsageError(str(exc)) from exc
        except SketchSceneError as exc:
            raise _fail(f"{type(exc).__name__}: {exc}") from exc
        except OSError as exc:
            raise _fail(str(exc)) from exc

    return wrapper


@click.group()
@click.option(
    "--config", "config_path", type=click.Path(), default=None,
    envvar=CONFIG_ENV_VAR, help="Pipeline config JSON (or $SKETCHSCENE_CONFIG).",
)
@click.option(
    "--project", type=click.Path(), default=None,
    help="Workspace root (overrides the config value).",
)
@click.pass_context
def main(ctx, config_path, project):
    """Sketch-guided scene generation pipeline."""
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        raise click.UsageError(str(exc)) from exc
    if project:
        cfg.project_root = project
    ctx.obj = cfg


def _workspace(cfg: PipelineConfig) -> engine.Workspace:
    return engine.Workspace(cfg.project_root)


def _scene_from_path(path: Path) -> model.SceneSpec:
    if path.is_dir():
        return model.load_scene(path)
    scene = model.deserialize_scene(path.read_bytes())
    sketch_file = path.parent / scene.sketch_path
    if sketch_file.exists():
        from . import pngio

        scene.sketch = pngio.load_gray(sketch_file)
    return scene


def _resolve_scene(ws: engine.Workspace, ref: str) -> str:
    """Accept a scene id or a path; paths are imported into the workspace."""
    path = Path(ref)
    if path.exists():
        scene = _scene_from_path(path)
        engine.require_valid(scene, TOY_PROFILE.downsample_factor)
        ws.save_scene(scene)
        ws.set_revision(scene.scene_id, ws.get_revision(scene.scene_id) + 1)
        return scene.scene_id
    if ws.has_scene(ref):
        return ref
    raise NotFoundError(f"no scene file at {ref!r} and no such scene id in workspace")


def _echo_json(doc) -> None:
    click.echo(json.dumps(doc, indent=2, sort_keys=True))


# ---------------------------------------------------------------------------
# scene commands
# ---------------------------------------------------------------------------

@main.group()
def scene():
    """Validate, render, and sweep scenes."""


@scene.command("validate")
@click.argument("scene_ref")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@click.pass_obj
@operational
def scene_validate(cfg, scene_ref, as_json):
    """Check a scene document; exit 1 when it has violations."""
    path = Path(scene_ref)
    if path.exists():
        spec = _scene_from_path(path)
    else:
        spec = _workspace(cfg).load_scene(scene_ref)
    violations = model.validate_scene(spec, latent_factor=TOY_PROFILE.downsample_factor)
    if as_json:
        _echo_json({"scene_id": spec.scene_id,
                    "violations": [v.to_document() for v in violations]})
    else:
        for v in violations:
            target = f" ({v.object_id})" if v.object_id else ""
            click.echo(f"[{v.code}]{target} {v.message}")
    if violations:
        if not as_json:
            click.echo(f"{len(violations)} violation(s)", err=True)
        sys.exit(1)
    if not as_json:
        click.echo("ok")


@scene.command("list")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
@operational
def scene_list(cfg, as_json):
    """List scenes in the workspace."""
    ws = _workspace(cfg)
    rows = [
        {"scene_id": sid, "revision": ws.get_revision(sid)}
        for sid in ws.list_scene_ids()
    ]
    if as_json:
        _echo_json({"scenes": rows})
    else:
        for row in rows:
            click.echo(f"{row['scene_id']}\trev {row['revision']}")


def _render_options(fn):
    fn = click.option("--steps", type=int, default=model.DEFAULT_STEPS,
                      show_default=True, help="Denoising levels.")(fn)
    fn = click.option("--seed", type=int, default=0, show_default=True)(fn)
    fn = click.option("--guidance", type=float, default=model.DEFAULT_GUIDANCE,
                      show_default=True, help="Guidance scale (recorded).")(fn)
    return fn


def _make_render_config(steps, alpha, seed, guidance) -> model.RenderConfig:
    cfg = model.RenderConfig(steps=steps, alpha=alpha, seed=seed, guidance_scale=guidance)
    violations = model.validate_render_config(cfg)
    if violations:
        raise ValidationFailure(violations)
    return cfg


@scene.command("render")
@click.argument("scene_ref")
@_render_options
@click.option("--alpha", type=float, default=model.DEFAULT_ALPHA, show_default=True,
              help="Fraction of levels left unblended (1 = no guide blending).")
@click.option("--backend", type=click.Choice(["toy"]), default="toy",
              show_default=True, help="Denoiser backend (toy is the desk backend).")
@click.option("--out", type=click.Path(), default=None,
              help="Also copy the rendered PNG here.")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
@operational
def scene_render(cfg, scene_ref, steps, alpha, seed, guidance, backend, out, as_json):
    """Run the full pipeline for one scene and print the manifest path."""
    ws = _workspace(cfg)
    scene_id = _resolve_scene(ws, scene_ref)
    render_cfg = _make_render_config(steps, alpha, seed, guidance)
    result = engine.run_render(ws, scene_id, cfg, render_cfg)
    image_path = ws.store.path_for(result.manifest["output"]["image_sha256"])
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(image_path, out)
    if as_json:
        _echo_json(result.manifest)
    else:
        click.echo(f"render {result.render_id}")
        click.echo(f"manifest {result.manifest_path}")
        click.echo(f"image {out or image_path}")
        diag = result.manifest["diagnostics"]
        click.echo(
            f"fg_fidelity {diag['fg_fidelity']:.4f} seam_score {diag['seam_score']:.4f}"
        )


@scene.command("sweep")
@click.argument("scene_ref")
@_render_options
@click.option("--alphas", default=None,
              help="Comma-separated blend fractions (default preset "
                   + ",".join(str(a) for a in model.SWEEP_PRESET) + ").")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
@operational
def scene_sweep(cfg, scene_ref, steps, seed, guidance, alphas, as_json):
    """Render one scene at several blend fractions (same seed)."""
    ws = _workspace(cfg)
    scene_id = _resolve_scene(ws, scene_ref)
    render_cfg = _make_render_config(steps, model.DEFAULT_ALPHA, seed, guidance)
    parsed = None
    if alphas is not None:
        try:
            parsed = [float(a) for a in alphas.split(",") if a.strip()]
        except ValueError as exc:
            raise click.UsageError(f"bad --alphas: {exc}") from exc
    manifest, manifest_path, _ = engine.run_sweep(ws, scene_id, cfg, render_cfg, parsed)
    if as_json:
        _echo_json(manifest)
    else:
        click.echo(f"sweep {manifest['sweep_id']}")
        click.echo(f"manifest {manifest_path}")
        for entry in manifest["renders"]:
            click.echo(f"  alpha {entry['alpha']}: {entry['render_id']}")


# ---------------------------------------------------------------------------
# object + identity commands
# ---------------------------------------------------------------------------

@main.group()
def objects():
    """Per-object generation stage."""


@objects.command("generate")
@click.argument("scene_ref")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
@operational
def objects_generate(cfg, scene_ref, seed, as_json):
    """Generate each annotated object from its sketch crop."""
    ws = _workspace(cfg)
    scene_id = _resolve_scene(ws, scene_ref)
    spec = ws.load_scene(scene_id)
    engine.require_valid(spec, TOY_PROFILE.downsample_factor)
    assets = engine.generate_scene_objects(ws, spec, cfg, scene_seed=seed)
    rows = [
        {"object_id": a.object_id, "seed": a.seed, "attempts": a.attempts,
         "mask_px": int(a.mask.sum())}
        for a in assets
    ]
    if as_json:
        _echo_json({"scene_id": scene_id, "objects": rows})
    else:
        for row in rows:
            click.echo(
                f"{row['object_id']}\tseed {row['seed']}\t"
                f"attempts {row['attempts']}\tmask_px {row['mask_px']}"
            )


@main.group()
def identity():
    """Identity embedding training stage."""


@identity.command("train")
@click.argument("scene_ref")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--steps", type=int, default=model.DEFAULT_STEPS, show_default=True,
              help="Schedule length used for training noise levels.")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
@operational
def identity_train(cfg, scene_ref, seed, steps, as_json):
    """Fit one embedding per object and report loss window means."""
    from . import diffusion

    ws = _workspace(cfg)
    scene_id = _resolve_scene(ws, scene_ref)
    _, _, identities = engine.prepare_scene(
        ws, scene_id, cfg, seed=seed,
        train_steps_schedule=diffusion.make_schedule(steps),
    )
    report = json.loads(
        (ws.scene_dir(scene_id) / "identities.json").read_text()
    )
    if as_json:
        _echo_json(report)
    else:
        for oid, ident in sorted(identities.items()):
            means = report[oid].get("window_means", [])
            shown = ", ".join(f"{m:.5f}" for m in means)
            click.echo(
                f"{oid}\t{ident.token}\tsteps {ident.steps_trained}\twindows [{shown}]"
            )


# ---------------------------------------------------------------------------
# bench + serve
# ---------------------------------------------------------------------------

@main.group()
def bench():
    """Kernel and pipeline benchmarks."""


@bench.command("run")
@click.option("--size", type=int, default=bench_mod.DEFAULT_KERNEL_SIZE,
              show_default=True, help="Square array size for kernel timings.")
@click.option("--repeats", type=int, default=bench_mod.DEFAULT_REPEATS, show_default=True)
@click.option("--inner", type=int, default=bench_mod.DEFAULT_INNER, show_default=True)
@click.option("--seeds", default=None,
              help="Comma-separated pipeline seeds (default 0..50).")
@click.option("--json", "as_json", is_flag=True)
@operational
def bench_run(size, repeats, inner, seeds, as_json):
    """Time every kernel on both paths and the inference loop end to end."""
    seed_list = bench_mod.DEFAULT_SEEDS
    if seeds is not None:
        try:
            seed_list = [int(s) for s in seeds.split(",") if s.strip()]
        except ValueError as exc:
            raise click.UsageError(f"bad --seeds: {exc}") from exc
    doc = bench_mod.run(size=size, repeats=repeats, inner=inner, seeds=seed_list)
    if as_json:
        _echo_json(doc)
        return
    click.echo(f"configured backend: {doc['configured_backend']}")
    click.echo(f"paths: {', '.join(doc['paths'])}")
    for row in doc["results"]:
        times = "  ".join(
            f"{path} {seconds * 1e3:8.3f} ms" for path, seconds in row["seconds"].items()
        )
        speedup = f"  x{row['speedup']:.2f}" if "speedup" in row else ""
        click.echo(f"{row['name']:<32} {times}{speedup}")


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8787, show_default=True)
@click.pass_obj
def serve(cfg, host, port):
    """Run the HTTP service (blocks until interrupted)."""
    import uvicorn

    from .service import create_app

    kernels.warmup()
    uvicorn.run(create_app(cfg), host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
