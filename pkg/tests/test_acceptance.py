"""Acceptance suite: one test per shipping criterion, tolerances pinned
inline.  The terminal summary (see conftest) prints one PASS/FAIL line
per criterion at the end of the run.

Criteria:
 1. Two-phase loop matches an independent scalar-loop reference
    (4x4x2 latent, T=10, alpha in {0, 0.3, 0.5, 1}) to <= 1e-6
    relative error, in under 5 s.
 2. alpha=1 is bit-identical to plain global-prompt sampling, under 1 s.
 3. During the blended phase, in-mask cells equal the forward-noised
    guide exactly and out-of-mask cells equal the background sampler
    step exactly, over >= 100 randomized cases.
 4. Masked loss: zero mask -> zero loss and gradient; full mask equals
    the plain MSE bitwise; analytic gradient matches central finite
    differences to <= 1e-4 relative on 20 random instances, under 10 s.
 5. Schedule/sampler algebra invariants hold over >= 1000 randomized
    cases in under 5 s (retention starts at 1, strictly decreases;
    sampling a forward-noised latent with the true noise steps down
    exactly; level 0 forward noising is the identity).
 6. Mask downsampling matches a per-block scalar oracle bit-for-bit on
    random 512x512 masks at factor 8; the composite guide's latent
    mask equals downsample_mask(union mask, 8); later objects win
    overlaps (paint order).
 7. End-to-end determinism and parity: the same scene rendered twice,
    and once each through the engine API, the CLI, and the HTTP
    service, produces byte-identical manifests and images.
 8. Default configuration: 50 levels, 512x512 canvas, alpha 0.5, sweep
    preset {0.4, 0.5, 0.6}, benchmark seeds 0..50.
 9. Identity training (50 steps) strictly decreases the 10-step window
    means of the masked loss on >= 90% of 20 randomized object assets.
"""

import json
import time

import numpy as np
import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

import oracles
from sketchscene import backend, bench, compose, diffusion, inference, model, training
from sketchscene.cli import main as cli_main
from sketchscene.config import PipelineConfig
from sketchscene.engine import Workspace, run_render
from sketchscene.objects import CropGeometry, ObjectAsset
from sketchscene.service import create_app


# ---------------------------------------------------------------------------
# shared scaffolding
# ---------------------------------------------------------------------------

def small_loop_inputs(toy, rng, steps=10, seed=11):
    sched = diffusion.make_schedule(steps)
    shape = (2, 4, 4)
    z_start = diffusion.initial_noise(shape, seed)
    guide_img = rng.integers(0, 256, (8, 8, 3), dtype=np.uint8)
    z_init = toy.encode_image(guide_img)
    m_init = (rng.random((4, 4)) < 0.5).astype(np.float64)
    m_init[0, 0] = 1.0
    m_init[3, 3] = 0.0
    v = rng.standard_normal(8)
    enc_g = toy.encode_prompt("a photo of a <o1> and table in a room", {"<o1>": v})
    enc_b = toy.encode_prompt("a photo of a room")
    return sched, z_start, z_init, m_init, enc_g, enc_b


def test_criterion_1_two_phase_loop_matches_scalar_reference():
    start = time.perf_counter()
    toy = backend.ToyBackend()
    rng = np.random.default_rng(101)
    seed = 11
    sched, z_start, z_init, m_init, enc_g, enc_b = small_loop_inputs(toy, rng, 10, seed)
    shape = z_start.shape
    fg_noise = [
        oracles.tolist3(diffusion.step_noise(shape, seed, lvl)) for lvl in range(10)
    ]
    worst = 0.0
    for alpha in (0.0, 0.3, 0.5, 1.0):
        got = inference.infer_scene_latent(
            toy, sched, z_start, z_init, m_init, enc_g, enc_b, alpha, seed
        )
        want = oracles.scene_inference(
            sched.alpha_bar.tolist(),
            sched.steps,
            alpha,
            oracles.tolist3(z_start),
            oracles.tolist3(toy.a_diag(shape)),
            oracles.tolist3(toy.cond_offset(enc_g, shape)),
            oracles.tolist3(toy.cond_offset(enc_b, shape)),
            oracles.tolist3(z_init),
            oracles.tolist2(m_init),
            fg_noise,
        )
        worst = max(worst, oracles.max_rel_err(got.tolist(), want, floor=1e-9))
    elapsed = time.perf_counter() - start
    assert worst <= 1e-6, f"worst relative error {worst:.3e} exceeds 1e-6"
    assert elapsed < 5.0, f"took {elapsed:.2f}s, budget 5s"


def test_criterion_2_alpha_one_equals_plain_sampling():
    start = time.perf_counter()
    toy = backend.ToyBackend()
    rng = np.random.default_rng(202)
    sched, z_start, z_init, m_init, enc_g, enc_b = small_loop_inputs(toy, rng)
    fused = inference.infer_scene_latent(
        toy, sched, z_start, z_init, m_init, enc_g, enc_b, alpha=1.0, seed=11
    )
    plain = inference.sample_plain(toy, sched, z_start, enc_g)
    elapsed = time.perf_counter() - start
    assert np.array_equal(fused, plain), (
        f"max abs diff {np.max(np.abs(fused - plain)):.3e} (required bit-identical, "
        f"tolerance 1e-12)"
    )
    assert np.max(np.abs(fused - plain)) <= 1e-12
    assert elapsed < 1.0, f"took {elapsed:.2f}s, budget 1s"


def test_criterion_3_blended_phase_exact_regions():
    toy = backend.ToyBackend()
    rng = np.random.default_rng(303)
    enc_b = toy.encode_prompt("a photo of a room")
    enc_g = toy.encode_prompt("a photo of a chair in a room")
    cases = 0
    blended_steps_checked = 0
    while cases < 100:
        steps = int(rng.integers(2, 11))
        h, w = int(rng.integers(2, 5)), int(rng.integers(2, 5))
        shape = (2, h, w)
        alpha = float(rng.choice([0.0, 0.25, 1.0 / 3.0, 0.5, rng.random()]))
        seed = int(rng.integers(0, 2**31 - 1))
        sched = diffusion.make_schedule(steps)
        z_start = diffusion.initial_noise(shape, seed)
        z_init = rng.standard_normal(shape)
        m = (rng.random((h, w)) < 0.5).astype(np.float64)
        m[0, 0] = 1.0
        m[-1, -1] = 0.0
        records = []
        inference.infer_scene_latent(
            toy, sched, z_start, z_init, m, enc_g, enc_b, alpha, seed,
            on_step=records.append,
        )
        blended = [r for r in records if r.phase == "blended"]
        assert [r.t for r in blended] == inference.blended_levels(steps, alpha)
        sel = m.astype(bool)
        for rec in blended:
            eps_t = diffusion.step_noise(shape, seed, rec.t - 1)
            want_fg = diffusion.forward_noise(sched, z_init, rec.t - 1, eps_t)
            assert np.array_equal(rec.z_fg, want_fg), "guide was not forward-noised exactly"
            assert np.array_equal(rec.z_out[:, sel], rec.z_fg[:, sel]), "in-mask not exact"
            assert np.array_equal(rec.z_out[:, ~sel], rec.z_bg[:, ~sel]), "out-of-mask not exact"
            blended_steps_checked += 1
        cases += 1
    assert cases >= 100
    assert blended_steps_checked > 100


def test_criterion_4_masked_loss_zero_full_and_gradient():
    start = time.perf_counter()
    toy = backend.ToyBackend()
    rng = np.random.default_rng(404)
    sched = diffusion.make_schedule(10)
    token = "<obj>"
    prompt = "a photo of a <obj> in a room"

    shape = (2, 4, 4)
    z0 = rng.standard_normal(shape)
    eps = rng.standard_normal(shape)
    v = rng.standard_normal(8)

    loss0, grad0 = training.loss_and_grad(
        toy, sched, z0, np.zeros(shape[1:]), token, v, prompt, 5, eps
    )
    assert loss0 == 0.0
    assert np.array_equal(grad0, np.zeros(8))

    enc = toy.encode_prompt(prompt, {token: v})
    z_t = diffusion.forward_noise(sched, z0, 5, eps)
    eps_hat = toy.predict_noise(z_t, 5, enc)
    full = training.masked_loss(eps, eps_hat, np.ones(shape[1:]))
    plain = float(np.mean((eps - eps_hat) ** 2))
    assert full == plain, "full-mask loss must equal the plain MSE bitwise"

    worst = 0.0
    for _ in range(20):
        h, w = int(rng.integers(2, 5)), int(rng.integers(2, 5))
        shape = (2, h, w)
        z0 = rng.standard_normal(shape)
        eps = rng.standard_normal(shape)
        mask = (rng.random((h, w)) < 0.6).astype(np.float64)
        mask[0, 0] = 1.0
        v = rng.standard_normal(8)
        t = int(rng.integers(1, sched.steps + 1))
        _, grad = training.loss_and_grad(
            toy, sched, z0, mask, token, v, prompt, t, eps
        )
        step = 1e-4
        fd = np.empty(8)
        for i in range(8):
            vp, vm = v.copy(), v.copy()
            vp[i] += step
            vm[i] -= step
            lp, _ = training.loss_and_grad(toy, sched, z0, mask, token, vp, prompt, t, eps)
            lm, _ = training.loss_and_grad(toy, sched, z0, mask, token, vm, prompt, t, eps)
            fd[i] = (lp - lm) / (2.0 * step)
        denom = max(float(np.max(np.abs(grad))), 1e-8)
        worst = max(worst, float(np.max(np.abs(fd - grad))) / denom)
    elapsed = time.perf_counter() - start
    assert worst <= 1e-4, f"worst relative gradient error {worst:.3e} exceeds 1e-4"
    assert elapsed < 10.0, f"took {elapsed:.2f}s, budget 10s"


def test_criterion_5_schedule_and_sampler_algebra():
    start = time.perf_counter()
    rng = np.random.default_rng(505)
    cases = 0

    step_counts = [1, 2, 1000] + [int(rng.integers(1, 1001)) for _ in range(697)]
    for steps in step_counts:
        sched = diffusion.make_schedule(steps)
        ab = sched.alpha_bar
        assert ab[0] == 1.0
        assert np.all(np.diff(ab) < 0.0), f"retention not strictly decreasing at T={steps}"
        assert 0.0 < ab[-1] <= 0.05
        cases += 1

    for _ in range(300):
        steps = int(rng.integers(1, 61))
        sched = diffusion.make_schedule(steps)
        t = int(rng.integers(1, steps + 1))
        z0 = rng.standard_normal((2, 3, 3))
        eps = rng.standard_normal((2, 3, 3))
        z_t = diffusion.forward_noise(sched, z0, t, eps)
        stepped = diffusion.sampler_step(sched, z_t, eps, t)
        want = diffusion.forward_noise(sched, z0, t - 1, eps)
        assert np.max(np.abs(stepped - want)) <= 1e-12, (
            f"sampling back a forward-noised latent missed at T={steps}, t={t}"
        )
        assert np.array_equal(diffusion.forward_noise(sched, z0, 0, eps), z0)
        cases += 1

    elapsed = time.perf_counter() - start
    assert cases >= 1000
    assert elapsed < 5.0, f"took {elapsed:.2f}s, budget 5s"


def _solid_asset(object_id, label, box, color):
    image = np.zeros((box.height, box.width, 3), np.uint8)
    image[:] = color
    return ObjectAsset(
        object_id=object_id,
        class_label=label,
        prompt=f"a photo of a {label}",
        seed=0,
        attempts=1,
        geometry=CropGeometry(box=box, canvas=box.width, scale=1, pad_left=0, pad_top=0),
        image=image,
        mask=np.ones((box.height, box.width), np.float64),
    )


def test_criterion_6_mask_pipeline_and_paint_order():
    rng = np.random.default_rng(606)

    mask = (rng.random((512, 512)) < 0.5).astype(np.float64)
    # plant an exact half-coverage tie (32 of 64 pixels): rounds up to 1
    mask[0:8, 0:8] = 0.0
    mask[0:4, 0:8] = 1.0
    got = diffusion.downsample_mask(mask, 8)
    want = np.array(oracles.downsample_mask(oracles.tolist2(mask), 8))
    assert np.array_equal(got, want), "factor-8 downsample differs from scalar oracle"
    assert got[0, 0] == 1.0

    box_a = model.Box(8, 8, 16, 16)
    box_b = model.Box(16, 16, 16, 16)
    scene = model.SceneSpec(
        scene_id="overlap",
        background_text="in a room",
        width=64,
        height=64,
        created_at="2026-01-01T00:00:00+00:00",
        objects=[
            model.ObjectAnnotation("a", "cat", box_a),
            model.ObjectAnnotation("b", "dog", box_b),
        ],
    )
    assets = [
        _solid_asset("a", "cat", box_a, (200, 10, 10)),
        _solid_asset("b", "dog", box_b, (10, 10, 200)),
    ]
    guide = compose.compose_guide(scene, assets)
    # paint order: the later object owns the overlap
    assert tuple(guide.image[20, 20]) == (10, 10, 200)
    assert tuple(guide.image[10, 10]) == (200, 10, 10)
    assert guide.mask[10, 10] == 1.0 and guide.mask[40, 40] == 0.0
    overlap = guide.mask[16:24, 16:24]
    assert np.all(overlap == 1.0)

    profile8 = backend.BackendProfile(
        name="toy-f8", latent_channels=2, downsample_factor=8,
        embedding_dim=8, max_prompt_tokens=77, supports_identity_training=True,
    )
    toy8 = backend.ToyBackend(profile8)
    _, m_init = compose.guide_latents(guide, toy8)
    assert np.array_equal(m_init, diffusion.downsample_mask(guide.mask, 8))
    assert np.array_equal(
        m_init, np.array(oracles.downsample_mask(oracles.tolist2(guide.mask), 8))
    )


def _parity_scene_doc():
    scene = model.SceneSpec(
        scene_id="parity",
        background_text="in a courtyard",
        width=64,
        height=64,
        created_at="2026-01-01T00:00:00+00:00",
        objects=[
            model.ObjectAnnotation(
                "cat", "cat", model.Box(8, 8, 20, 24),
                strokes=[[(10.0, 10.0), (24.0, 28.0)], [(12.0, 26.0), (22.0, 12.0)]],
            ),
            model.ObjectAnnotation(
                "vase", "vase", model.Box(36, 28, 16, 20),
                strokes=[[(38.0, 30.0), (48.0, 44.0)]],
            ),
        ],
    )
    return scene


def _manifest_and_image(project_root, render_id):
    ws = Workspace(project_root)
    manifest_path = ws.scene_dir("parity") / "renders" / render_id / "manifest.json"
    manifest_bytes = manifest_path.read_bytes()
    digest = json.loads(manifest_bytes)["output"]["image_sha256"]
    return manifest_bytes, ws.store.get_bytes(digest)


def test_criterion_7_determinism_and_cli_service_parity(tmp_path):
    scene = _parity_scene_doc()
    params = {"steps": 6, "alpha": 0.5, "seed": 3}
    render_cfg = model.RenderConfig(**params)

    # engine lane, twice in separate workspaces
    engine_ids = []
    for name in ("w1", "w1b"):
        cfg = PipelineConfig(project_root=str(tmp_path / name))
        ws = Workspace(cfg.project_root)
        ws.save_scene(scene)
        result = run_render(ws, "parity", cfg, render_cfg)
        engine_ids.append(result.render_id)
    assert engine_ids[0] == engine_ids[1]
    m1, img1 = _manifest_and_image(tmp_path / "w1", engine_ids[0])
    m1b, img1b = _manifest_and_image(tmp_path / "w1b", engine_ids[1])
    assert m1 == m1b, "re-render produced different manifest bytes"
    assert img1 == img1b, "re-render produced different image bytes"

    # CLI lane
    scene_dir = tmp_path / "scene-src"
    model.save_scene(scene, scene_dir)
    runner = CliRunner()
    res = runner.invoke(
        cli_main,
        ["--project", str(tmp_path / "w2"), "scene", "render", str(scene_dir),
         "--backend", "toy", "--steps", "6", "--alpha", "0.5", "--seed", "3",
         "--json"],
    )
    assert res.exit_code == 0, res.output
    cli_render_id = json.loads(res.output)["render_id"]
    assert cli_render_id == engine_ids[0]
    m2, img2 = _manifest_and_image(tmp_path / "w2", cli_render_id)
    assert m2 == m1, "CLI manifest differs from engine manifest"
    assert img2 == img1, "CLI image differs from engine image"

    # service lane
    app = create_app(PipelineConfig(project_root=str(tmp_path / "w3"), workers=1))
    with TestClient(app) as client:
        r = client.post("/scenes", json={"document": model.scene_to_document(scene)})
        assert r.status_code == 201, r.text
        r = client.post("/scenes/parity/jobs", json={"kind": "render", "params": params})
        job_id = r.json()["job_id"]
        deadline = time.monotonic() + 60
        while time.monotonic() < deadline:
            doc = client.get(f"/jobs/{job_id}").json()
            if doc["status"] in ("succeeded", "failed", "cancelled"):
                break
            time.sleep(0.02)
        assert doc["status"] == "succeeded", doc.get("error")
        service_render_id = doc["result"]["render_id"]
        assert service_render_id == engine_ids[0]
        digest = doc["result"]["output"]["image_sha256"]
        img3_http = client.get(f"/artifacts/{digest}").content
    m3, img3 = _manifest_and_image(tmp_path / "w3", service_render_id)
    assert m3 == m1, "service manifest differs from engine manifest"
    assert img3 == img1 == img3_http, "service image differs from engine image"


def test_criterion_8_default_configuration():
    assert model.DEFAULT_STEPS == 50
    assert model.DEFAULT_CANVAS == 512
    assert model.DEFAULT_ALPHA == 0.5
    assert model.SWEEP_PRESET == (0.4, 0.5, 0.6)

    cfg = model.RenderConfig()
    assert cfg.steps == 50
    assert cfg.alpha == 0.5
    assert model.validate_render_config(cfg) == []

    scene = model.SceneSpec(scene_id="s", background_text="in a room")
    assert (scene.width, scene.height) == (512, 512)

    assert inference.sweep_alphas(None) == [0.4, 0.5, 0.6]

    assert list(bench.DEFAULT_SEEDS) == list(range(51))
    doc = bench.run(size=16, repeats=1, inner=1, pipeline_size=16, pipeline_steps=2)
    assert doc["seeds"] == list(range(51))


def test_criterion_9_identity_training_descends():
    start = time.perf_counter()
    toy = backend.ToyBackend()
    sched = diffusion.make_schedule(50)
    rng = np.random.default_rng(909)
    decreasing = 0
    for k in range(20):
        img = rng.integers(0, 256, (32, 32, 3), dtype=np.uint8)
        mask = np.zeros((32, 32), np.float64)
        top = int(rng.integers(0, 16))
        left = int(rng.integers(0, 16))
        mask[top : top + 16, left : left + 16] = 1.0
        z0 = toy.encode_image(img)
        latent_mask = diffusion.downsample_mask(mask, toy.profile.downsample_factor)
        cfg = training.TrainConfig(steps=50, lr=0.02, seed=k, window=10)
        _, trace = training.train_identity(
            toy, sched, z0, latent_mask, f"<obj{k}>", "widget", cfg
        )
        assert len(trace.losses) == 50
        assert len(trace.window_means()) == 5
        decreasing += trace.windows_strictly_decreasing()
    elapsed = time.perf_counter() - start
    assert decreasing >= 18, f"only {decreasing}/20 assets had strictly decreasing windows"
    assert elapsed < 30.0, f"took {elapsed:.2f}s"
