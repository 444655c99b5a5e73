"""Two-phase sampling loop: prompt pairs, phase boundary, scalar-oracle
equivalence, blended-phase exactness."""

import numpy as np
import pytest

import oracles
from sketchscene import backend, diffusion, inference, model
from sketchscene.errors import RangeError, ShapeError


@pytest.fixture()
def toy():
    return backend.ToyBackend()


def make_scene(objects=None, bg="in a room"):
    return model.SceneSpec(
        scene_id="s1",
        background_text=bg,
        width=8,
        height=8,
        created_at="2026-08-14T00:00:00+00:00",
        objects=objects if objects is not None else [],
    )


def ann(oid, label):
    return model.ObjectAnnotation(oid, label, model.Box(0, 0, 4, 4))


class TestPromptPair:
    def test_two_objects_single_article(self):
        scene = make_scene([ann("o1", "chair"), ann("o2", "table")])
        pair = inference.build_prompt_pair(scene)
        assert pair.global_text == "a photo of a chair and table in a room"
        assert pair.background_text == "a photo of a room"

    def test_identity_tokens_substitute_class_labels(self):
        scene = make_scene([ann("o1", "chair"), ann("o2", "table")])
        pair = inference.build_prompt_pair(scene, {"o1": "<o1>"})
        assert pair.global_text == "a photo of a <o1> and table in a room"

    def test_background_preposition_stripped_once(self):
        assert inference.background_prompt("in a room") == "a photo of a room"
        assert inference.background_prompt("on a beach") == "a photo of a beach"
        assert inference.background_prompt("a dark cave") == "a photo of a dark cave"

    def test_no_objects_falls_back_to_background(self):
        pair = inference.build_prompt_pair(make_scene([]))
        assert pair.global_text == pair.background_text == "a photo of a room"

    def test_class_labels_normalized(self):
        scene = make_scene([ann("o1", " Chair ")])
        pair = inference.build_prompt_pair(scene)
        assert pair.global_text == "a photo of a chair in a room"


class TestPhaseBoundary:
    def test_alpha_extremes(self):
        assert inference.blended_levels(10, 1.0) == []
        assert inference.blended_levels(10, 0.0) == list(range(10, 0, -1))

    def test_boundary_is_strict(self):
        # alpha*T = 3.0 exactly: t = 3 is NOT blended.
        assert inference.blended_levels(10, 0.3) == [10, 9, 8, 7, 6, 5, 4]
        assert inference.blended_levels(10, 0.5) == [10, 9, 8, 7, 6]

    def test_matches_float_expression(self):
        for steps in [7, 10, 50]:
            for alpha in [0.0, 0.1, 0.25, 1 / 3, 0.5, 0.7, 1.0]:
                got = inference.blended_levels(steps, alpha)
                want = [t for t in range(steps, 0, -1) if t > alpha * steps]
                assert got == want


def loop_inputs(toy, rng, steps=10, seed=11):
    sched = diffusion.make_schedule(steps)
    shape = (2, 4, 4)
    z_start = diffusion.initial_noise(shape, seed)
    guide_img = rng.integers(0, 256, (8, 8, 3), dtype=np.uint8)
    z_init = toy.encode_image(guide_img)
    m_init = (rng.random((4, 4)) < 0.5).astype(np.float64)
    m_init[0, 0] = 1.0  # keep both regions non-trivial
    m_init[3, 3] = 0.0
    v = rng.standard_normal(8)
    enc_g = toy.encode_prompt("a photo of a <o1> and table in a room", {"<o1>": v})
    enc_b = toy.encode_prompt("a photo of a room")
    return sched, z_start, z_init, m_init, enc_g, enc_b


class TestLoopAgainstScalarOracle:
    @pytest.mark.parametrize("alpha", [0.0, 0.3, 0.5, 1.0])
    def test_matches_oracle(self, toy, rng, alpha):
        sched, z_start, z_init, m_init, enc_g, enc_b = loop_inputs(toy, rng)
        seed = 11
        got = inference.infer_scene_latent(
            toy, sched, z_start, z_init, m_init, enc_g, enc_b, alpha, seed
        )
        shape = z_start.shape
        fg_noise = [
            oracles.tolist3(diffusion.step_noise(shape, seed, lvl))
            for lvl in range(sched.steps)
        ]
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
        assert oracles.max_rel_err(got.tolist(), want, floor=1e-9) <= 1e-6

    def test_alpha_one_equals_plain_sampling(self, toy, rng):
        sched, z_start, z_init, m_init, enc_g, enc_b = loop_inputs(toy, rng)
        fused = inference.infer_scene_latent(
            toy, sched, z_start, z_init, m_init, enc_g, enc_b, 1.0, seed=11
        )
        plain = inference.sample_plain(toy, sched, z_start, enc_g)
        assert np.array_equal(fused, plain)

    def test_deterministic(self, toy, rng):
        sched, z_start, z_init, m_init, enc_g, enc_b = loop_inputs(toy, rng)
        a = inference.infer_scene_latent(
            toy, sched, z_start, z_init, m_init, enc_g, enc_b, 0.5, seed=3
        )
        b = inference.infer_scene_latent(
            toy, sched, z_start, z_init, m_init, enc_g, enc_b, 0.5, seed=3
        )
        assert np.array_equal(a, b)


class TestBlendedPhaseExactness:
    def test_hook_records_exact_regions(self, toy, rng):
        sched, z_start, z_init, m_init, enc_g, enc_b = loop_inputs(toy, rng)
        seed = 11
        records = []
        inference.infer_scene_latent(
            toy, sched, z_start, z_init, m_init, enc_g, enc_b, 0.5, seed,
            on_step=records.append,
        )
        sel = m_init.astype(bool)
        blended = [r for r in records if r.phase == "blended"]
        assert [r.t for r in blended] == inference.blended_levels(10, 0.5)
        for rec in blended:
            want_fg = diffusion.forward_noise(
                sched, z_init, rec.t - 1,
                diffusion.step_noise(z_init.shape, seed, rec.t - 1),
            )
            assert np.array_equal(rec.z_fg, want_fg)
            assert np.array_equal(rec.z_out[:, sel], rec.z_fg[:, sel])
            assert np.array_equal(rec.z_out[:, ~sel], rec.z_bg[:, ~sel])

    def test_alpha_zero_final_latent_is_guide_inside_mask(self, toy, rng):
        sched, z_start, z_init, m_init, enc_g, enc_b = loop_inputs(toy, rng)
        out = inference.infer_scene_latent(
            toy, sched, z_start, z_init, m_init, enc_g, enc_b, 0.0, seed=5
        )
        sel = m_init.astype(bool)
        assert np.array_equal(out[:, sel], z_init[:, sel])

    def test_global_phase_records_no_regions(self, toy, rng):
        sched, z_start, z_init, m_init, enc_g, enc_b = loop_inputs(toy, rng)
        records = []
        inference.infer_scene_latent(
            toy, sched, z_start, z_init, m_init, enc_g, enc_b, 0.5, 11,
            on_step=records.append,
        )
        for rec in records:
            if rec.phase == "global":
                assert rec.z_bg is None and rec.z_fg is None


class TestValidationAndSweep:
    def test_alpha_range(self, toy, rng):
        sched, z_start, z_init, m_init, enc_g, enc_b = loop_inputs(toy, rng)
        with pytest.raises(RangeError):
            inference.infer_scene_latent(
                toy, sched, z_start, z_init, m_init, enc_g, enc_b, 1.5, 0
            )

    def test_shape_mismatch(self, toy, rng):
        sched, z_start, z_init, m_init, enc_g, enc_b = loop_inputs(toy, rng)
        with pytest.raises(ShapeError):
            inference.infer_scene_latent(
                toy, sched, z_start, z_init[:, :2], m_init, enc_g, enc_b, 0.5, 0
            )

    def test_sweep_default_preset(self):
        assert inference.sweep_alphas(None) == [0.4, 0.5, 0.6]
        assert inference.sweep_alphas([0.1, 0.9]) == [0.1, 0.9]
        with pytest.raises(RangeError):
            inference.sweep_alphas([1.2])
        with pytest.raises(RangeError):
            inference.sweep_alphas([])


class TestDiagnostics:
    def test_perfect_foreground_scores_zero_fidelity(self):
        guide = np.full((8, 8, 3), 255, np.uint8)
        guide[2:6, 2:6] = 30
        mask = np.zeros((8, 8))
        mask[2:6, 2:6] = 1.0
        out = inference.diagnostics(guide.copy(), guide, mask)
        assert out["fg_fidelity"] == 0.0
        assert out["seam_score"] == pytest.approx((255 - 30) / 255)

    def test_empty_mask_scores_zero(self):
        img = np.zeros((4, 4, 3), np.uint8)
        out = inference.diagnostics(img, img, np.zeros((4, 4)))
        assert out == {"fg_fidelity": 0.0, "seam_score": 0.0}
