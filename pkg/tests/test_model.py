"""Scene model: validation rules, canonical JSON round-trip, disk io."""

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sketchscene import model
from sketchscene.errors import ParseError, SchemaVersionError


def make_scene(**kw):
    defaults = dict(
        scene_id="scene-1",
        background_text="in a room",
        width=64,
        height=48,
        created_at="2026-08-14T00:00:00+00:00",
        objects=[
            model.ObjectAnnotation(
                object_id="obj-1",
                class_label="chair",
                box=model.Box(4, 8, 16, 24),
                strokes=[[(5.0, 9.0), (12.0, 20.0)]],
            ),
            model.ObjectAnnotation(
                object_id="obj-2",
                class_label="table",
                box=model.Box(30, 10, 20, 20),
                prompt_text="a photo of a wooden table",
            ),
        ],
    )
    defaults.update(kw)
    return model.SceneSpec(**defaults)


class TestValidation:
    def test_valid_scene_has_no_violations(self):
        assert model.validate_scene(make_scene()) == []

    def test_catches_bad_ids_and_duplicates(self):
        scene = make_scene()
        scene.objects[1].object_id = "obj-1"
        codes = {v.code for v in model.validate_scene(scene)}
        assert "duplicate_object_id" in codes

        scene = make_scene(scene_id="has spaces!")
        codes = {v.code for v in model.validate_scene(scene)}
        assert "bad_scene_id" in codes

    def test_catches_box_problems(self):
        scene = make_scene()
        scene.objects[0].box = model.Box(60, 40, 10, 10)  # exceeds 64x48
        codes = {v.code for v in model.validate_scene(scene)}
        assert "box_out_of_bounds" in codes

        scene = make_scene()
        scene.objects[0].box = model.Box(0, 0, 0, 5)
        codes = {v.code for v in model.validate_scene(scene)}
        assert "empty_box" in codes

    def test_catches_empty_text(self):
        scene = make_scene(background_text="   ")
        assert {v.code for v in model.validate_scene(scene)} == {"empty_background"}
        scene = make_scene()
        scene.objects[0].class_label = ""
        assert "empty_class_label" in {v.code for v in model.validate_scene(scene)}

    def test_latent_factor_divisibility(self):
        scene = make_scene(width=65)
        codes = {v.code for v in model.validate_scene(scene, latent_factor=2)}
        assert "canvas_factor" in codes
        assert model.validate_scene(make_scene(), latent_factor=2) == []

    def test_sketch_dims_checked_when_attached(self):
        scene = make_scene()
        scene.sketch = np.full((48, 64), 255, np.uint8)
        assert model.validate_scene(scene) == []
        scene.sketch = np.full((10, 10), 255, np.uint8)
        assert "sketch_dims" in {v.code for v in model.validate_scene(scene)}

    def test_stroke_bounds(self):
        scene = make_scene()
        scene.objects[0].strokes = [[(0.0, 0.0), (200.0, 10.0)]]
        assert "stroke_out_of_bounds" in {v.code for v in model.validate_scene(scene)}

    def test_render_config_rules(self):
        assert model.validate_render_config(model.RenderConfig()) == []
        bad = model.RenderConfig(steps=0, alpha=1.5, seed=-1, guidance_scale=-2.0)
        codes = {v.code for v in model.validate_render_config(bad)}
        assert codes == {"bad_steps", "bad_alpha", "bad_seed", "bad_guidance"}


class TestSerialization:
    def test_round_trip_equality(self):
        scene = make_scene()
        data = model.serialize_scene(scene)
        back = model.deserialize_scene(data)
        assert back == scene
        assert model.serialize_scene(back) == data

    def test_canonical_after_one_pass(self):
        # Arbitrary formatting normalizes after one serialize.
        doc = model.scene_to_document(make_scene())
        loose = json.dumps(doc, separators=(",", ":")).encode()
        scene = model.deserialize_scene(loose)
        canon = model.serialize_scene(scene)
        assert model.serialize_scene(model.deserialize_scene(canon)) == canon

    def test_unknown_fields_preserved(self):
        doc = model.scene_to_document(make_scene())
        doc["x_custom"] = {"a": 1}
        scene = model.scene_from_document(doc)
        assert scene.extras == {"x_custom": {"a": 1}}
        out = json.loads(model.serialize_scene(scene))
        assert out["x_custom"] == {"a": 1}

    def test_parse_error_reports_offset(self):
        data = b'{"schema_version": 1, "scene_id": nope}'
        with pytest.raises(ParseError) as err:
            model.deserialize_scene(data)
        assert err.value.offset == data.index(b"nope")

    def test_schema_version_gate(self):
        doc = model.scene_to_document(make_scene())
        doc["schema_version"] = 99
        with pytest.raises(SchemaVersionError):
            model.scene_from_document(doc)

    def test_type_errors_are_parse_errors(self):
        doc = model.scene_to_document(make_scene())
        doc["width"] = "wide"
        with pytest.raises(ParseError, match="width"):
            model.scene_from_document(doc)
        doc = model.scene_to_document(make_scene())
        doc["objects"][0]["box"]["left"] = 1.5
        with pytest.raises(ParseError, match="left"):
            model.scene_from_document(doc)

    @settings(max_examples=50, deadline=None)
    @given(
        n_objects=st.integers(min_value=0, max_value=5),
        seed=st.integers(min_value=0, max_value=10_000),
        bg=st.text(
            alphabet=st.characters(categories=["L", "N", "Zs"]), min_size=1, max_size=40
        ),
    )
    def test_round_trip_property(self, n_objects, seed, bg):
        g = np.random.default_rng(seed)
        objects = []
        for k in range(n_objects):
            left = int(g.integers(0, 40))
            top = int(g.integers(0, 30))
            objects.append(
                model.ObjectAnnotation(
                    object_id=f"o{k}",
                    class_label="thing",
                    box=model.Box(left, top, int(g.integers(1, 64 - left + 1)),
                                  int(g.integers(1, 48 - top + 1))),
                    prompt_text=None if g.random() < 0.5 else "custom prompt",
                    strokes=None
                    if g.random() < 0.5
                    else [[(float(g.integers(0, 64)), float(g.integers(0, 48)))
                           for _ in range(3)]],
                )
            )
        scene = make_scene(background_text=bg, objects=objects)
        data = model.serialize_scene(scene)
        back = model.deserialize_scene(data)
        assert back == scene
        assert model.serialize_scene(back) == data


class TestDiskIO:
    def test_save_load_with_sketch(self, tmp_path):
        scene = make_scene()
        scene.sketch = model.render_strokes(scene)
        model.save_scene(scene, tmp_path)
        back = model.load_scene(tmp_path)
        assert back == scene
        assert np.array_equal(back.sketch, scene.sketch)

    def test_load_without_sketch_file(self, tmp_path):
        scene = make_scene()
        model.save_scene(scene, tmp_path)
        back = model.load_scene(tmp_path)
        assert back.sketch is None


class TestSketchHelpers:
    def test_render_strokes_puts_ink_inside_canvas(self):
        scene = make_scene()
        sketch = model.render_strokes(scene)
        assert sketch.shape == (48, 64)
        assert sketch.dtype == np.uint8
        assert (sketch < 128).any()

    def test_ink_mask_binary(self):
        scene = make_scene()
        mask = model.ink_mask(model.render_strokes(scene))
        assert set(np.unique(mask)) <= {0.0, 1.0}
        assert mask.sum() > 0

    def test_blank_sketch(self):
        s = model.blank_sketch(10, 6)
        assert s.shape == (6, 10)
        assert (s == 255).all()
