"""HTTP API tests: scene CRUD with revisions, job lifecycle through the
worker pool, idempotent submission, events, and artifact serving."""

import base64
import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from sketchscene import model, pngio
from sketchscene.config import PipelineConfig
from sketchscene.service import create_app


def make_scene_doc(scene_id="scene-a", size=32):
    scene = model.SceneSpec(
        scene_id=scene_id,
        background_text="in a courtyard",
        width=size,
        height=size,
        created_at="2026-01-01T00:00:00+00:00",
        objects=[
            model.ObjectAnnotation(
                object_id="cat",
                class_label="cat",
                box=model.Box(4, 4, 10, 12),
                strokes=[[(5.0, 5.0), (12.0, 14.0)]],
            ),
            model.ObjectAnnotation(
                object_id="vase",
                class_label="vase",
                box=model.Box(18, 14, 8, 10),
                strokes=[[(19.0, 15.0), (24.0, 22.0)]],
            ),
        ],
    )
    return model.scene_to_document(scene)


@pytest.fixture()
def client(tmp_path):
    cfg = PipelineConfig(
        project_root=str(tmp_path / "proj"),
        object_canvas=16,
        workers=2,
        train={"steps": 4, "lr": 0.02, "seed": 0, "window": 2},
    )
    app = create_app(cfg)
    with TestClient(app) as c:
        yield c


def wait_job(client, job_id, timeout=30.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        doc = client.get(f"/jobs/{job_id}").json()
        if doc["status"] in ("succeeded", "failed", "cancelled"):
            return doc
        time.sleep(0.02)
    raise AssertionError(f"job {job_id} did not settle: {doc}")


def test_healthz_and_capabilities(client):
    assert client.get("/healthz").json() == {"status": "ok"}
    caps = client.get("/capabilities").json()
    assert caps["backend_profile"]["name"] == "toy"
    assert caps["defaults"]["sweep"] == [0.4, 0.5, 0.6]
    assert caps["defaults"]["steps"] == 50


def test_scene_crud_with_revisions(client):
    doc = make_scene_doc()
    r = client.post("/scenes", json={"document": doc})
    assert r.status_code == 201
    assert r.json() == {"scene_id": "scene-a", "revision": 1}

    # duplicate id
    assert client.post("/scenes", json={"document": doc}).status_code == 409

    got = client.get("/scenes/scene-a").json()
    assert got["revision"] == 1
    assert got["document"]["background_text"] == "in a courtyard"
    assert got["has_sketch"] is False

    # update with the right revision
    doc2 = dict(doc, background_text="in a garden")
    r = client.put("/scenes/scene-a", json={"document": doc2, "revision": 1})
    assert r.status_code == 200
    assert r.json()["revision"] == 2

    # stale revision rejected
    r = client.put("/scenes/scene-a", json={"document": doc2, "revision": 1})
    assert r.status_code == 409
    assert "revision" in r.json()["error"]["message"]

    # mismatched path/document id rejected
    other = dict(doc2, scene_id="scene-b")
    r = client.put("/scenes/scene-a", json={"document": other, "revision": 2})
    assert r.status_code == 409

    listing = client.get("/scenes").json()["scenes"]
    assert listing == [{"scene_id": "scene-a", "revision": 2}]

    assert client.get("/scenes/nope").status_code == 404


def test_scene_validation_errors(client):
    doc = make_scene_doc()
    doc["objects"][0]["box"] = {"left": -3, "top": 4, "width": 10, "height": 12}
    r = client.post("/scenes", json={"document": doc})
    assert r.status_code == 422
    codes = {v["code"] for v in r.json()["error"]["violations"]}
    assert "box_out_of_bounds" in codes

    r = client.post("/scenes", json={"document": {"schema_version": 99}})
    assert r.status_code == 400


def test_sketch_upload_roundtrip(client):
    doc = make_scene_doc()
    sketch = np.full((32, 32), 255, np.uint8)
    sketch[5:15, 5:15] = 0
    b64 = base64.b64encode(pngio.to_png_bytes(sketch)).decode()
    r = client.post("/scenes", json={"document": doc, "sketch_png_b64": b64})
    assert r.status_code == 201
    assert client.get("/scenes/scene-a").json()["has_sketch"] is True

    got = client.get("/scenes/scene-a/sketch")
    assert got.status_code == 200
    assert got.headers["content-type"] == "image/png"
    back = pngio.from_png_bytes(got.content, "L")
    np.testing.assert_array_equal(back, sketch)

    # update without a new sketch keeps the old one
    doc2 = dict(doc, background_text="in a garden")
    client.put("/scenes/scene-a", json={"document": doc2, "revision": 1})
    assert client.get("/scenes/scene-a").json()["has_sketch"] is True

    r = client.post(
        "/scenes", json={"document": make_scene_doc("s2"), "sketch_png_b64": "!!!"}
    )
    assert r.status_code == 400


def test_render_job_lifecycle(client):
    client.post("/scenes", json={"document": make_scene_doc()})
    r = client.post(
        "/scenes/scene-a/jobs",
        json={"kind": "render", "params": {"steps": 6, "alpha": 0.5, "seed": 3}},
    )
    assert r.status_code == 202
    job = wait_job(client, r.json()["job_id"])
    assert job["status"] == "succeeded"
    render_id = job["result"]["render_id"]
    assert render_id.startswith("r-")

    renders = client.get("/scenes/scene-a/renders").json()["renders"]
    assert any(m.get("render_id") == render_id for m in renders)

    digest = job["result"]["output"]["image_sha256"]
    art = client.get(f"/artifacts/{digest}")
    assert art.status_code == 200
    assert art.headers["content-type"] == "image/png"
    img = pngio.from_png_bytes(art.content, "RGB")
    assert img.shape == (32, 32, 3)

    assert client.get("/artifacts/" + "0" * 64).status_code == 404


def test_job_validation_and_unknown_kind(client):
    client.post("/scenes", json={"document": make_scene_doc()})
    r = client.post(
        "/scenes/scene-a/jobs", json={"kind": "render", "params": {"alpha": 2.0}}
    )
    assert r.status_code == 422
    r = client.post("/scenes/scene-a/jobs", json={"kind": "explode", "params": {}})
    assert r.status_code == 422
    r = client.post("/scenes/missing/jobs", json={"kind": "render", "params": {}})
    assert r.status_code == 404
    r = client.post(
        "/scenes/scene-a/jobs", json={"kind": "sweep", "params": {"alphas": [1.5]}}
    )
    assert r.status_code == 422


def test_idempotent_submission(client):
    client.post("/scenes", json={"document": make_scene_doc()})
    body = {"kind": "objects", "params": {"seed": 1}}
    headers = {"Idempotency-Key": "abc"}
    first = client.post("/scenes/scene-a/jobs", json=body, headers=headers)
    assert first.status_code == 202
    again = client.post("/scenes/scene-a/jobs", json=body, headers=headers)
    assert again.status_code == 200
    assert again.json()["job_id"] == first.json()["job_id"]
    job = wait_job(client, first.json()["job_id"])
    assert job["status"] == "succeeded"
    assert {o["object_id"] for o in job["result"]["objects"]} == {"cat", "vase"}


def test_train_job_reports_identities(client):
    client.post("/scenes", json={"document": make_scene_doc()})
    r = client.post(
        "/scenes/scene-a/jobs", json={"kind": "train", "params": {"steps": 6}}
    )
    job = wait_job(client, r.json()["job_id"])
    assert job["status"] == "succeeded"
    idents = job["result"]["identities"]
    assert idents["cat"]["token"] == "<cat>"
    assert idents["cat"]["steps_trained"] == 4


def test_sweep_job(client):
    client.post("/scenes", json={"document": make_scene_doc()})
    r = client.post(
        "/scenes/scene-a/jobs",
        json={"kind": "sweep", "params": {"steps": 4, "alphas": [0.0, 1.0]}},
    )
    job = wait_job(client, r.json()["job_id"])
    assert job["status"] == "succeeded"
    entries = job["result"]["renders"]
    assert [e["alpha"] for e in entries] == [0.0, 1.0]
    assert entries[0]["render_id"] != entries[1]["render_id"]


def test_cancel_and_job_listing(tmp_path):
    # no lifespan context -> no worker threads, so queue state is deterministic
    cfg = PipelineConfig(project_root=str(tmp_path / "proj"), object_canvas=16)
    client = TestClient(create_app(cfg))
    client.post("/scenes", json={"document": make_scene_doc()})
    assert client.get("/scenes/scene-a/jobs").json()["jobs"] == []
    r = client.post("/scenes/scene-a/jobs", json={"kind": "objects", "params": {}})
    job_id = r.json()["job_id"]
    cancel = client.post(f"/jobs/{job_id}/cancel")
    assert cancel.status_code == 200
    assert cancel.json()["status"] == "cancelled"
    jobs = client.get("/scenes/scene-a/jobs").json()["jobs"]
    assert [j["job_id"] for j in jobs] == [job_id]
    assert jobs[0]["status"] == "cancelled"
    assert client.get("/jobs/j-999999").status_code == 404


def test_event_stream(client):
    client.post("/scenes", json={"document": make_scene_doc()})
    r = client.post("/scenes/scene-a/jobs", json={"kind": "objects", "params": {}})
    wait_job(client, r.json()["job_id"])
    resp = client.get("/events", params={"after": 0, "timeout": 0})
    assert resp.status_code == 200
    events = [json.loads(line) for line in resp.text.splitlines()]
    kinds = [e["type"] for e in events]
    assert "job_queued" in kinds
    assert "job_succeeded" in kinds
    seqs = [e["event_seq"] for e in events]
    assert seqs == sorted(seqs)
    # incremental poll sees nothing new
    resp = client.get("/events", params={"after": seqs[-1], "timeout": 0})
    assert resp.text == ""


def test_failed_job_records_error(client):
    doc = make_scene_doc("scene-bad")
    client.post("/scenes", json={"document": doc})
    # corrupt the stored scene after creation: remove strokes and sketch so
    # object generation sees an all-white crop -> empty segmentation mask
    doc_no_ink = dict(doc)
    doc_no_ink["objects"] = [
        dict(o, strokes=[]) for o in doc_no_ink["objects"]
    ]
    client.put("/scenes/scene-bad", json={"document": doc_no_ink, "revision": 1})
    r = client.post("/scenes/scene-bad/jobs", json={"kind": "objects", "params": {}})
    job = wait_job(client, r.json()["job_id"])
    assert job["status"] == "failed"
    assert job["attempts"] == 2  # one retry
    assert job["error"]["type"] == "ObjectGenerationError"
