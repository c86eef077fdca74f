"""HTTP service contract: endpoints, status codes, seeded determinism."""
import numpy as np
import pytest
from fastapi.testclient import TestClient

from layoutrag.core import Condition, layout_to_json
from layoutrag.index import build_index
from layoutrag.model.flow import ModelConfig, build_net
from layoutrag.pipeline import RetrievalPolicy, Task, TaskSpec, generate
from layoutrag.service import AppState, create_app
from layoutrag.synthetic import make_template_grid_dataset


@pytest.fixture(scope="module")
def world():
    schema, db, _ = make_template_grid_dataset(48, 8, seed=1)
    index = build_index(db, schema.size)
    net = build_net(
        ModelConfig(n_categories=5, d_model=32, n_layers_base=1, n_layers_ref=1, n_heads=4, seed=0)
    )
    return schema, db, index, net


@pytest.fixture(scope="module")
def client(world):
    schema, db, index, net = world
    state = AppState(schema=schema, db=db, index=index, net=net, policy=RetrievalPolicy())
    return TestClient(create_app(state))


def _ucond_payload(n, task="ucond", seed=0):
    return {
        "condition": {"slots": [{"category": None, "size": None, "position": None}] * n},
        "task": task,
        "seed": seed,
    }


class TestBasicEndpoints:
    def test_health(self, client):
        r = client.get("/health")
        assert r.status_code == 200 and r.json() == {"status": "ok"}

    def test_schema(self, client, world):
        schema, *_ = world
        r = client.get("/schema")
        assert r.status_code == 200
        assert r.json() == {"categories": list(schema.names)}

    def test_get_layout(self, client, world):
        schema, db, *_ = world
        r = client.get("/layouts/0")
        assert r.status_code == 200
        assert r.json() == layout_to_json(db[0], schema)

    def test_unknown_layout_404(self, client):
        assert client.get("/layouts/99999").status_code == 404


class TestRetrieveEndpoint:
    def test_ucond_returns_k_random(self, client):
        r = client.post("/retrieve", json={**_ucond_payload(3), "k": 5})
        assert r.status_code == 200
        body = r.json()
        assert len(body) == 5
        assert all(set(item) == {"id", "score", "layout"} for item in body)

    def test_malformed_body_is_400(self, client):
        r = client.post("/retrieve", json={"task": "ucond"})
        assert r.status_code == 400

    def test_invalid_condition_is_422(self, client):
        bad = {
            "condition": {"slots": [{"category": 99, "size": None, "position": None}]},
            "task": "c",
            "seed": 0,
        }
        assert client.post("/retrieve", json=bad).status_code == 422

    def test_unknown_task_is_422(self, client):
        assert client.post("/retrieve", json=_ucond_payload(2, task="noodle")).status_code == 422


class TestSimilarityEndpoint:
    def test_self_similarity(self, client, world):
        schema, db, *_ = world
        payload = {
            "a": layout_to_json(db[0], schema),
            "b": layout_to_json(db[0], schema),
            "mode": "full",
        }
        r = client.post("/similarity", json=payload)
        assert r.status_code == 200
        assert r.json()["score"] == 1.0


class TestGenerateEndpoint:
    def test_conditioned_slot_preserved(self, client, world):
        schema, db, *_ = world
        src = db[0].elements[0]
        payload = {
            "task": "completion",
            "condition": {
                "slots": [
                    {
                        "category": schema.names[src.category],
                        "size": [src.bbox.w, src.bbox.h],
                        "position": [src.bbox.cx, src.bbox.cy],
                    },
                    {"category": None, "size": None, "position": None},
                ]
            },
            "n_samples": 2,
            "seed": 5,
        }
        r = client.post("/generate", json=payload)
        assert r.status_code == 200
        body = r.json()
        assert len(body["layouts"]) == 2 and len(body["provenance"]) == 2
        want = {
            "category": schema.names[src.category],
            "cx": src.bbox.cx,
            "cy": src.bbox.cy,
            "w": src.bbox.w,
            "h": src.bbox.h,
        }
        for layout in body["layouts"]:
            assert any(
                {k: e[k] for k in want} == want for e in layout["elements"]
            )

    def test_identical_requests_identical_bodies(self, client):
        payload = {**_ucond_payload(3), "n_samples": 3, "seed": 21, "task": "ucond"}
        r1 = client.post("/generate", json=payload)
        r2 = client.post("/generate", json=payload)
        assert r1.status_code == r2.status_code == 200
        assert r1.content == r2.content

    def test_http_matches_library_call(self, client, world):
        schema, db, index, net = world
        payload = {**_ucond_payload(4), "n_samples": 2, "seed": 13}
        body = client.post("/generate", json=payload).json()
        spec = TaskSpec(
            task=Task.UCOND,
            condition=Condition.unconstrained(4),
            n_samples=2,
        )
        layouts, _ = generate(net, index, db, spec, RetrievalPolicy(), schema, seed=13)
        assert body["layouts"] == [layout_to_json(l, schema) for l in layouts]

    def test_no_checkpoint_is_409(self, world):
        schema, db, index, _ = world
        state = AppState(schema=schema, db=db, index=index, net=None, policy=RetrievalPolicy())
        bare = TestClient(create_app(state))
        r = bare.post("/generate", json=_ucond_payload(3))
        assert r.status_code == 409
        # retrieval still works without a checkpoint
        assert bare.post("/retrieve", json=_ucond_payload(3)).status_code == 200
