"""Read-only HTTP service over a loaded database, index, and checkpoint.

All state is immutable after startup; every request carries its own seed,
so identical requests return identical bodies.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .core import (
    BBox,
    CategorySchema,
    Condition,
    Element,
    Layout,
    layout_to_json,
    parse_condition_record,
)
from .errors import ConditionError, LayoutRagError
from .index import LayoutIndex
from .matching import GeometryMode, layout_similarity
from .model.flow import VectorFieldNet
from .pipeline import RetrievalPolicy, Task, TaskSpec, generate, retrieve, validate_task_condition

TASK_ALIASES = {
    "ucond": Task.UCOND,
    "c": Task.C_TO_SP,
    "cs": Task.CS_TO_P,
    "completion": Task.COMPLETION,
    "c_to_sp": Task.C_TO_SP,
    "cs_to_p": Task.CS_TO_P,
}


def parse_task(name: str) -> Task:
    try:
        return TASK_ALIASES[name.lower()]
    except KeyError:
        raise ConditionError(f"unknown task {name!r}") from None


@dataclass
class AppState:
    schema: CategorySchema
    db: Sequence[Layout]
    index: LayoutIndex
    net: VectorFieldNet | None
    policy: RetrievalPolicy


class SlotModel(BaseModel):
    category: str | int | None = None
    size: tuple[float, float] | None = None
    position: tuple[float, float] | None = None


class ConditionModel(BaseModel):
    n_elements: int | None = None
    slots: list[SlotModel]


class RetrieveRequest(BaseModel):
    condition: ConditionModel
    task: str
    k: int | None = None
    seed: int = 0


class ElementModel(BaseModel):
    category: str | int
    cx: float
    cy: float
    w: float
    h: float


class LayoutModel(BaseModel):
    id: str | None = None
    elements: list[ElementModel]


class SimilarityRequest(BaseModel):
    a: LayoutModel
    b: LayoutModel
    mode: Literal["full", "size", "type"] = "full"


class PolicyOverrides(BaseModel):
    k: int | None = None
    tau_reuse: float | None = None
    tau_ref: float | None = None
    sim_cap: float | None = None


class GenerateRequest(BaseModel):
    condition: ConditionModel | None = None
    task: str
    policy_overrides: PolicyOverrides | None = None
    n_samples: int = Field(default=1, ge=1, le=256)
    seed: int = 0


def _category_index(value: str | int, schema: CategorySchema) -> int:
    if isinstance(value, str):
        return schema.index_of(value)
    idx = int(value)
    if not 0 <= idx < schema.size:
        raise ConditionError(f"category index {idx} out of range")
    return idx


def condition_from_model(model: ConditionModel, schema: CategorySchema) -> Condition:
    return parse_condition_record(model.model_dump(), schema)


def layout_from_model(model: LayoutModel, schema: CategorySchema) -> Layout:
    elements = tuple(
        Element(
            category=_category_index(e.category, schema),
            bbox=BBox(e.cx, e.cy, e.w, e.h),
        )
        for e in model.elements
    )
    if not elements:
        raise ConditionError("layout needs at least one element")
    return Layout(elements=elements, id=model.id)


def _merge_policy(base: RetrievalPolicy, overrides: PolicyOverrides | None) -> RetrievalPolicy:
    if overrides is None:
        return base
    return RetrievalPolicy(
        k=overrides.k if overrides.k is not None else base.k,
        tau_reuse=overrides.tau_reuse if overrides.tau_reuse is not None else base.tau_reuse,
        tau_ref=overrides.tau_ref if overrides.tau_ref is not None else base.tau_ref,
        sim_cap=overrides.sim_cap if overrides.sim_cap is not None else base.sim_cap,
        exclude_id=base.exclude_id,
    )


_MODES = {"full": GeometryMode.FULL, "size": GeometryMode.SIZE_ONLY, "type": GeometryMode.TYPE_ONLY}


def create_app(state: AppState) -> FastAPI:
    app = FastAPI(title="layoutrag", docs_url=None, redoc_url=None)

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.exception_handler(ConditionError)
    async def bad_condition(request: Request, exc: ConditionError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(LayoutRagError)
    async def domain_error(request: Request, exc: LayoutRagError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/schema")
    def schema() -> dict:
        return {"categories": list(state.schema.names)}

    @app.get("/layouts/{layout_id}")
    def get_layout(layout_id: int):
        if not 0 <= layout_id < len(state.db):
            return JSONResponse(status_code=404, content={"detail": f"no layout {layout_id}"})
        return layout_to_json(state.db[layout_id], state.schema)

    @app.post("/retrieve")
    def retrieve_endpoint(req: RetrieveRequest) -> list[dict]:
        task = parse_task(req.task)
        cond = condition_from_model(req.condition, state.schema)
        validate_task_condition(task, cond, state.schema.size)
        policy = state.policy if req.k is None else _merge_policy(
            state.policy, PolicyOverrides(k=req.k)
        )
        rng = np.random.default_rng(req.seed)
        result = retrieve(state.index, state.db, task, cond, policy, rng)
        return [
            {"id": cid, "score": score, "layout": layout_to_json(state.db[cid], state.schema)}
            for cid, score in result.ranked
        ]

    @app.post("/similarity")
    def similarity_endpoint(req: SimilarityRequest) -> dict:
        a = layout_from_model(req.a, state.schema)
        b = layout_from_model(req.b, state.schema)
        return {"score": layout_similarity(a, b, _MODES[req.mode])}

    @app.post("/generate")
    def generate_endpoint(req: GenerateRequest):
        if state.net is None:
            return JSONResponse(
                status_code=409, content={"detail": "no checkpoint loaded; generation disabled"}
            )
        task = parse_task(req.task)
        cond = None
        if req.condition is not None:
            cond = condition_from_model(req.condition, state.schema)
            validate_task_condition(task, cond, state.schema.size)
        policy = _merge_policy(state.policy, req.policy_overrides)
        spec = TaskSpec(task=task, condition=cond, n_samples=req.n_samples)
        layouts, provenance = generate(
            state.net, state.index, state.db, spec, policy, state.schema, req.seed
        )
        return {
            "layouts": [layout_to_json(l, state.schema) for l in layouts],
            "provenance": provenance,
        }

    return app
