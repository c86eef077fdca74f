"""Retrieval-augmented generation pipeline.

Per sample: derive the condition, retrieve type-qualified candidates,
rank them by assignment similarity, then route on the top score:

  score >= tau_reuse           return the template, lightly modified
  tau_ref <= score < tau_reuse sample with the template as reference
  otherwise                    sample from the base branch alone

Every path satisfies the condition exactly: the reuse path overwrites
conditioned attributes, the sampling paths clamp them at every step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .core import (
    BBox,
    CategorySchema,
    Condition,
    Element,
    Layout,
    MAX_ELEMENTS,
    sample_completion_condition,
    validate_condition,
)
from .errors import ConditionError, ModificationError
from .index import CountKey, LayoutIndex, query_exact, query_lower_bound
from .matching import (
    GeometryMode,
    layout_similarity,
    max_weight_assignment,
    pair_weight,
)
from .metrics import MetricsReport, compute_metrics
from .model.flow import VectorFieldNet
from .model.sampling import sample_batch


class Task(str, Enum):
    UCOND = "ucond"
    C_TO_SP = "c_to_sp"
    CS_TO_P = "cs_to_p"
    COMPLETION = "completion"


TASK_MODES: dict[Task, GeometryMode | None] = {
    Task.UCOND: None,
    Task.C_TO_SP: GeometryMode.TYPE_ONLY,
    Task.CS_TO_P: GeometryMode.SIZE_ONLY,
    Task.COMPLETION: GeometryMode.FULL,
}


@dataclass(frozen=True)
class RetrievalPolicy:
    """Thresholds of the reuse/guide/base decision plus retrieval knobs.

    k caps how many candidates are scored (a seeded uniform subsample when
    the qualified set is larger) and how many are returned.  sim_cap
    discards candidates scoring above it before ranking, simulating lower
    quality reference pools.
    """

    k: int = 32
    tau_reuse: float = 0.95
    tau_ref: float = 0.05
    sim_cap: float | None = None
    exclude_id: int | None = None

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0.0 <= self.tau_ref <= self.tau_reuse <= 1.0:
            raise ValueError("need 0 <= tau_ref <= tau_reuse <= 1")


@dataclass(frozen=True)
class TaskSpec:
    task: Task
    condition: Condition | None
    n_samples: int = 1


@dataclass(frozen=True)
class Decision:
    kind: str  # reuse | guide | base
    template_id: int | None
    score: float | None


@dataclass(frozen=True)
class RetrievalResult:
    ranked: tuple[tuple[int, float], ...]
    n_qualified: int


def validate_task_condition(task: Task, cond: Condition, n_categories: int) -> None:
    """Check the condition's known/unknown pattern against the task."""
    validate_condition(cond, n_categories)
    if task is Task.UCOND:
        if any(not s.fully_unknown for s in cond.slots):
            raise ConditionError("ucond condition must leave every slot unknown")
    elif task is Task.C_TO_SP:
        for s in cond.slots:
            if s.category is None or s.size is not None or s.position is not None:
                raise ConditionError("c_to_sp condition fixes categories only")
    elif task is Task.CS_TO_P:
        for s in cond.slots:
            if s.category is None or s.size is None or s.position is not None:
                raise ConditionError("cs_to_p condition fixes categories and sizes only")
    else:
        for s in cond.slots:
            if not (s.fully_known or s.fully_unknown):
                raise ConditionError("completion slots must be fully known or fully unknown")


def condition_for_task(task: Task, layout: Layout, rng: np.random.Generator, fraction: float = 0.2) -> Condition:
    """Condition a task would pose for a known target layout."""
    if task is Task.UCOND:
        return Condition.unconstrained(layout.n)
    if task is Task.C_TO_SP:
        return Condition.categories_of(layout)
    if task is Task.CS_TO_P:
        return Condition.categories_and_sizes_of(layout)
    return sample_completion_condition(layout, fraction, rng)


def retrieve(
    index: LayoutIndex,
    db: Sequence[Layout],
    task: Task,
    condition: Condition,
    policy: RetrievalPolicy,
    rng: np.random.Generator,
) -> RetrievalResult:
    """Collect type-qualified candidates, score a (capped) subset, rank them."""
    if task is Task.UCOND:
        qualified = [i for i in range(len(db)) if i != policy.exclude_id]
        n_qualified = len(qualified)
        if not qualified:
            return RetrievalResult(ranked=(), n_qualified=0)
        take = min(policy.k, len(qualified))
        picks = rng.choice(len(qualified), size=take, replace=False)
        ranked = tuple((qualified[int(p)], 0.0) for p in picks)
        if policy.sim_cap is not None:
            ranked = tuple(r for r in ranked if r[1] <= policy.sim_cap)
        return RetrievalResult(ranked=ranked, n_qualified=n_qualified)

    key = CountKey(counts=condition.category_min_counts(index.n_categories))
    if task is Task.COMPLETION:
        qualified = query_lower_bound(index, key)
    else:
        qualified = query_exact(index, key)
    if policy.exclude_id is not None:
        qualified = [q for q in qualified if q != policy.exclude_id]
    n_qualified = len(qualified)
    if not qualified:
        return RetrievalResult(ranked=(), n_qualified=0)
    if len(qualified) > policy.k:
        picks = rng.choice(len(qualified), size=policy.k, replace=False)
        subset = sorted(qualified[int(p)] for p in picks)
    else:
        subset = qualified
    mode = TASK_MODES[task]
    scores = [(cid, layout_similarity(condition, db[cid], mode)) for cid in subset]
    if policy.sim_cap is not None:
        scores = [(cid, s) for cid, s in scores if s <= policy.sim_cap]
    tiebreak = rng.random(len(scores)) if scores else np.empty(0)
    order = sorted(range(len(scores)), key=lambda i: (-scores[i][1], tiebreak[i]))
    ranked = tuple(scores[i] for i in order[: policy.k])
    return RetrievalResult(ranked=ranked, n_qualified=n_qualified)


def count_qualified(
    index: LayoutIndex,
    db_size: int,
    task: Task,
    condition: Condition,
    exclude_id: int | None = None,
) -> int:
    """Size of the type-qualified candidate set, before scoring or capping."""
    if task is Task.UCOND:
        qualified = list(range(db_size))
    else:
        key = CountKey(counts=condition.category_min_counts(index.n_categories))
        if task is Task.COMPLETION:
            qualified = query_lower_bound(index, key)
        else:
            qualified = query_exact(index, key)
    if exclude_id is not None:
        qualified = [q for q in qualified if q != exclude_id]
    return len(qualified)


def decide(ranked: Sequence[tuple[int, float]], policy: RetrievalPolicy) -> Decision:
    """Route on the top candidate's similarity."""
    if not ranked:
        return Decision(kind="base", template_id=None, score=None)
    top_id, top_score = ranked[0]
    if top_score >= policy.tau_reuse:
        return Decision(kind="reuse", template_id=top_id, score=top_score)
    if top_score >= policy.tau_ref:
        return Decision(kind="guide", template_id=top_id, score=top_score)
    return Decision(kind="base", template_id=None, score=top_score)


def median_category_sizes(db: Sequence[Layout], n_categories: int) -> dict[int, tuple[float, float]]:
    """Per-category median (w, h) over the database, with a global fallback."""
    by_cat: dict[int, list[tuple[float, float]]] = {}
    all_sizes: list[tuple[float, float]] = []
    for layout in db:
        for e in layout.elements:
            wh = (e.bbox.w, e.bbox.h)
            by_cat.setdefault(e.category, []).append(wh)
            all_sizes.append(wh)
    if all_sizes:
        arr = np.asarray(all_sizes)
        fallback = (float(np.median(arr[:, 0])), float(np.median(arr[:, 1])))
    else:
        fallback = (0.2, 0.2)
    out = {}
    for c in range(n_categories):
        sizes = by_cat.get(c)
        if sizes:
            arr = np.asarray(sizes)
            out[c] = (float(np.median(arr[:, 0])), float(np.median(arr[:, 1])))
        else:
            out[c] = fallback
    return out


def _lowest_overlap_position(
    size: tuple[float, float], existing: Sequence[Element], grid: int = 5
) -> tuple[float, float]:
    """Grid-cell center minimizing total intersection area with existing boxes."""
    w, h = size
    best = (0.5, 0.5)
    best_overlap = math.inf
    for row in range(grid):
        for col in range(grid):
            cx = (col + 0.5) / grid
            cy = (row + 0.5) / grid
            x1, y1, x2, y2 = cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2
            total = 0.0
            for e in existing:
                ex1, ey1, ex2, ey2 = e.bbox.corners
                iw = min(x2, ex2) - max(x1, ex1)
                ih = min(y2, ey2) - max(y1, ey1)
                if iw > 0 and ih > 0:
                    total += iw * ih
            if total < best_overlap - 1e-12:
                best_overlap = total
                best = (cx, cy)
    return best


def apply_modification(
    template: Layout,
    condition: Condition,
    mode: GeometryMode | None,
    median_sizes: dict[int, tuple[float, float]] | None = None,
) -> Layout:
    """Overwrite a template's conditioned attributes after optimal assignment.

    Known slots are matched one-to-one to template elements by pair weight
    in the task's geometry mode; matched elements take the slot's known
    values, unmatched template elements stay, and unmatched known slots are
    appended with defaults (median category size, lowest-overlap grid
    position).
    """
    known = condition.known_slots()
    if not known or mode is None:
        return template
    weights = np.empty((len(known), template.n))
    for a, (_, slot) in enumerate(known):
        for b, elem in enumerate(template.elements):
            weights[a, b] = pair_weight(slot, elem, mode)
    assignment = max_weight_assignment(weights)
    slot_for_element = {j: known[i][1] for i, j in assignment.pairs}
    matched_slots = {i for i, _ in assignment.pairs}

    elements: list[Element] = []
    for j, elem in enumerate(template.elements):
        slot = slot_for_element.get(j)
        if slot is None:
            elements.append(elem)
            continue
        pos = slot.position if slot.position is not None else (elem.bbox.cx, elem.bbox.cy)
        size = slot.size if slot.size is not None else (elem.bbox.w, elem.bbox.h)
        elements.append(
            Element(category=slot.category, bbox=BBox(pos[0], pos[1], size[0], size[1]))
        )
    for i, (_, slot) in enumerate(known):
        if i in matched_slots:
            continue
        if slot.size is not None:
            size = slot.size
        elif median_sizes is not None and slot.category in median_sizes:
            size = median_sizes[slot.category]
        else:
            size = (0.2, 0.2)
        pos = slot.position if slot.position is not None else _lowest_overlap_position(size, elements)
        elements.append(Element(category=slot.category, bbox=BBox(pos[0], pos[1], size[0], size[1])))
    if len(elements) > MAX_ELEMENTS:
        raise ModificationError(
            f"modified layout would have {len(elements)} elements (cap {MAX_ELEMENTS})"
        )
    return Layout(elements=tuple(elements), id=template.id)


@dataclass
class SampleOutcome:
    condition: Condition
    decision: Decision
    seed: int


def _generate_for_conditions(
    net: VectorFieldNet | None,
    index: LayoutIndex,
    db: Sequence[Layout],
    task: Task,
    conditions: Sequence[Condition],
    policies: Sequence[RetrievalPolicy],
    schema: CategorySchema,
    seed: int,
    arm: str = "full",
    steps: int | None = None,
) -> tuple[list[Layout], list[SampleOutcome]]:
    """Shared generation core; `arm` forces a route ('full', 'base', 'retrieval')."""
    if arm not in ("full", "base", "retrieval"):
        raise ValueError(f"unknown arm {arm!r}")
    n = len(conditions)
    children = np.random.SeedSequence(seed).spawn(n)
    outcomes: list[SampleOutcome] = []
    median_sizes = median_category_sizes(db, schema.size)
    for cond, policy, child in zip(conditions, policies, children):
        rng = np.random.default_rng(child)
        sample_seed = int(child.generate_state(1, dtype=np.uint32)[0])
        if arm == "base":
            decision = Decision(kind="base", template_id=None, score=None)
        else:
            result = retrieve(index, db, task, cond, policy, rng)
            if arm == "retrieval":
                if result.ranked:
                    top_id, top_score = result.ranked[0]
                    decision = Decision(kind="reuse", template_id=top_id, score=top_score)
                else:
                    decision = Decision(kind="base", template_id=None, score=None)
            else:
                decision = decide(result.ranked, policy)
        outcomes.append(SampleOutcome(condition=cond, decision=decision, seed=sample_seed))

    layouts: list[Layout | None] = [None] * n
    # reuse path is immediate; sampling paths are grouped and batched
    groups: dict[tuple[str, int], list[int]] = {}
    for i, out in enumerate(outcomes):
        if out.decision.kind == "reuse":
            layouts[i] = apply_modification(
                db[out.decision.template_id], out.condition, TASK_MODES[task], median_sizes
            )
        else:
            key = (out.decision.kind, out.condition.n_elements)
            groups.setdefault(key, []).append(i)
    for (kind, _), members in sorted(groups.items()):
        if net is None:
            raise ValueError("a trained net is required for sampling paths")
        conds = [outcomes[i].condition for i in members]
        seeds = [outcomes[i].seed for i in members]
        refs = None
        if kind == "guide":
            refs = [db[outcomes[i].decision.template_id] for i in members]
        sampled = sample_batch(net, conds, schema, seeds, refs=refs, steps=steps)
        for i, layout in zip(members, sampled):
            layouts[i] = layout
    return list(layouts), outcomes


def generate(
    net: VectorFieldNet | None,
    index: LayoutIndex,
    db: Sequence[Layout],
    task_spec: TaskSpec,
    policy: RetrievalPolicy,
    schema: CategorySchema,
    seed: int,
    steps: int | None = None,
) -> tuple[list[Layout], list[dict]]:
    """Generate task_spec.n_samples layouts plus a provenance record per sample."""
    n = task_spec.n_samples
    if n < 1:
        raise ValueError("n_samples must be >= 1")
    if task_spec.condition is not None:
        validate_task_condition(task_spec.task, task_spec.condition, schema.size)
        conditions = [task_spec.condition] * n
    elif task_spec.task is Task.UCOND:
        sizes = np.asarray([l.n for l in db])
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0xA11]))
        conditions = [Condition.unconstrained(int(rng.choice(sizes))) for _ in range(n)]
    else:
        raise ConditionError(f"task {task_spec.task.value} requires a condition")
    layouts, outcomes = _generate_for_conditions(
        net, index, db, task_spec.task, conditions, [policy] * n, schema, seed, "full", steps
    )
    provenance = [
        {
            "task": task_spec.task.value,
            "decision": out.decision.kind,
            "template_id": out.decision.template_id,
            "similarity": out.decision.score,
            "seed": out.seed,
        }
        for out in outcomes
    ]
    return layouts, provenance


@dataclass(frozen=True)
class RetrievalStats:
    n_conditions: int
    n_retrievable: int
    n_ge20: int
    decisions: dict[str, int]

    @property
    def frac_retrievable(self) -> float:
        return self.n_retrievable / self.n_conditions if self.n_conditions else 0.0

    @property
    def frac_ge20(self) -> float:
        return self.n_ge20 / self.n_conditions if self.n_conditions else 0.0


@dataclass(frozen=True)
class EvalResult:
    metrics: MetricsReport
    stats: RetrievalStats
    n_evaluated: int


def evaluate(
    net: VectorFieldNet | None,
    index: LayoutIndex,
    train_db: Sequence[Layout],
    test_db: Sequence[Layout],
    task: Task,
    policy: RetrievalPolicy,
    schema: CategorySchema,
    seed: int = 0,
    arm: str = "full",
    retrievable_only: bool = False,
    completion_fraction: float = 0.2,
    steps: int | None = None,
) -> EvalResult:
    """Derive one condition per test layout, generate, and score against the truth.

    Self-retrieval is excluded whenever a test layout's string id also
    appears in the train database.  Retrieval statistics (fraction of
    conditions with any qualified candidate, fraction with at least 20)
    always cover every condition, before any retrievable_only filter.
    """
    if len(test_db) == 0:
        raise ValueError("empty test set")
    id_to_pos = {l.id: i for i, l in enumerate(train_db) if l.id is not None}
    root = np.random.SeedSequence([seed, 0xE7A1])
    cond_children = root.spawn(len(test_db))
    conditions: list[Condition] = []
    policies: list[RetrievalPolicy] = []
    qualified_counts: list[int] = []
    for layout, child in zip(test_db, cond_children):
        rng = np.random.default_rng(child)
        cond = condition_for_task(task, layout, rng, completion_fraction)
        exclude = id_to_pos.get(layout.id)
        pol = policy if exclude is None else RetrievalPolicy(
            k=policy.k,
            tau_reuse=policy.tau_reuse,
            tau_ref=policy.tau_ref,
            sim_cap=policy.sim_cap,
            exclude_id=exclude,
        )
        conditions.append(cond)
        policies.append(pol)
        qualified_counts.append(
            count_qualified(index, len(train_db), task, cond, pol.exclude_id)
        )

    keep = list(range(len(test_db)))
    if retrievable_only:
        keep = [i for i in keep if qualified_counts[i] > 0]
        if not keep:
            raise ValueError("no retrievable conditions to evaluate")
    layouts, outcomes = _generate_for_conditions(
        net,
        index,
        train_db,
        task,
        [conditions[i] for i in keep],
        [policies[i] for i in keep],
        schema,
        seed,
        arm,
        steps,
    )
    decision_counts: dict[str, int] = {"reuse": 0, "guide": 0, "base": 0}
    for out in outcomes:
        decision_counts[out.decision.kind] += 1
    stats = RetrievalStats(
        n_conditions=len(test_db),
        n_retrievable=sum(1 for q in qualified_counts if q > 0),
        n_ge20=sum(1 for q in qualified_counts if q >= 20),
        decisions=decision_counts,
    )
    references = [test_db[i] for i in keep]
    metrics = compute_metrics(layouts, references, schema.size)
    return EvalResult(metrics=metrics, stats=stats, n_evaluated=len(keep))
