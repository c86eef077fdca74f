"""Flow-matching training: loss assembly, reference corruption, and the loop.

The probability path is the linear interpolant x_t = (1-t) x_0 + t x_1
from standard normal noise to the encoded layout, whose target field
x_1 - x_0 does not depend on t.  Channels pinned by the condition are
clamped to their target values inside x_t and excluded from the squared
error; an alignment penalty on the implied endpoint x_1_hat regularizes
geometry.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import torch

from ..core import CategorySchema, Condition, Layout, encode_condition, encode_layout, sample_completion_condition
from ..errors import TrainingDivergedError
from ..index import CountKey, LayoutIndex, build_index, query_exact, query_lower_bound
from ..matching import GeometryMode, rank_candidates
from .flow import ModelConfig, VectorFieldNet, build_net

logger = logging.getLogger(__name__)

TASKS = ("ucond", "c_to_sp", "cs_to_p", "completion")


@dataclass
class TrainConfig:
    steps: int = 1000
    batch_size: int = 32
    lr: float = 1e-3
    p_no_ref: float = 0.5
    tasks: tuple[str, ...] = TASKS
    completion_fraction: float = 0.2
    retrieval_k: int = 32
    log_every: int = 500

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_no_ref <= 1.0:
            raise ValueError("p_no_ref must be in [0, 1]")
        for t in self.tasks:
            if t not in TASKS:
                raise ValueError(f"unknown task {t!r}")


@dataclass
class Batch:
    """Collated training samples; `ref` is None for base-branch batches."""

    x1: torch.Tensor                 # (B, N, C+4)
    pad: torch.Tensor                # (B, N) bool, True = real element
    cond_values: torch.Tensor        # (B, N, C+4)
    attr_mask: torch.Tensor          # (B, N, 3)
    chan_mask: torch.Tensor          # (B, N, C+4) bool, True = pinned channel
    ref: torch.Tensor | None = None  # (B, M, C+4)
    ref_pad: torch.Tensor | None = None
    ref_ids: tuple[int | None, ...] = ()

    @property
    def size(self) -> int:
        return self.x1.shape[0]


def collate(
    layouts: Sequence[Layout],
    conditions: Sequence[Condition],
    schema: CategorySchema,
    refs: Sequence[Layout | None] | None = None,
    ref_ids: Sequence[int | None] | None = None,
    dtype: torch.dtype = torch.float32,
) -> Batch:
    """Pad encoded layouts/conditions (and references, if any) to a batch."""
    n_ch = schema.size + 4
    b = len(layouts)
    n_max = max(l.n for l in layouts)
    x1 = torch.zeros(b, n_max, n_ch, dtype=dtype)
    pad = torch.zeros(b, n_max, dtype=torch.bool)
    cond_values = torch.zeros(b, n_max, n_ch, dtype=dtype)
    attr_mask = torch.zeros(b, n_max, 3, dtype=dtype)
    chan_mask = torch.zeros(b, n_max, n_ch, dtype=torch.bool)
    for i, (layout, cond) in enumerate(zip(layouts, conditions)):
        n = layout.n
        x1[i, :n] = torch.from_numpy(encode_layout(layout, schema)).to(dtype)
        pad[i, :n] = True
        values, attrs, chans = encode_condition(cond, schema)
        cond_values[i, :n] = torch.from_numpy(values).to(dtype)
        attr_mask[i, :n] = torch.from_numpy(attrs).to(dtype)
        chan_mask[i, :n] = torch.from_numpy(chans)

    ref_t = ref_pad = None
    if refs is not None and any(r is not None for r in refs):
        if any(r is None for r in refs):
            raise ValueError("a batch must be all-reference or all-base")
        m_max = max(r.n for r in refs)
        ref_t = torch.zeros(b, m_max, n_ch, dtype=dtype)
        ref_pad = torch.zeros(b, m_max, dtype=torch.bool)
        for i, r in enumerate(refs):
            ref_t[i, : r.n] = torch.from_numpy(encode_layout(r, schema)).to(dtype)
            ref_pad[i, : r.n] = True
    return Batch(
        x1=x1,
        pad=pad,
        cond_values=cond_values,
        attr_mask=attr_mask,
        chan_mask=chan_mask,
        ref=ref_t,
        ref_pad=ref_pad,
        ref_ids=tuple(ref_ids) if ref_ids is not None else tuple(None for _ in layouts),
    )


def alignment_penalty(geometry: torch.Tensor, pad: torch.Tensor | None = None) -> torch.Tensor:
    """Mean over layouts of the per-element nearest same-anchor distance.

    geometry (B, N, 4) rows (cx, cy, w, h); pad (B, N) True = real.
    Layouts with a single real element contribute 0.
    """
    cx, cy, w, h = geometry.unbind(dim=-1)
    anchors = torch.stack(
        [cx - w / 2, cx, cx + w / 2, cy - h / 2, cy, cy + h / 2], dim=1
    )  # (B, 6, N)
    diff = (anchors.unsqueeze(-1) - anchors.unsqueeze(-2)).abs()  # (B, 6, N, N)
    nearest = diff.min(dim=1).values  # (B, N, N)
    b, n = geometry.shape[:2]
    eye = torch.eye(n, dtype=torch.bool, device=geometry.device).unsqueeze(0)
    invalid = eye.expand(b, n, n).clone()
    if pad is not None:
        invalid |= ~pad.unsqueeze(1) | ~pad.unsqueeze(2)
    nearest = nearest.masked_fill(invalid, float("inf"))
    per_elem = nearest.min(dim=2).values  # (B, N)
    has_partner = torch.isfinite(per_elem)
    per_elem = torch.where(has_partner, per_elem, torch.zeros_like(per_elem))
    if pad is None:
        counts = torch.full((b,), n, dtype=geometry.dtype, device=geometry.device)
        sums = per_elem.sum(dim=1)
    else:
        counts = pad.sum(dim=1).to(geometry.dtype).clamp(min=1.0)
        sums = (per_elem * pad.to(geometry.dtype)).sum(dim=1)
    return (sums / counts).mean()


def align_reg(geometry: np.ndarray | torch.Tensor) -> float:
    """Single-layout alignment penalty on an (N, 4) geometry block."""
    g = torch.as_tensor(np.asarray(geometry, dtype=np.float64)).unsqueeze(0)
    return float(alignment_penalty(g))


def cfm_loss_parts(
    net: VectorFieldNet,
    batch: Batch,
    generator: torch.Generator | None = None,
    draws: tuple[torch.Tensor, torch.Tensor] | None = None,
    field_fn: Callable[[torch.Tensor, torch.Tensor], torch.Tensor] | None = None,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """(squared-error sum, number of supervised entries, per-batch alignment sum).

    `draws` fixes (t, x0) for deterministic re-evaluation; `field_fn(t, x_t)`
    replaces the network (oracle-field test hook).
    """
    x1, pad, chan_mask = batch.x1, batch.pad, batch.chan_mask
    b, n, d = x1.shape
    if draws is not None:
        t, x0 = draws
    else:
        t = torch.rand(b, generator=generator, dtype=x1.dtype)
        x0 = torch.randn(b, n, d, generator=generator, dtype=x1.dtype)
    tt = t.reshape(b, 1, 1)
    x_t = (1.0 - tt) * x0 + tt * x1
    x_t = torch.where(chan_mask, x1, x_t)
    target = x1 - x0
    if field_fn is not None:
        u = field_fn(t, x_t)
    else:
        u = net(x_t, t, batch.cond_values, batch.attr_mask, batch.ref, batch.ref_pad, pad)
    supervised = pad.unsqueeze(-1) & ~chan_mask
    sq_sum = ((u - target) ** 2 * supervised.to(u.dtype)).sum()
    n_sup = supervised.sum()
    x1_hat = x_t + (1.0 - tt) * u
    x1_hat = torch.where(chan_mask, x1, x1_hat)
    c = d - 4
    align_sum = alignment_penalty(x1_hat[..., c:], pad) * b
    return sq_sum, n_sup, align_sum


def cfm_loss(
    net: VectorFieldNet,
    batch: Batch,
    lam: float,
    generator: torch.Generator | None = None,
    draws: tuple[torch.Tensor, torch.Tensor] | None = None,
    field_fn: Callable[[torch.Tensor, torch.Tensor], torch.Tensor] | None = None,
) -> torch.Tensor:
    """Masked flow-matching MSE plus lam times the alignment penalty."""
    sq_sum, n_sup, align_sum = cfm_loss_parts(net, batch, generator, draws, field_fn)
    return sq_sum / n_sup.clamp(min=1) + lam * align_sum / batch.size


def corrupt_references(
    ref_ids: Sequence[int],
    db_size: int,
    p_irrelevant: float,
    rng: np.random.Generator,
) -> list[int]:
    """With probability p_irrelevant, replace each id with a different random id."""
    out = []
    for rid in ref_ids:
        if p_irrelevant > 0.0 and rng.random() < p_irrelevant:
            swap = int(rng.integers(db_size - 1))
            if swap >= rid:
                swap += 1
            out.append(swap)
        else:
            out.append(int(rid))
    return out


def _condition_for(
    task: str, layout: Layout, fraction: float, rng: np.random.Generator
) -> Condition:
    if task == "ucond":
        return Condition.unconstrained(layout.n)
    if task == "c_to_sp":
        return Condition.categories_of(layout)
    if task == "cs_to_p":
        return Condition.categories_and_sizes_of(layout)
    return sample_completion_condition(layout, fraction, rng)


_TASK_MODE = {
    "c_to_sp": GeometryMode.TYPE_ONLY,
    "cs_to_p": GeometryMode.SIZE_ONLY,
    "completion": GeometryMode.FULL,
}


def _retrieve_reference(
    task: str,
    cond: Condition,
    sample_id: int,
    db: Sequence[Layout],
    index: LayoutIndex,
    k: int,
    rng: np.random.Generator,
) -> int | None:
    """Top-1 retrieved id for a training sample's condition, excluding itself."""
    if task == "ucond":
        others = [i for i in range(len(db)) if i != sample_id]
        return int(rng.choice(others)) if others else None
    key = CountKey(counts=cond.category_min_counts(index.n_categories))
    if task == "completion":
        candidates = query_lower_bound(index, key)
    else:
        candidates = query_exact(index, key)
    candidates = [c for c in candidates if c != sample_id]
    if not candidates:
        return None
    if len(candidates) > k:
        candidates = sorted(rng.choice(candidates, size=k, replace=False).tolist())
    ranked = rank_candidates(cond, candidates, db, _TASK_MODE[task], k, rng)
    return ranked[0][0] if ranked else None


@dataclass
class TrainState:
    net: VectorFieldNet
    model_cfg: ModelConfig
    train_cfg: TrainConfig
    step: int = 0
    loss_history: list[float] = field(default_factory=list)


def train(
    db: Sequence[Layout],
    schema: CategorySchema,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    index: LayoutIndex | None = None,
    net: VectorFieldNet | None = None,
) -> TrainState:
    """Adam + cosine-decay training with per-sample retrieved references.

    Each sample draws a task, derives its condition, and (unless dropped by
    p_no_ref) fetches a reference through retrieval on that condition; with
    probability p_irrelevant the reference is swapped for a random layout.
    Reference/condition lookups are cached per (sample, task) under seeds
    derived from model_cfg.seed, so runs are reproducible.
    """
    if len(db) < 2:
        raise ValueError("training needs at least 2 layouts")
    if index is None:
        index = build_index(db, schema.size)
    if net is None:
        net = build_net(model_cfg)
    rng = np.random.default_rng(np.random.SeedSequence([model_cfg.seed, 0xD1CE]))
    torch_gen = torch.Generator().manual_seed(model_cfg.seed)
    opt = torch.optim.Adam(net.parameters(), lr=train_cfg.lr, betas=(0.9, 0.999))
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=train_cfg.steps)

    cond_cache: dict[tuple[int, str], Condition] = {}
    ref_cache: dict[tuple[int, str], int | None] = {}

    def condition_and_ref(i: int, task: str) -> tuple[Condition, int | None]:
        key = (i, task)
        if key not in cond_cache:
            local = np.random.default_rng(
                np.random.SeedSequence([model_cfg.seed, i, TASKS.index(task)])
            )
            cond = _condition_for(task, db[i], train_cfg.completion_fraction, local)
            cond_cache[key] = cond
            ref_cache[key] = _retrieve_reference(
                task, cond, i, db, index, train_cfg.retrieval_k, local
            )
        return cond_cache[key], ref_cache[key]

    state = TrainState(net=net, model_cfg=model_cfg, train_cfg=train_cfg)
    for step in range(train_cfg.steps):
        idxs = rng.integers(len(db), size=train_cfg.batch_size)
        tasks = rng.choice(train_cfg.tasks, size=train_cfg.batch_size)
        with_ref = rng.random(train_cfg.batch_size) >= train_cfg.p_no_ref

        t_all = torch.rand(train_cfg.batch_size, generator=torch_gen)
        groups: dict[bool, list[int]] = {True: [], False: []}
        conds: list[Condition] = []
        refs: list[Layout | None] = []
        for pos, (i, task) in enumerate(zip(idxs.tolist(), tasks.tolist())):
            cond, rid = condition_and_ref(i, task)
            if with_ref[pos] and rid is not None:
                rid = corrupt_references([rid], len(db), model_cfg.p_irrelevant, rng)[0]
                refs.append(db[rid])
                groups[True].append(pos)
            else:
                refs.append(None)
                groups[False].append(pos)
            conds.append(cond)

        opt.zero_grad()
        sq_total = torch.zeros(())
        n_total = torch.zeros(())
        align_total = torch.zeros(())
        for has_ref, members in groups.items():
            if not members:
                continue
            sub_layouts = [db[idxs[p]] for p in members]
            sub_conds = [conds[p] for p in members]
            sub_refs = [refs[p] for p in members] if has_ref else None
            batch = collate(sub_layouts, sub_conds, schema, refs=sub_refs)
            t = t_all[members]
            x0 = torch.randn(batch.x1.shape, generator=torch_gen)
            sq, n_sup, al = cfm_loss_parts(net, batch, draws=(t, x0))
            sq_total = sq_total + sq
            n_total = n_total + n_sup
            align_total = align_total + al
        loss = sq_total / n_total.clamp(min=1) + model_cfg.lam * align_total / train_cfg.batch_size
        if not torch.isfinite(loss):
            raise TrainingDivergedError(f"non-finite loss at step {step}")
        loss.backward()
        opt.step()
        sched.step()
        state.loss_history.append(float(loss.item()))
        state.step = step + 1
        if train_cfg.log_every and (step + 1) % train_cfg.log_every == 0:
            logger.info("step %d: loss %.5f", step + 1, state.loss_history[-1])
    return state
