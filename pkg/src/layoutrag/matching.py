"""Layout-pair similarity via maximum-weight bipartite assignment.

Pair weights are IoU gated by category equality: elements of different
categories never match.  Because cross-category weights are all zero, the
global assignment problem decomposes exactly into independent per-category
blocks, which is how `layout_similarity` computes totals.  The solver is a
potentials-based Kuhn-Munkres on the zero-padded square matrix.

Geometry modes cover partially-specified queries:
  FULL       IoU of the two boxes (query needs size and position)
  SIZE_ONLY  IoU of the boxes translated to a common center (query needs size)
  TYPE_ONLY  1.0 for any same-category pair
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .core import BBox, Condition, Element, Layout, Slot
from .errors import ConditionError


class GeometryMode(str, Enum):
    FULL = "full"
    SIZE_ONLY = "size"
    TYPE_ONLY = "type"


def iou(a: BBox, b: BBox) -> float:
    """Intersection area over union area; 0 for disjoint boxes.

    Areas come from the same corner arithmetic as the intersection so that
    identical boxes score exactly 1.0.
    """
    ax1, ay1, ax2, ay2 = a.corners
    bx1, by1, bx2, by2 = b.corners
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def size_iou(size_a: tuple[float, float], size_b: tuple[float, float]) -> float:
    """IoU of two boxes translated to a common center; depends on sizes only."""
    wa, ha = size_a
    wb, hb = size_b
    inter = min(wa, wb) * min(ha, hb)
    union = wa * ha + wb * hb - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def _query_parts(
    query: Element | Slot, mode: GeometryMode
) -> tuple[int, tuple[float, float] | None, tuple[float, float] | None]:
    """(category, size, position) of a query item, checking mode requirements."""
    if isinstance(query, Element):
        b = query.bbox
        return query.category, (b.w, b.h), (b.cx, b.cy)
    if query.category is None:
        raise ConditionError("similarity query slot needs a known category")
    if mode is GeometryMode.FULL and (query.size is None or query.position is None):
        raise ConditionError("FULL mode needs size and position on every known slot")
    if mode is GeometryMode.SIZE_ONLY and query.size is None:
        raise ConditionError("SIZE_ONLY mode needs size on every known slot")
    return query.category, query.size, query.position


def pair_weight(query: Element | Slot, candidate: Element, mode: GeometryMode) -> float:
    """Type-gated geometric weight in [0, 1]; 0 whenever categories differ."""
    cat, size, pos = _query_parts(query, mode)
    if cat != candidate.category:
        return 0.0
    if mode is GeometryMode.TYPE_ONLY:
        return 1.0
    if mode is GeometryMode.SIZE_ONLY:
        return size_iou(size, (candidate.bbox.w, candidate.bbox.h))
    return iou(BBox(pos[0], pos[1], size[0], size[1]), candidate.bbox)


# --- assignment solver ------------------------------------------------------


@dataclass(frozen=True)
class Assignment:
    """One-to-one partial matching: pairs sorted by row, plus the weight total."""

    pairs: tuple[tuple[int, int], ...]
    total: float


def _min_cost_complete(cost: np.ndarray) -> float:
    """Cost of a minimum-cost complete assignment on a square matrix.

    Standard O(n^3) shortest-augmenting-path formulation with row/column
    potentials; 1-indexed internally with column 0 as the virtual root.
    """
    n = cost.shape[0]
    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)  # p[j] = row matched to column j, 0 = free
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            cur = cost[i0 - 1, :] - u[i0] - v[1:]
            free = ~used[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            masked = np.where(free, minv[1:], inf)
            j1 = int(np.argmin(masked)) + 1
            delta = masked[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[1:][free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    total = 0.0
    for j in range(1, n + 1):
        total += cost[p[j] - 1, j - 1]
    return total


def max_weight_total(weights: np.ndarray) -> float:
    """Maximum total over one-to-one partial assignments; weights must be >= 0."""
    w = np.asarray(weights, dtype=np.float64)
    if w.size == 0:
        return 0.0
    m, n = w.shape
    if m == 1 or n == 1:
        return float(w.max())
    if m != n:
        side = max(m, n)
        padded = np.zeros((side, side))
        padded[:m, :n] = w
        w = padded
    return -_min_cost_complete(-w) + 0.0


def max_weight_assignment(weights: np.ndarray) -> Assignment:
    """Optimal one-to-one partial assignment with a canonical pair list.

    Rectangular matrices are zero-padded to square.  Among equal-total
    optima (up to 1e-9) the lexicographically smallest pair list is
    returned, built greedily row by row against the remaining optimum.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-d weight matrix, got shape {w.shape}")
    if not np.isfinite(w).all():
        raise ValueError("weights must be finite")
    if w.min() < 0.0:
        raise ValueError("weights must be non-negative")
    m, n = w.shape
    total = max_weight_total(w)
    tol = 1e-9
    pairs: list[tuple[int, int]] = []
    avail = list(range(n))
    remaining = total
    for i in range(m):
        if remaining <= tol:
            break
        for j in avail:
            rest_cols = [c for c in avail if c != j]
            rest = max_weight_total(w[np.ix_(range(i + 1, m), rest_cols)])
            if w[i, j] + rest >= remaining - tol:
                pairs.append((i, j))
                avail.remove(j)
                remaining = rest
                break
    return Assignment(pairs=tuple(pairs), total=float(total))


# --- layout similarity ------------------------------------------------------


def _query_items(q: Condition | Layout, mode: GeometryMode) -> list[tuple[int, object]]:
    """Known query items as (category, raw item); raw item is Element or Slot."""
    if isinstance(q, Layout):
        return [(e.category, e) for e in q.elements]
    items = []
    for _, slot in q.known_slots():
        cat, _, _ = _query_parts(slot, mode)
        items.append((cat, slot))
    return items


def layout_similarity(q: Condition | Layout, candidate: Layout, mode: GeometryMode) -> float:
    """Optimal-assignment similarity in [0, 1], normalized by max(m, n).

    m counts the query's known slots, n the candidate's elements.  The
    assignment decomposes per category since cross-category weights vanish.
    """
    items = _query_items(q, mode)
    m = len(items)
    n = candidate.n
    if n < 1:
        raise ValueError("candidate layout is empty")
    if m == 0:
        return 0.0

    by_cat_q: dict[int, list[object]] = {}
    for cat, item in items:
        by_cat_q.setdefault(cat, []).append(item)
    by_cat_c: dict[int, list[Element]] = {}
    for e in candidate.elements:
        by_cat_c.setdefault(e.category, []).append(e)

    total = 0.0
    for cat, q_items in by_cat_q.items():
        c_items = by_cat_c.get(cat)
        if not c_items:
            continue
        if mode is GeometryMode.TYPE_ONLY:
            total += float(min(len(q_items), len(c_items)))
            continue
        block = np.empty((len(q_items), len(c_items)))
        for a, qi in enumerate(q_items):
            for b, ce in enumerate(c_items):
                block[a, b] = pair_weight(qi, ce, mode)
        total += max_weight_total(block)
    return total / float(max(m, n))


def rank_candidates(
    q: Condition | Layout,
    candidate_ids: Sequence[int],
    db: Sequence[Layout],
    mode: GeometryMode,
    k: int,
    rng: np.random.Generator,
    exclude_id: int | None = None,
) -> list[tuple[int, float]]:
    """Top-k (id, similarity) in descending score; equal scores in seeded random order."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    ids = [cid for cid in candidate_ids if cid != exclude_id]
    if not ids:
        return []
    scores = [layout_similarity(q, db[cid], mode) for cid in ids]
    tiebreak = rng.random(len(ids))
    order = sorted(range(len(ids)), key=lambda i: (-scores[i], tiebreak[i]))
    return [(ids[i], scores[i]) for i in order[:k]]
