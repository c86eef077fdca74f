"""Canonical layout data model, dataset ingestion, and continuous encodings.

A layout is an ordered list of typed axis-aligned boxes on the unit canvas.
Geometry is stored in center+size form (cx, cy, w, h), all normalized to
[0, 1].  Layouts convert losslessly to and from an N x (C+4) float matrix
(one-hot category block followed by geometry) which is the representation
the flow model operates on.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ConditionError, DatasetError

logger = logging.getLogger(__name__)

# Minimum box side after clamping; keeps IoU and overlap well-defined.
EPS_BOX = 1e-4

# Database/training layouts keep at most this many elements.
MAX_ELEMENTS = 20


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: center (cx, cy) and size (w, h), unit-canvas fractions."""

    cx: float
    cy: float
    w: float
    h: float

    @property
    def corners(self) -> tuple[float, float, float, float]:
        """(x1, y1, x2, y2) corner form."""
        return (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )

    @property
    def area(self) -> float:
        return self.w * self.h

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in (self.cx, self.cy, self.w, self.h))


def clamp_bbox(b: BBox) -> BBox:
    """Clamp a box into the canonical range; idempotent.

    Centers go to [0, 1]; sides to [EPS_BOX, 1].
    """
    return BBox(
        cx=min(max(b.cx, 0.0), 1.0),
        cy=min(max(b.cy, 0.0), 1.0),
        w=min(max(b.w, EPS_BOX), 1.0),
        h=min(max(b.h, EPS_BOX), 1.0),
    )


@dataclass(frozen=True)
class Element:
    category: int
    bbox: BBox


@dataclass(frozen=True)
class Layout:
    """Ordered elements plus an optional database id.

    Element order is preserved from the source; matching and metrics are
    order-invariant, so ordering is presentation-only.
    """

    elements: tuple[Element, ...]
    id: str | None = None

    @property
    def n(self) -> int:
        return len(self.elements)

    def categories(self) -> tuple[int, ...]:
        return tuple(e.category for e in self.elements)


@dataclass(frozen=True)
class CategorySchema:
    """Ordered, unique category names; C = len(names)."""

    names: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.names) < 1:
            raise DatasetError("schema needs at least one category")
        if len(set(self.names)) != len(self.names):
            raise DatasetError("schema category names must be unique")

    @property
    def size(self) -> int:
        return len(self.names)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DatasetError(f"unknown category name: {name!r}") from None


@dataclass(frozen=True)
class Slot:
    """Per-element partial constraint: any subset of category/size/position."""

    category: int | None = None
    size: tuple[float, float] | None = None
    position: tuple[float, float] | None = None

    @property
    def fully_known(self) -> bool:
        return self.category is not None and self.size is not None and self.position is not None

    @property
    def fully_unknown(self) -> bool:
        return self.category is None and self.size is None and self.position is None

    def to_element(self) -> Element:
        if not self.fully_known:
            raise ConditionError("slot is not fully known")
        return Element(
            category=self.category,
            bbox=BBox(self.position[0], self.position[1], self.size[0], self.size[1]),
        )

    @classmethod
    def from_element(cls, e: Element) -> "Slot":
        return cls(category=e.category, size=(e.bbox.w, e.bbox.h), position=(e.bbox.cx, e.bbox.cy))


@dataclass(frozen=True)
class Condition:
    """Partially known layout: one slot per target element."""

    slots: tuple[Slot, ...]

    @property
    def n_elements(self) -> int:
        return len(self.slots)

    def known_slots(self) -> list[tuple[int, Slot]]:
        """(index, slot) for slots with at least one known attribute."""
        return [(i, s) for i, s in enumerate(self.slots) if not s.fully_unknown]

    def category_min_counts(self, n_categories: int) -> tuple[int, ...]:
        """Per-category lower-bound counts implied by the known categories."""
        counts = [0] * n_categories
        for s in self.slots:
            if s.category is not None:
                counts[s.category] += 1
        return tuple(counts)

    @classmethod
    def unconstrained(cls, n: int) -> "Condition":
        return cls(slots=tuple(Slot() for _ in range(n)))

    @classmethod
    def categories_of(cls, layout: Layout) -> "Condition":
        return cls(slots=tuple(Slot(category=e.category) for e in layout.elements))

    @classmethod
    def categories_and_sizes_of(cls, layout: Layout) -> "Condition":
        return cls(
            slots=tuple(
                Slot(category=e.category, size=(e.bbox.w, e.bbox.h)) for e in layout.elements
            )
        )

    @classmethod
    def fully_known_from(cls, layout: Layout) -> "Condition":
        return cls(slots=tuple(Slot.from_element(e) for e in layout.elements))


def validate_condition(cond: Condition, n_categories: int) -> None:
    """Raise ConditionError unless every known attribute is in range and finite."""
    if cond.n_elements < 1 or cond.n_elements > MAX_ELEMENTS:
        raise ConditionError(
            f"condition must have between 1 and {MAX_ELEMENTS} slots, got {cond.n_elements}"
        )
    for i, s in enumerate(cond.slots):
        if s.category is not None and not (0 <= s.category < n_categories):
            raise ConditionError(f"slot {i}: category {s.category} out of range [0, {n_categories})")
        if s.size is not None:
            w, h = s.size
            if not (math.isfinite(w) and math.isfinite(h)) or not (0.0 < w <= 1.0 and 0.0 < h <= 1.0):
                raise ConditionError(f"slot {i}: size {s.size} outside (0, 1]")
        if s.position is not None:
            x, y = s.position
            if not (math.isfinite(x) and math.isfinite(y)) or not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
                raise ConditionError(f"slot {i}: position {s.position} outside [0, 1]")


def sample_completion_condition(
    layout: Layout, fraction: float, rng: np.random.Generator
) -> Condition:
    """Mark ceil(fraction * N) slots fully known (copied from the layout), rest unknown."""
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    n = layout.n
    if n == 0:
        raise ValueError("cannot build a completion condition for an empty layout")
    n_known = math.ceil(fraction * n)
    known = set(rng.choice(n, size=n_known, replace=False).tolist())
    slots = tuple(
        Slot.from_element(e) if i in known else Slot() for i, e in enumerate(layout.elements)
    )
    return Condition(slots=slots)


# --- continuous encoding -------------------------------------------------

def encode_layout(layout: Layout, schema: CategorySchema) -> np.ndarray:
    """N x (C+4) matrix: one-hot(category) then (cx, cy, w, h)."""
    c = schema.size
    mat = np.zeros((layout.n, c + 4), dtype=np.float64)
    for i, e in enumerate(layout.elements):
        mat[i, e.category] = 1.0
        mat[i, c : c + 4] = (e.bbox.cx, e.bbox.cy, e.bbox.w, e.bbox.h)
    return mat


def decode_layout(mat: np.ndarray, schema: CategorySchema, id: str | None = None) -> Layout:
    """Inverse of encode_layout: argmax category (ties -> lowest id), clamped geometry."""
    c = schema.size
    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[1] != c + 4:
        raise ValueError(f"expected shape (N, {c + 4}), got {mat.shape}")
    elements = []
    for row in mat:
        category = int(np.argmax(row[:c]))
        bbox = clamp_bbox(
            BBox(cx=float(row[c]), cy=float(row[c + 1]), w=float(row[c + 2]), h=float(row[c + 3]))
        )
        elements.append(Element(category=category, bbox=bbox))
    return Layout(elements=tuple(elements), id=id)


def encode_condition(
    cond: Condition, schema: CategorySchema
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Continuous view of a condition for the model.

    Returns (values, attr_mask, channel_mask):
      values       N x (C+4), known attributes filled in, zeros elsewhere
      attr_mask    N x 3 flags for (category, size, position) being known
      channel_mask N x (C+4) boolean, True on channels pinned by the condition
    """
    c = schema.size
    n = cond.n_elements
    values = np.zeros((n, c + 4), dtype=np.float64)
    attr_mask = np.zeros((n, 3), dtype=np.float64)
    channel_mask = np.zeros((n, c + 4), dtype=bool)
    for i, s in enumerate(cond.slots):
        if s.category is not None:
            values[i, s.category] = 1.0
            attr_mask[i, 0] = 1.0
            channel_mask[i, :c] = True
        if s.size is not None:
            values[i, c + 2] = s.size[0]
            values[i, c + 3] = s.size[1]
            attr_mask[i, 1] = 1.0
            channel_mask[i, c + 2 : c + 4] = True
        if s.position is not None:
            values[i, c] = s.position[0]
            values[i, c + 1] = s.position[1]
            attr_mask[i, 2] = 1.0
            channel_mask[i, c : c + 2] = True
    return values, attr_mask, channel_mask


# --- dataset ingestion ----------------------------------------------------

def _parse_element(obj: dict, schema: CategorySchema, canvas: tuple[float, float] | None) -> Element:
    cat = obj["category"]
    if isinstance(cat, str):
        category = schema.index_of(cat)
    else:
        category = int(cat)
        if not 0 <= category < schema.size:
            raise DatasetError(f"category index {category} out of range")
    coords = [float(obj[k]) for k in ("cx", "cy", "w", "h")]
    if not all(math.isfinite(v) for v in coords):
        raise DatasetError("non-finite coordinate")
    cx, cy, w, h = coords
    if canvas is not None:
        cw, ch = canvas
        cx, w = cx / cw, w / cw
        cy, h = cy / ch, h / ch
    tol = 1e-9
    if not (-tol <= cx <= 1 + tol and -tol <= cy <= 1 + tol):
        raise DatasetError(f"center ({cx}, {cy}) outside unit canvas")
    if not (0.0 < w <= 1 + tol and 0.0 < h <= 1 + tol):
        raise DatasetError(f"size ({w}, {h}) outside (0, 1]")
    return Element(category=category, bbox=clamp_bbox(BBox(cx, cy, w, h)))


def parse_layout_record(obj: dict, schema: CategorySchema) -> Layout:
    """Parse one layout record of the dataset JSON schema; raises DatasetError."""
    canvas = None
    if obj.get("canvas") is not None:
        canvas = (float(obj["canvas"]["w"]), float(obj["canvas"]["h"]))
        if canvas[0] <= 0 or canvas[1] <= 0:
            raise DatasetError(f"invalid canvas {canvas}")
    raw = obj.get("elements", [])
    if len(raw) < 1:
        raise DatasetError("layout has no elements")
    if len(raw) > MAX_ELEMENTS:
        raise DatasetError(f"layout has {len(raw)} elements (cap is {MAX_ELEMENTS})")
    elements = tuple(_parse_element(e, schema, canvas) for e in raw)
    return Layout(elements=elements, id=obj.get("id"))


def load_dataset(
    path: str | Path, schema: CategorySchema | None = None
) -> tuple[CategorySchema, list[Layout]]:
    """Load a dataset JSON file, skipping malformed records with a warning.

    If `schema` is given it must match the file's schema; otherwise the
    file's schema is used.  Raises DatasetError when the file is unreadable
    or contains no valid layout.
    """
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc}") from exc
    try:
        file_schema = CategorySchema(names=tuple(doc["schema"]))
        records = doc["layouts"]
    except (KeyError, TypeError) as exc:
        raise DatasetError(f"{path} is not a dataset file: {exc}") from exc
    if schema is not None and schema.names != file_schema.names:
        raise DatasetError(
            f"schema mismatch: expected {schema.names}, file has {file_schema.names}"
        )
    schema = schema or file_schema

    layouts: list[Layout] = []
    skipped = 0
    for i, rec in enumerate(records):
        try:
            layouts.append(parse_layout_record(rec, schema))
        except (DatasetError, KeyError, TypeError, ValueError) as exc:
            skipped += 1
            logger.warning("skipping record %d of %s: %s", i, path, exc)
    if skipped:
        logger.warning("%s: skipped %d of %d records", path, skipped, len(records))
    if not layouts:
        raise DatasetError(f"{path}: no valid layouts")
    return schema, layouts


def parse_condition_record(obj: dict, schema: CategorySchema) -> Condition:
    """Parse the condition wire format used by the CLI and the HTTP API.

    `{"n_elements": int (optional), "slots": [{"category": name-or-int-or-null,
    "size": [w, h] or null, "position": [cx, cy] or null}, ...]}`
    """
    try:
        raw_slots = obj["slots"]
    except (KeyError, TypeError) as exc:
        raise ConditionError(f"condition record needs a 'slots' list: {exc}") from exc
    slots = []
    for i, s in enumerate(raw_slots):
        cat = s.get("category")
        if cat is not None:
            if isinstance(cat, str):
                try:
                    cat = schema.index_of(cat)
                except DatasetError as exc:
                    raise ConditionError(str(exc)) from exc
            else:
                cat = int(cat)
        size = s.get("size")
        position = s.get("position")
        try:
            size = None if size is None else (float(size[0]), float(size[1]))
            position = None if position is None else (float(position[0]), float(position[1]))
        except (TypeError, ValueError, IndexError) as exc:
            raise ConditionError(f"slot {i}: malformed size/position: {exc}") from exc
        slots.append(Slot(category=cat, size=size, position=position))
    cond = Condition(slots=tuple(slots))
    declared = obj.get("n_elements")
    if declared is not None and declared != cond.n_elements:
        raise ConditionError(f"n_elements={declared} does not match {cond.n_elements} slots")
    return cond


def layout_to_json(layout: Layout, schema: CategorySchema) -> dict:
    return {
        "id": layout.id,
        "elements": [
            {
                "category": schema.names[e.category],
                "cx": e.bbox.cx,
                "cy": e.bbox.cy,
                "w": e.bbox.w,
                "h": e.bbox.h,
            }
            for e in layout.elements
        ],
    }


def save_dataset(path: str | Path, schema: CategorySchema, layouts: Iterable[Layout]) -> None:
    doc = {
        "schema": list(schema.names),
        "layouts": [layout_to_json(l, schema) for l in layouts],
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")
