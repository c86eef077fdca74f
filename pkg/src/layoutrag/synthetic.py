"""Synthetic datasets for desk-scale training and evaluation.

The template-grid dataset draws jittered instances of 8 structural
templates over 5 categories.  Templates come in pairs sharing a category
multiset; within pairs A and B the element sizes also match (so geometry
is ambiguous given categories and sizes alone), while pairs C and D differ
in size, giving retrieval a spread of mid-similarity candidates.
"""
from __future__ import annotations

import numpy as np

from .core import BBox, CategorySchema, Element, Layout, clamp_bbox

TEMPLATE_SCHEMA = CategorySchema(names=("header", "text", "image", "button", "footer"))

# (category, cx, cy, w, h) per element; pairs (0,1), (2,3) share sizes.
_TEMPLATES: tuple[tuple[tuple[int, float, float, float, float], ...], ...] = (
    # pair A: header + 2 text, same sizes, header top vs bottom
    (
        (0, 0.50, 0.10, 0.80, 0.10),
        (1, 0.50, 0.35, 0.80, 0.20),
        (1, 0.50, 0.65, 0.80, 0.20),
    ),
    (
        (1, 0.50, 0.15, 0.80, 0.20),
        (1, 0.50, 0.45, 0.80, 0.20),
        (0, 0.50, 0.80, 0.80, 0.10),
    ),
    # pair B: image + text + 2 buttons, same sizes, image top vs bottom
    (
        (2, 0.50, 0.20, 0.50, 0.30),
        (1, 0.50, 0.50, 0.50, 0.20),
        (3, 0.30, 0.75, 0.20, 0.08),
        (3, 0.70, 0.75, 0.20, 0.08),
    ),
    (
        (3, 0.30, 0.10, 0.20, 0.08),
        (3, 0.70, 0.10, 0.20, 0.08),
        (1, 0.50, 0.40, 0.50, 0.20),
        (2, 0.50, 0.80, 0.50, 0.30),
    ),
    # pair C: header + 2 images + footer, different sizes across the pair
    (
        (0, 0.50, 0.08, 0.90, 0.08),
        (2, 0.28, 0.45, 0.40, 0.50),
        (2, 0.72, 0.45, 0.40, 0.50),
        (4, 0.50, 0.92, 0.90, 0.06),
    ),
    (
        (0, 0.50, 0.10, 0.60, 0.12),
        (2, 0.50, 0.35, 0.70, 0.25),
        (2, 0.50, 0.68, 0.70, 0.25),
        (4, 0.50, 0.93, 0.60, 0.08),
    ),
    # pair D: 3 text + button, different sizes across the pair
    (
        (1, 0.30, 0.20, 0.50, 0.15),
        (1, 0.30, 0.45, 0.50, 0.15),
        (1, 0.30, 0.70, 0.50, 0.15),
        (3, 0.75, 0.85, 0.25, 0.10),
    ),
    (
        (1, 0.50, 0.15, 0.85, 0.18),
        (1, 0.50, 0.42, 0.85, 0.18),
        (1, 0.50, 0.69, 0.85, 0.18),
        (3, 0.50, 0.90, 0.30, 0.08),
    ),
)


def _instantiate(template_id: int, jitter: float, rng: np.random.Generator, lid: str) -> Layout:
    elements = []
    for cat, cx, cy, w, h in _TEMPLATES[template_id]:
        noise = rng.normal(0.0, jitter, size=4)
        bbox = clamp_bbox(BBox(cx + noise[0], cy + noise[1], w + noise[2], h + noise[3]))
        elements.append(Element(category=cat, bbox=bbox))
    return Layout(elements=tuple(elements), id=lid)


def make_template_grid_dataset(
    n_train: int = 2000,
    n_test: int = 200,
    jitter: float = 0.01,
    seed: int = 0,
) -> tuple[CategorySchema, list[Layout], list[Layout]]:
    """Balanced jittered draws from the 8 templates, split train/test."""
    rng = np.random.default_rng(seed)
    n_templates = len(_TEMPLATES)

    def build(count: int, prefix: str) -> list[Layout]:
        assignments = np.arange(count) % n_templates
        rng.shuffle(assignments)
        return [
            _instantiate(int(tid), jitter, rng, f"{prefix}-{i:04d}")
            for i, tid in enumerate(assignments)
        ]

    return TEMPLATE_SCHEMA, build(n_train, "train"), build(n_test, "test")


TOY_SCHEMA = CategorySchema(names=("box",))
TOY_MODES = (0.25, 0.75)
TOY_STD = 0.05


def make_bimodal_toy_dataset(n: int, seed: int = 0) -> tuple[CategorySchema, list[Layout]]:
    """Single-element layouts whose center-x follows a balanced 2-Gaussian mixture."""
    rng = np.random.default_rng(seed)
    layouts = []
    for i in range(n):
        mode = TOY_MODES[int(rng.integers(2))]
        cx = float(np.clip(rng.normal(mode, TOY_STD), 0.0, 1.0))
        bbox = BBox(cx=cx, cy=0.5, w=0.3, h=0.2)
        layouts.append(Layout(elements=(Element(category=0, bbox=bbox),), id=f"toy-{i:04d}"))
    return TOY_SCHEMA, layouts


def mixture_mode_stats(
    values: np.ndarray, centers: tuple[float, float] = TOY_MODES
) -> dict[str, tuple[float, float]]:
    """Per-mode means and weights under nearest-center assignment."""
    values = np.asarray(values, dtype=np.float64)
    lo = np.abs(values - centers[0]) <= np.abs(values - centers[1])
    means = []
    weights = []
    for mask in (lo, ~lo):
        weights.append(float(mask.mean()))
        means.append(float(values[mask].mean()) if mask.any() else float("nan"))
    return {"means": tuple(means), "weights": tuple(weights)}
