import numpy as np
import pytest
import torch

from layoutrag.core import BBox, CategorySchema, Element, Layout, clamp_bbox


@pytest.fixture(autouse=True, scope="session")
def _limit_threads():
    torch.set_num_threads(2)


@pytest.fixture
def schema3() -> CategorySchema:
    return CategorySchema(names=("text", "title", "image"))


@pytest.fixture
def schema2() -> CategorySchema:
    return CategorySchema(names=("text", "title"))


def random_bbox(rng: np.random.Generator) -> BBox:
    return clamp_bbox(
        BBox(
            cx=float(rng.uniform(0.05, 0.95)),
            cy=float(rng.uniform(0.05, 0.95)),
            w=float(rng.uniform(0.05, 0.5)),
            h=float(rng.uniform(0.05, 0.5)),
        )
    )


def random_layout(
    rng: np.random.Generator, n_categories: int, n: int | None = None, id: str | None = None
) -> Layout:
    if n is None:
        n = int(rng.integers(1, 8))
    elements = tuple(
        Element(category=int(rng.integers(n_categories)), bbox=random_bbox(rng)) for _ in range(n)
    )
    return Layout(elements=elements, id=id)


def random_db(rng: np.random.Generator, n_categories: int, size: int) -> list[Layout]:
    return [random_layout(rng, n_categories, id=f"db-{i}") for i in range(size)]


def brute_force_max_total(weights: np.ndarray) -> float:
    """Exhaustive maximum over one-to-one partial assignments (skip allowed)."""
    w = np.asarray(weights, dtype=np.float64)
    m, n = w.shape
    from functools import lru_cache

    @lru_cache(maxsize=None)
    def go(i: int, used: int) -> float:
        if i == m:
            return 0.0
        best = go(i + 1, used)
        for j in range(n):
            if not used & (1 << j):
                best = max(best, w[i, j] + go(i + 1, used | (1 << j)))
        return best

    return go(0, 0)
