"""Collection-level evaluation metrics.

Alignment and Overlap are intrinsic to the generated collection; max-IoU
and the proxy Frechet distance compare it against a reference collection.

Alignment here is the plain 6-anchor nearest-distance average scaled by
100, without any log transform, so reported values are not comparable to
alignment numbers published under other scalings.  The proxy Frechet
distance runs over handcrafted geometric features, not a pretrained
feature network; it is deliberately named proxy_fd, not FID, and must not
be compared against FID figures.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .core import Layout
from .index import count_key
from .matching import GeometryMode, layout_similarity, max_weight_total


@dataclass(frozen=True)
class MetricsReport:
    alignment: float
    overlap: float
    miou: float
    proxy_fd: float
    n_layouts: int

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def _anchor_matrix(layout: Layout) -> np.ndarray:
    """6 x N anchors: left, center-x, right, top, center-y, bottom."""
    rows = []
    for e in layout.elements:
        x1, y1, x2, y2 = e.bbox.corners
        rows.append((x1, e.bbox.cx, x2, y1, e.bbox.cy, y2))
    return np.asarray(rows, dtype=np.float64).T


def _alignment_term(layout: Layout) -> float:
    """Mean over elements of the nearest same-anchor distance; 0 for N=1."""
    n = layout.n
    if n < 1:
        raise ValueError("layout is empty")
    if n == 1:
        return 0.0
    anchors = _anchor_matrix(layout)  # 6 x N
    diff = np.abs(anchors[:, :, None] - anchors[:, None, :])  # 6 x N x N
    nearest = diff.min(axis=0)  # N x N over anchor kinds
    np.fill_diagonal(nearest, np.inf)
    return float(nearest.min(axis=1).mean())


def _overlap_term(layout: Layout) -> float:
    """Sum of pairwise intersection areas over total element area."""
    if layout.n < 1:
        raise ValueError("layout is empty")
    corners = np.asarray([e.bbox.corners for e in layout.elements])
    x1, y1, x2, y2 = corners.T
    iw = np.minimum(x2[:, None], x2[None, :]) - np.maximum(x1[:, None], x1[None, :])
    ih = np.minimum(y2[:, None], y2[None, :]) - np.maximum(y1[:, None], y1[None, :])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    pair_sum = float(np.triu(inter, k=1).sum())
    total_area = float(sum(e.bbox.area for e in layout.elements))
    if total_area <= 0.0:
        raise ValueError("layout has zero total area")
    return pair_sum / total_area


def alignment(layouts: Sequence[Layout]) -> float:
    """Mean nearest-anchor distance x 100; 0 on perfectly aligned collections."""
    if len(layouts) == 0:
        raise ValueError("empty collection")
    return 100.0 * float(np.mean([_alignment_term(l) for l in layouts]))


def overlap(layouts: Sequence[Layout]) -> float:
    """Mean per-layout overlapping-area ratio."""
    if len(layouts) == 0:
        raise ValueError("empty collection")
    return float(np.mean([_overlap_term(l) for l in layouts]))


def max_iou(generated: Sequence[Layout], references: Sequence[Layout]) -> float:
    """Matched similarity between collections sharing a category multiset.

    Both collections are grouped by count key; each shared group is matched
    one-to-one by maximum total FULL-mode similarity.  The sum of matched
    scores is divided by the number of generated layouts, so generated
    layouts whose type set never occurs in the references score 0.
    """
    if len(generated) == 0 or len(references) == 0:
        raise ValueError("both collections must be non-empty")
    n_categories = 1 + max(
        e.category for l in list(generated) + list(references) for e in l.elements
    )
    gen_groups: dict[tuple[int, ...], list[Layout]] = {}
    for l in generated:
        gen_groups.setdefault(count_key(l, n_categories).counts, []).append(l)
    ref_groups: dict[tuple[int, ...], list[Layout]] = {}
    for l in references:
        ref_groups.setdefault(count_key(l, n_categories).counts, []).append(l)

    total = 0.0
    for key, gen_layouts in gen_groups.items():
        ref_layouts = ref_groups.get(key)
        if not ref_layouts:
            continue
        weights = np.empty((len(gen_layouts), len(ref_layouts)))
        for i, g in enumerate(gen_layouts):
            for j, r in enumerate(ref_layouts):
                weights[i, j] = layout_similarity(g, r, GeometryMode.FULL)
        total += max_weight_total(weights)
    return total / float(len(generated))


def layout_features(layout: Layout, n_categories: int) -> np.ndarray:
    """Handcrafted feature vector: count fractions, geometry moments, overlap, alignment."""
    counts = np.zeros(n_categories)
    geom = np.empty((layout.n, 4))
    for i, e in enumerate(layout.elements):
        counts[e.category] += 1.0
        geom[i] = (e.bbox.cx, e.bbox.cy, e.bbox.w, e.bbox.h)
    counts /= float(layout.n)
    means = geom.mean(axis=0)
    stds = geom.std(axis=0)
    return np.concatenate(
        [counts, means, stds, [_overlap_term(layout)], [_alignment_term(layout)]]
    )


def proxy_frechet(
    generated: Sequence[Layout],
    references: Sequence[Layout],
    n_categories: int | None = None,
) -> float:
    """Frechet distance between Gaussian fits of handcrafted layout features.

    ||mu1 - mu2||^2 + tr(S1 + S2 - 2 (S1 S2)^(1/2)), with symmetric matrix
    square roots taken by eigendecomposition and eigenvalues floored at 0.
    A 1e-6 diagonal jitter keeps degenerate covariances well-posed.
    """
    if len(generated) < 1 or len(references) < 1:
        raise ValueError("both collections must be non-empty")
    if n_categories is None:
        n_categories = 1 + max(
            e.category for l in list(generated) + list(references) for e in l.elements
        )
    fg = np.stack([layout_features(l, n_categories) for l in generated])
    fr = np.stack([layout_features(l, n_categories) for l in references])
    mu1, mu2 = fg.mean(axis=0), fr.mean(axis=0)
    d = fg.shape[1]
    jitter = 1e-6 * np.eye(d)
    s1 = np.cov(fg, rowvar=False, bias=False) if len(fg) > 1 else np.zeros((d, d))
    s2 = np.cov(fr, rowvar=False, bias=False) if len(fr) > 1 else np.zeros((d, d))
    s1 = s1 + jitter
    s2 = s2 + jitter

    def sym_sqrt(mat: np.ndarray) -> np.ndarray:
        vals, vecs = np.linalg.eigh((mat + mat.T) / 2.0)
        vals = np.clip(vals, 0.0, None)
        return (vecs * np.sqrt(vals)) @ vecs.T

    s1h = sym_sqrt(s1)
    cross = sym_sqrt(s1h @ s2 @ s1h)
    diff = mu1 - mu2
    fd = float(diff @ diff + np.trace(s1 + s2 - 2.0 * cross))
    return max(fd, 0.0)


def compute_metrics(
    generated: Sequence[Layout],
    references: Sequence[Layout],
    n_categories: int,
) -> MetricsReport:
    return MetricsReport(
        alignment=alignment(generated),
        overlap=overlap(generated),
        miou=max_iou(generated, references),
        proxy_fd=proxy_frechet(generated, references, n_categories),
        n_layouts=len(generated),
    )
