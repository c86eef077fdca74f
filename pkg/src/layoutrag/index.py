"""Category-count index over a layout database.

Two structures are built at index time:
  exact      count-key -> sorted layout ids with exactly those per-category counts
  cumulative (category c, k) -> sorted ids of layouts with count(c) >= k, k = 1..20

Exact lookup answers fully-typed queries; lower-bound queries intersect one
cumulative posting list per constrained category.  Ids are dense integers
assigned in dataset order at build time.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .core import MAX_ELEMENTS, Layout
from .errors import IndexFormatError, IndexVersionError

MAGIC = b"LRIX"
VERSION = 1


@dataclass(frozen=True)
class CountKey:
    """Per-category element counts of one layout."""

    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(c < 0 for c in self.counts):
            raise ValueError("counts must be non-negative")


def count_key(layout: Layout, n_categories: int) -> CountKey:
    counts = [0] * n_categories
    for e in layout.elements:
        counts[e.category] += 1
    return CountKey(counts=tuple(counts))


class LayoutIndex:
    """Immutable after build; rebuild to update."""

    def __init__(
        self,
        n_categories: int,
        n_layouts: int,
        exact: dict[CountKey, list[int]],
        cumulative: list[list[list[int]]],
        db: Sequence[Layout] | None = None,
    ) -> None:
        self.n_categories = n_categories
        self.n_layouts = n_layouts
        self.exact = exact
        self.cumulative = cumulative  # cumulative[c][k-1] = ids with count(c) >= k
        self.db = db

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LayoutIndex):
            return NotImplemented
        return (
            self.n_categories == other.n_categories
            and self.n_layouts == other.n_layouts
            and self.exact == other.exact
            and self.cumulative == other.cumulative
        )

    def all_ids(self) -> list[int]:
        return list(range(self.n_layouts))


def build_index(db: Sequence[Layout], n_categories: int) -> LayoutIndex:
    """Index every layout of `db` under its dense position id."""
    if len(db) == 0:
        raise ValueError("cannot index an empty database")
    exact: dict[CountKey, list[int]] = {}
    cumulative: list[list[list[int]]] = [
        [[] for _ in range(MAX_ELEMENTS)] for _ in range(n_categories)
    ]
    for lid, layout in enumerate(db):
        key = count_key(layout, n_categories)
        exact.setdefault(key, []).append(lid)
        for c, cnt in enumerate(key.counts):
            for k in range(1, min(cnt, MAX_ELEMENTS) + 1):
                cumulative[c][k - 1].append(lid)
    # ids are appended in increasing order, so every list is already sorted
    return LayoutIndex(
        n_categories=n_categories,
        n_layouts=len(db),
        exact=exact,
        cumulative=cumulative,
        db=db,
    )


def query_exact(idx: LayoutIndex, key: CountKey) -> list[int]:
    """Ids whose count key equals `key`, ascending; empty when absent."""
    if len(key.counts) != idx.n_categories:
        raise ValueError(f"key length {len(key.counts)} != C={idx.n_categories}")
    return list(idx.exact.get(key, []))


def query_lower_bound(idx: LayoutIndex, min_counts: CountKey) -> list[int]:
    """Ids with count(c) >= min_counts[c] for every category, ascending.

    Computed as the intersection of one cumulative posting list per
    constrained category, starting from the shortest list.
    """
    if len(min_counts.counts) != idx.n_categories:
        raise ValueError(f"key length {len(min_counts.counts)} != C={idx.n_categories}")
    if any(k > MAX_ELEMENTS for k in min_counts.counts):
        return []
    lists = [
        idx.cumulative[c][k - 1] for c, k in enumerate(min_counts.counts) if k > 0
    ]
    if not lists:
        return idx.all_ids()
    lists.sort(key=len)
    result = lists[0]
    for other in lists[1:]:
        if not result:
            return []
        members = set(other)
        result = [lid for lid in result if lid in members]
    return list(result)


# --- persistence -----------------------------------------------------------
# Layout: MAGIC, u32 version, u64 payload length, payload.  Payload: u32 C,
# u32 n_layouts, u32 number of exact keys, then per key C x u16 counts,
# u32 list length, that many u32 ids; then the C x 20 cumulative lists, each
# u32 length plus u32 ids.  All integers little-endian.


def _pack_ids(ids: list[int]) -> bytes:
    return struct.pack("<I", len(ids)) + struct.pack(f"<{len(ids)}I", *ids)


class _Reader:
    def __init__(self, buf: bytes) -> None:
        self.buf = buf
        self.pos = 0

    def take(self, fmt: str) -> tuple:
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.buf):
            raise IndexFormatError("index file truncated")
        out = struct.unpack_from(fmt, self.buf, self.pos)
        self.pos += size
        return out

    def take_ids(self) -> list[int]:
        (n,) = self.take("<I")
        return list(self.take(f"<{n}I"))


def save_index(idx: LayoutIndex, path: str | Path) -> None:
    parts = [struct.pack("<II", idx.n_categories, idx.n_layouts)]
    keys = sorted(idx.exact.keys(), key=lambda k: k.counts)
    parts.append(struct.pack("<I", len(keys)))
    for key in keys:
        parts.append(struct.pack(f"<{idx.n_categories}H", *key.counts))
        parts.append(_pack_ids(idx.exact[key]))
    for c in range(idx.n_categories):
        for k in range(MAX_ELEMENTS):
            parts.append(_pack_ids(idx.cumulative[c][k]))
    payload = b"".join(parts)
    header = MAGIC + struct.pack("<I", VERSION) + struct.pack("<Q", len(payload))
    Path(path).write_bytes(header + payload)


def load_index(path: str | Path, db: Sequence[Layout] | None = None) -> LayoutIndex:
    """Load an index written by save_index; `db` is attached if supplied."""
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != MAGIC:
        raise IndexFormatError(f"{path} is not an index file")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != VERSION:
        raise IndexVersionError(f"unsupported index version {version} (expected {VERSION})")
    (length,) = struct.unpack_from("<Q", raw, 8)
    payload = raw[16:]
    if len(payload) != length:
        raise IndexFormatError(f"{path}: payload length mismatch (corrupt file)")
    r = _Reader(payload)
    n_categories, n_layouts = r.take("<II")
    (n_keys,) = r.take("<I")
    exact: dict[CountKey, list[int]] = {}
    for _ in range(n_keys):
        counts = r.take(f"<{n_categories}H")
        exact[CountKey(counts=tuple(counts))] = r.take_ids()
    cumulative = [
        [r.take_ids() for _ in range(MAX_ELEMENTS)] for _ in range(n_categories)
    ]
    if r.pos != len(payload):
        raise IndexFormatError(f"{path}: trailing bytes (corrupt file)")
    if db is not None and len(db) != n_layouts:
        raise IndexFormatError(
            f"index covers {n_layouts} layouts but database has {len(db)}"
        )
    return LayoutIndex(
        n_categories=n_categories,
        n_layouts=n_layouts,
        exact=exact,
        cumulative=cumulative,
        db=db,
    )
