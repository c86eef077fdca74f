"""Count-key index: lookups against linear-scan oracles, persistence."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from layoutrag.core import BBox, CategorySchema, Element, Layout
from layoutrag.errors import IndexFormatError, IndexVersionError
from layoutrag.index import (
    CountKey,
    build_index,
    count_key,
    load_index,
    query_exact,
    query_lower_bound,
    save_index,
)

from conftest import random_db


def _layout(categories, rid=None):
    els = tuple(Element(c, BBox(0.5, 0.5, 0.2, 0.2)) for c in categories)
    return Layout(elements=els, id=rid)


def oracle_exact(db, n_categories, key):
    return [i for i, l in enumerate(db) if count_key(l, n_categories) == key]


def oracle_lower_bound(db, n_categories, min_counts):
    out = []
    for i, l in enumerate(db):
        counts = count_key(l, n_categories).counts
        if all(c >= m for c, m in zip(counts, min_counts.counts)):
            out.append(i)
    return out


class TestCountKey:
    def test_counts(self):
        assert count_key(_layout([0, 0, 1]), 3) == CountKey((2, 1, 0))

    def test_single_image(self):
        assert count_key(_layout([2]), 3) == CountKey((0, 0, 1))

    def test_permutation_invariant(self):
        rng = np.random.default_rng(0)
        cats = list(rng.integers(0, 4, size=9))
        perm = list(cats)
        rng.shuffle(perm)
        assert count_key(_layout(cats), 4) == count_key(_layout(perm), 4)


class TestBuildAndQuery:
    @pytest.fixture
    def small_db(self):
        # keys: (2,1), (2,1), (1,0) over categories (text, title)
        return [_layout([0, 0, 1], "a"), _layout([1, 0, 0], "b"), _layout([0], "c")]

    def test_build_structure(self, small_db):
        idx = build_index(small_db, 2)
        assert len(idx.exact) == 2
        assert idx.cumulative[0][1] == [0, 1]  # count(text) >= 2
        assert idx.cumulative[0][0] == [0, 1, 2]
        assert idx.cumulative[1][0] == [0, 1]

    def test_query_exact_matches(self, small_db):
        idx = build_index(small_db, 2)
        assert query_exact(idx, CountKey((2, 1))) == oracle_exact(small_db, 2, CountKey((2, 1)))
        assert query_exact(idx, CountKey((1, 0))) == [2]

    def test_query_absent_key(self, small_db):
        idx = build_index(small_db, 2)
        assert query_exact(idx, CountKey((5, 5))) == []

    def test_single_layout_db(self):
        db = [_layout([0, 1], "only")]
        idx = build_index(db, 2)
        assert len(idx.exact) == 1
        assert idx.cumulative[0][0] == [0]
        assert idx.cumulative[0][1] == []

    def test_empty_db_rejected(self):
        with pytest.raises(ValueError):
            build_index([], 2)

    def test_self_membership(self, schema3):
        rng = np.random.default_rng(1)
        db = random_db(rng, schema3.size, 50)
        idx = build_index(db, schema3.size)
        for i, l in enumerate(db):
            key = count_key(l, schema3.size)
            assert i in query_exact(idx, key)
            assert i in query_lower_bound(idx, key)

    def test_lower_bound_all_zero(self, schema3):
        rng = np.random.default_rng(2)
        db = random_db(rng, schema3.size, 20)
        idx = build_index(db, schema3.size)
        assert query_lower_bound(idx, CountKey((0, 0, 0))) == list(range(20))

    def test_lower_bound_over_cap(self, schema3):
        rng = np.random.default_rng(3)
        db = random_db(rng, schema3.size, 10)
        idx = build_index(db, schema3.size)
        assert query_lower_bound(idx, CountKey((21, 0, 0))) == []

    def test_lower_bound_intersection_example(self):
        # "at least 3 text and 2 title" is the intersection of the two posting lists
        db = [
            _layout([0, 0, 0, 1, 1]),  # 3 text, 2 title  -> qualifies
            _layout([0, 0, 0, 1]),     # 3 text, 1 title
            _layout([0, 0, 1, 1]),     # 2 text, 2 title
            _layout([0, 0, 0, 0, 1, 1, 2]),  # qualifies
        ]
        idx = build_index(db, 3)
        want = CountKey((3, 2, 0))
        assert query_lower_bound(idx, want) == [0, 3]
        lists = [idx.cumulative[0][2], idx.cumulative[1][1]]
        manual = sorted(set(lists[0]) & set(lists[1]))
        assert query_lower_bound(idx, want) == manual

    def test_random_queries_match_oracle(self, schema3):
        rng = np.random.default_rng(4)
        db = random_db(rng, schema3.size, 300)
        idx = build_index(db, schema3.size)
        for _ in range(150):
            probe = CountKey(tuple(int(v) for v in rng.integers(0, 4, size=3)))
            assert query_exact(idx, probe) == oracle_exact(db, 3, probe)
            assert query_lower_bound(idx, probe) == oracle_lower_bound(db, 3, probe)

    def test_nesting_property(self, schema3):
        rng = np.random.default_rng(5)
        db = random_db(rng, schema3.size, 100)
        idx = build_index(db, schema3.size)
        for c in range(3):
            for k in range(1, 20):
                assert set(idx.cumulative[c][k]) <= set(idx.cumulative[c][k - 1])

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_union_of_exact_covers_db(self, seed):
        rng = np.random.default_rng(seed)
        db = random_db(rng, 3, 30)
        idx = build_index(db, 3)
        union = sorted(i for ids in idx.exact.values() for i in ids)
        assert union == list(range(len(db)))


class TestPersistence:
    def test_roundtrip(self, tmp_path, schema3):
        rng = np.random.default_rng(6)
        db = random_db(rng, schema3.size, 64)
        idx = build_index(db, schema3.size)
        path = tmp_path / "idx.lrix"
        save_index(idx, path)
        assert load_index(path) == idx

    def test_deterministic_bytes(self, tmp_path, schema3):
        rng = np.random.default_rng(7)
        db = random_db(rng, schema3.size, 40)
        p1, p2 = tmp_path / "a.lrix", tmp_path / "b.lrix"
        save_index(build_index(db, schema3.size), p1)
        save_index(build_index(db, schema3.size), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_truncated_file(self, tmp_path, schema3):
        db = random_db(np.random.default_rng(8), schema3.size, 10)
        path = tmp_path / "idx.lrix"
        save_index(build_index(db, schema3.size), path)
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) - 7])
        with pytest.raises(IndexFormatError):
            load_index(path)

    def test_future_version(self, tmp_path, schema3):
        db = random_db(np.random.default_rng(9), schema3.size, 10)
        path = tmp_path / "idx.lrix"
        save_index(build_index(db, schema3.size), path)
        raw = bytearray(path.read_bytes())
        raw[4:8] = (99).to_bytes(4, "little")
        path.write_bytes(bytes(raw))
        with pytest.raises(IndexVersionError):
            load_index(path)

    def test_not_an_index(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"definitely not an index")
        with pytest.raises(IndexFormatError):
            load_index(path)

    def test_db_size_mismatch(self, tmp_path, schema3):
        db = random_db(np.random.default_rng(10), schema3.size, 10)
        path = tmp_path / "idx.lrix"
        save_index(build_index(db, schema3.size), path)
        with pytest.raises(IndexFormatError):
            load_index(path, db=db[:5])
