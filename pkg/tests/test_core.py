"""Data model, encodings, and ingestion."""
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from layoutrag.core import (
    BBox,
    CategorySchema,
    Condition,
    EPS_BOX,
    Element,
    Layout,
    Slot,
    clamp_bbox,
    decode_layout,
    encode_condition,
    encode_layout,
    load_dataset,
    parse_condition_record,
    sample_completion_condition,
    save_dataset,
    validate_condition,
)
from layoutrag.errors import ConditionError, DatasetError

from conftest import random_layout


finite_coord = st.floats(min_value=-2.0, max_value=3.0, allow_nan=False)


class TestBBox:
    def test_corner_form(self):
        b = BBox(cx=0.5, cy=0.4, w=0.2, h=0.1)
        x1, y1, x2, y2 = b.corners
        assert (x1, y1, x2, y2) == pytest.approx((0.4, 0.35, 0.6, 0.45))
        assert x1 < x2 and y1 < y2

    @given(finite_coord, finite_coord, finite_coord, finite_coord)
    @settings(max_examples=200)
    def test_clamp_idempotent_and_in_range(self, cx, cy, w, h):
        c1 = clamp_bbox(BBox(cx, cy, w, h))
        c2 = clamp_bbox(c1)
        assert c1 == c2
        assert 0.0 <= c1.cx <= 1.0 and 0.0 <= c1.cy <= 1.0
        assert EPS_BOX <= c1.w <= 1.0 and EPS_BOX <= c1.h <= 1.0


class TestEncoding:
    def test_single_element_row(self, schema2):
        layout = Layout(elements=(Element(0, BBox(0.5, 0.5, 0.2, 0.2)),))
        mat = encode_layout(layout, schema2)
        np.testing.assert_array_equal(mat, [[1.0, 0.0, 0.5, 0.5, 0.2, 0.2]])

    def test_argmax_category(self, schema2):
        layout = decode_layout(np.array([[0.4, 0.6, 0.5, 0.5, 0.2, 0.2]]), schema2)
        assert layout.elements[0].category == 1

    def test_argmax_tie_lowest_id(self, schema2):
        layout = decode_layout(np.array([[0.4, 0.4, 0.5, 0.5, 0.2, 0.2]]), schema2)
        assert layout.elements[0].category == 0

    def test_roundtrip_random_layouts(self, schema3):
        rng = np.random.default_rng(7)
        for _ in range(100):
            layout = random_layout(rng, schema3.size)
            back = decode_layout(encode_layout(layout, schema3), schema3, id=layout.id)
            assert back.categories() == layout.categories()
            for a, b in zip(back.elements, layout.elements):
                assert abs(a.bbox.cx - b.bbox.cx) <= 1e-12
                assert abs(a.bbox.cy - b.bbox.cy) <= 1e-12
                assert abs(a.bbox.w - b.bbox.w) <= 1e-12
                assert abs(a.bbox.h - b.bbox.h) <= 1e-12

    def test_condition_encoding_masks(self, schema2):
        cond = Condition(
            slots=(
                Slot(category=1, size=(0.3, 0.2), position=None),
                Slot(),
            )
        )
        values, attrs, chans = encode_condition(cond, schema2)
        np.testing.assert_array_equal(values[0], [0.0, 1.0, 0.0, 0.0, 0.3, 0.2])
        np.testing.assert_array_equal(attrs, [[1.0, 1.0, 0.0], [0.0, 0.0, 0.0]])
        np.testing.assert_array_equal(chans[0], [True, True, False, False, True, True])
        assert not chans[1].any()


class TestIngestion:
    def _write(self, tmp_path, doc):
        path = tmp_path / "data.json"
        path.write_text(json.dumps(doc))
        return path

    def test_element_count_filter(self, tmp_path, schema2):
        def rec(n, rid):
            return {
                "id": rid,
                "elements": [
                    {"category": "text", "cx": 0.5, "cy": 0.5, "w": 0.1, "h": 0.1}
                ] * n,
            }

        doc = {"schema": ["text", "title"], "layouts": [rec(3, "a"), rec(21, "b"), rec(5, "c")]}
        _, layouts = load_dataset(self._write(tmp_path, doc))
        assert sorted(l.n for l in layouts) == [3, 5]

    def test_empty_record_skipped(self, tmp_path):
        doc = {
            "schema": ["text"],
            "layouts": [
                {"id": "empty", "elements": []},
                {"id": "ok", "elements": [{"category": "text", "cx": 0.5, "cy": 0.5, "w": 0.1, "h": 0.1}]},
            ],
        }
        _, layouts = load_dataset(self._write(tmp_path, doc))
        assert [l.id for l in layouts] == ["ok"]

    def test_pixel_normalization(self, tmp_path):
        # hand-computed: 360/1440 = 0.25, 640/2560 = 0.25, 288/1440 = 0.2, 512/2560 = 0.2
        doc = {
            "schema": ["text"],
            "layouts": [
                {
                    "id": "px",
                    "canvas": {"w": 1440, "h": 2560},
                    "elements": [{"category": "text", "cx": 360, "cy": 640, "w": 288, "h": 512}],
                }
            ],
        }
        _, layouts = load_dataset(self._write(tmp_path, doc))
        b = layouts[0].elements[0].bbox
        assert (b.cx, b.cy, b.w, b.h) == (0.25, 0.25, 0.2, 0.2)

    def test_non_finite_coordinate_skipped(self, tmp_path):
        doc = {
            "schema": ["text"],
            "layouts": [
                {"elements": [{"category": "text", "cx": float("nan"), "cy": 0.5, "w": 0.1, "h": 0.1}]},
                {"elements": [{"category": "text", "cx": 0.5, "cy": 0.5, "w": 0.1, "h": 0.1}]},
            ],
        }
        _, layouts = load_dataset(self._write(tmp_path, doc))
        assert len(layouts) == 1

    def test_unknown_category_skipped(self, tmp_path):
        doc = {
            "schema": ["text"],
            "layouts": [
                {"elements": [{"category": "banner", "cx": 0.5, "cy": 0.5, "w": 0.1, "h": 0.1}]},
                {"elements": [{"category": "text", "cx": 0.5, "cy": 0.5, "w": 0.1, "h": 0.1}]},
            ],
        }
        _, layouts = load_dataset(self._write(tmp_path, doc))
        assert len(layouts) == 1

    def test_all_invalid_raises(self, tmp_path):
        doc = {"schema": ["text"], "layouts": [{"elements": []}]}
        with pytest.raises(DatasetError):
            load_dataset(self._write(tmp_path, doc))

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(DatasetError):
            load_dataset(tmp_path / "missing.json")

    def test_schema_mismatch(self, tmp_path, schema3):
        doc = {"schema": ["text"], "layouts": [
            {"elements": [{"category": "text", "cx": 0.5, "cy": 0.5, "w": 0.1, "h": 0.1}]}
        ]}
        with pytest.raises(DatasetError):
            load_dataset(self._write(tmp_path, doc), schema=schema3)

    def test_save_load_roundtrip(self, tmp_path, schema3):
        rng = np.random.default_rng(0)
        layouts = [random_layout(rng, schema3.size, id=f"l{i}") for i in range(10)]
        path = tmp_path / "rt.json"
        save_dataset(path, schema3, layouts)
        schema_back, back = load_dataset(path)
        assert schema_back.names == schema3.names
        assert back == layouts


class TestCompletionCondition:
    def test_fraction_of_ten(self, schema3):
        rng = np.random.default_rng(0)
        layout = random_layout(rng, schema3.size, n=10)
        cond = sample_completion_condition(layout, 0.2, np.random.default_rng(1))
        known = [s for s in cond.slots if s.fully_known]
        unknown = [s for s in cond.slots if s.fully_unknown]
        assert len(known) == 2 and len(unknown) == 8
        assert cond.n_elements == 10

    def test_ceiling_single_element(self, schema3):
        layout = random_layout(np.random.default_rng(0), schema3.size, n=1)
        cond = sample_completion_condition(layout, 0.2, np.random.default_rng(1))
        assert sum(s.fully_known for s in cond.slots) == 1

    def test_deterministic_under_seed(self, schema3):
        layout = random_layout(np.random.default_rng(0), schema3.size, n=9)
        a = sample_completion_condition(layout, 0.3, np.random.default_rng(5))
        b = sample_completion_condition(layout, 0.3, np.random.default_rng(5))
        assert a == b

    def test_known_slots_copy_the_layout(self, schema3):
        layout = random_layout(np.random.default_rng(2), schema3.size, n=6)
        cond = sample_completion_condition(layout, 0.5, np.random.default_rng(3))
        for slot, e in zip(cond.slots, layout.elements):
            if slot.fully_known:
                assert slot.category == e.category
                assert slot.size == (e.bbox.w, e.bbox.h)
                assert slot.position == (e.bbox.cx, e.bbox.cy)

    def test_bad_fraction(self, schema3):
        layout = random_layout(np.random.default_rng(0), schema3.size, n=3)
        with pytest.raises(ValueError):
            sample_completion_condition(layout, 1.0, np.random.default_rng(0))


class TestConditionValidation:
    def test_valid(self, schema2):
        validate_condition(Condition.unconstrained(3), schema2.size)

    def test_category_out_of_range(self, schema2):
        with pytest.raises(ConditionError):
            validate_condition(Condition(slots=(Slot(category=2),)), schema2.size)

    def test_size_out_of_range(self, schema2):
        with pytest.raises(ConditionError):
            validate_condition(Condition(slots=(Slot(size=(0.0, 0.5)),)), schema2.size)

    def test_too_many_slots(self, schema2):
        with pytest.raises(ConditionError):
            validate_condition(Condition.unconstrained(21), schema2.size)

    def test_parse_condition_record(self, schema2):
        obj = {
            "n_elements": 2,
            "slots": [
                {"category": "title", "size": [0.3, 0.2], "position": None},
                {"category": None, "size": None, "position": None},
            ],
        }
        cond = parse_condition_record(obj, schema2)
        assert cond.slots[0] == Slot(category=1, size=(0.3, 0.2), position=None)
        assert cond.slots[1].fully_unknown

    def test_parse_condition_count_mismatch(self, schema2):
        with pytest.raises(ConditionError):
            parse_condition_record({"n_elements": 3, "slots": [{}]}, schema2)
