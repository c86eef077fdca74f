"""Native-format adapters feeding the canonical schema."""
import json

import pytest

from layoutrag.adapters import (
    PUBLAYNET_LABELS,
    RICO_LABELS,
    publaynet_to_dataset,
    rico_screen_to_record,
    rico_to_dataset,
)
from layoutrag.core import load_dataset
from layoutrag.errors import DatasetError


RICO_SCREEN = {
    "bounds": [0, 0, 1440, 2560],
    "children": [
        {
            "componentLabel": "Toolbar",
            "bounds": [0, 0, 1440, 256],
            "children": [
                {"componentLabel": "Text", "bounds": [72, 64, 720, 192]},
            ],
        },
        {"componentLabel": "Image", "bounds": [360, 640, 1080, 1280]},
        {"bounds": [0, 2304, 1440, 2560]},  # unlabeled container: skipped
        {"componentLabel": "Mystery Widget", "bounds": [0, 0, 10, 10]},  # unknown label
    ],
}


class TestRicoAdapter:
    def test_flattens_and_normalizes(self, tmp_path):
        record = rico_screen_to_record(RICO_SCREEN, "screen1")
        assert record["canvas"] == {"w": 1440.0, "h": 2560.0}
        labels = [e["category"] for e in record["elements"]]
        assert labels == ["Toolbar", "Text", "Image"]
        # Image node: (360,640)-(1080,1280) in a 1440x2560 canvas
        img = record["elements"][2]
        assert img["cx"] == 720.0 and img["cy"] == 960.0
        assert img["w"] == 720.0 and img["h"] == 640.0

        path = tmp_path / "screen1.json"
        path.write_text(json.dumps(RICO_SCREEN))
        doc = rico_to_dataset([path])
        assert doc["schema"] == list(RICO_LABELS)
        out = tmp_path / "rico.json"
        out.write_text(json.dumps(doc))
        schema, layouts = load_dataset(out)
        assert schema.size == 25
        b = layouts[0].elements[2].bbox
        assert (b.cx, b.cy, b.w, b.h) == (0.5, 0.375, 0.5, 0.25)

    def test_missing_bounds_rejected(self):
        with pytest.raises(DatasetError):
            rico_screen_to_record({"children": []}, "bad")

    def test_label_count(self):
        assert len(RICO_LABELS) == 25


COCO = {
    "images": [
        {"id": 1, "width": 800, "height": 1000, "file_name": "page1.png"},
        {"id": 2, "width": 400, "height": 500, "file_name": "page2.png"},
    ],
    "categories": [
        {"id": 1, "name": "text"},
        {"id": 2, "name": "title"},
        {"id": 3, "name": "list"},
        {"id": 4, "name": "table"},
        {"id": 5, "name": "figure"},
    ],
    "annotations": [
        {"image_id": 1, "category_id": 1, "bbox": [100, 200, 600, 300]},
        {"image_id": 1, "category_id": 2, "bbox": [100, 50, 600, 100]},
        {"image_id": 2, "category_id": 5, "bbox": [0, 0, 400, 250]},
        {"image_id": 2, "category_id": 5, "bbox": [10, 10, 0, 50]},  # degenerate: skipped
        {"image_id": 99, "category_id": 1, "bbox": [0, 0, 10, 10]},  # unknown image
    ],
}


class TestPubLayNetAdapter:
    def test_converts_and_normalizes(self, tmp_path):
        src = tmp_path / "coco.json"
        src.write_text(json.dumps(COCO))
        doc = publaynet_to_dataset(src)
        assert doc["schema"] == list(PUBLAYNET_LABELS)
        assert len(doc["layouts"]) == 2
        out = tmp_path / "publaynet.json"
        out.write_text(json.dumps(doc))
        schema, layouts = load_dataset(out)
        assert schema.size == 5
        page1 = next(l for l in layouts if l.id == "page1.png")
        text = next(e for e in page1.elements if e.category == 0)
        # bbox [100,200,600,300] on 800x1000: center (400, 350), size (600, 300)
        assert (text.bbox.cx, text.bbox.cy) == (0.5, 0.35)
        assert (text.bbox.w, text.bbox.h) == (0.75, 0.3)
        page2 = next(l for l in layouts if l.id == "page2.png")
        assert page2.n == 1  # degenerate annotation dropped

    def test_unknown_category_name_rejected(self, tmp_path):
        bad = dict(COCO)
        bad["categories"] = [{"id": 1, "name": "sidebar"}]
        src = tmp_path / "bad.json"
        src.write_text(json.dumps(bad))
        with pytest.raises(DatasetError):
            publaynet_to_dataset(src)
