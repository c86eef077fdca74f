"""Converters from native annotation formats into the canonical dataset JSON.

Both adapters emit records with absolute pixel coordinates plus a canvas
block; normalization to the unit canvas happens in the loader.
"""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Iterable

from .errors import DatasetError

logger = logging.getLogger(__name__)

# Semantic UI component labels (25 classes).
RICO_LABELS = (
    "Advertisement",
    "Background Image",
    "Bottom Navigation",
    "Button Bar",
    "Card",
    "Checkbox",
    "Date Picker",
    "Drawer",
    "Icon",
    "Image",
    "Input",
    "List Item",
    "Map View",
    "Modal",
    "Multi-Tab",
    "Number Stepper",
    "On/Off Switch",
    "Pager Indicator",
    "Radio Button",
    "Slider",
    "Text",
    "Text Button",
    "Toolbar",
    "Video",
    "Web View",
)

# Document region classes (5 classes), in native category-id order.
PUBLAYNET_LABELS = ("text", "title", "list", "table", "figure")


def _walk_rico(node: dict) -> Iterable[dict]:
    label = node.get("componentLabel")
    if label is not None:
        yield node
    for child in node.get("children", []) or []:
        yield from _walk_rico(child)


def rico_screen_to_record(doc: dict, record_id: str) -> dict:
    """One semantic-annotation screen tree -> one canonical layout record."""
    bounds = doc.get("bounds")
    if not bounds or len(bounds) != 4:
        raise DatasetError(f"{record_id}: missing root bounds")
    width = float(bounds[2]) - float(bounds[0])
    height = float(bounds[3]) - float(bounds[1])
    if width <= 0 or height <= 0:
        raise DatasetError(f"{record_id}: degenerate canvas {bounds}")
    elements = []
    for node in _walk_rico(doc):
        label = node["componentLabel"]
        if label not in RICO_LABELS:
            continue
        x1, y1, x2, y2 = (float(v) for v in node["bounds"])
        x1, x2 = max(x1, 0.0), min(x2, width)
        y1, y2 = max(y1, 0.0), min(y2, height)
        if x2 <= x1 or y2 <= y1:
            continue
        elements.append(
            {
                "category": label,
                "cx": (x1 + x2) / 2.0,
                "cy": (y1 + y2) / 2.0,
                "w": x2 - x1,
                "h": y2 - y1,
            }
        )
    return {
        "id": record_id,
        "canvas": {"w": width, "h": height},
        "elements": elements,
    }


def rico_to_dataset(paths: Iterable[str | Path]) -> dict:
    """Convert semantic screen JSON files into a canonical dataset document."""
    records = []
    skipped = 0
    for path in paths:
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
            records.append(rico_screen_to_record(doc, path.stem))
        except (OSError, json.JSONDecodeError, DatasetError, KeyError, TypeError) as exc:
            skipped += 1
            logger.warning("skipping %s: %s", path, exc)
    if skipped:
        logger.warning("skipped %d screen files", skipped)
    return {"schema": list(RICO_LABELS), "layouts": records}


def publaynet_to_dataset(coco_path: str | Path) -> dict:
    """Convert a COCO-style document annotation file into a canonical dataset."""
    coco_path = Path(coco_path)
    try:
        doc = json.loads(coco_path.read_text(encoding="utf-8"))
        images = {img["id"]: img for img in doc["images"]}
        categories = {c["id"]: c["name"] for c in doc["categories"]}
        annotations = doc["annotations"]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DatasetError(f"cannot read annotations {coco_path}: {exc}") from exc
    for name in categories.values():
        if name not in PUBLAYNET_LABELS:
            raise DatasetError(f"unexpected category {name!r} in {coco_path}")

    by_image: dict[object, list[dict]] = {}
    skipped = 0
    for ann in annotations:
        img = images.get(ann.get("image_id"))
        if img is None:
            skipped += 1
            continue
        try:
            x, y, w, h = (float(v) for v in ann["bbox"])
            name = categories[ann["category_id"]]
        except (KeyError, TypeError, ValueError):
            skipped += 1
            continue
        if w <= 0 or h <= 0:
            skipped += 1
            continue
        by_image.setdefault(ann["image_id"], []).append(
            {"category": name, "cx": x + w / 2.0, "cy": y + h / 2.0, "w": w, "h": h}
        )
    if skipped:
        logger.warning("%s: skipped %d annotations", coco_path, skipped)
    records = []
    for image_id, elements in by_image.items():
        img = images[image_id]
        records.append(
            {
                "id": str(img.get("file_name", image_id)),
                "canvas": {"w": float(img["width"]), "h": float(img["height"])},
                "elements": elements,
            }
        )
    return {"schema": list(PUBLAYNET_LABELS), "layouts": records}
