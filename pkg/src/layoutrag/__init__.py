"""Retrieval-augmented controllable layout generation.

Count-key retrieval over a layout database, optimal-assignment similarity,
and a conditional flow-matching generator that can reuse, be guided by, or
ignore retrieved templates.
"""

from .core import (
    BBox,
    CategorySchema,
    Condition,
    Element,
    Layout,
    Slot,
    clamp_bbox,
    decode_layout,
    encode_condition,
    encode_layout,
    load_dataset,
    sample_completion_condition,
    save_dataset,
)
from .index import CountKey, LayoutIndex, build_index, count_key, load_index, query_exact, query_lower_bound, save_index
from .matching import Assignment, GeometryMode, iou, layout_similarity, max_weight_assignment, pair_weight, rank_candidates
from .metrics import MetricsReport, alignment, compute_metrics, max_iou, overlap, proxy_frechet
from .model import ModelConfig, TrainConfig, build_net, load_checkpoint, sample, save_checkpoint, train
from .pipeline import (
    Decision,
    EvalResult,
    RetrievalPolicy,
    Task,
    TaskSpec,
    apply_modification,
    decide,
    evaluate,
    generate,
    retrieve,
)

__version__ = "0.1.0"
