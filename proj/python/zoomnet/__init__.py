"""Relationship detection core: ROI/deROI pooling, label hierarchies, metrics."""

import json as _json

from ._core import (
    Checkpoint as _Checkpoint,
    ConfigError,
    ContractError,
    IoError,
    LookupError,
    ParseError,
    RoiBox,
    __version__,
    deroi_pool,
    iou,
    lch_similarity,
    normalize_object_label,
    normalize_predicate_label,
    resource_dir,
    roi_pool,
    union_box,
)
from . import _core

__all__ = [
    "Checkpoint",
    "ConfigError",
    "ContractError",
    "IoError",
    "LookupError",
    "ParseError",
    "RoiBox",
    "build_trees",
    "deroi_pool",
    "generate_scene",
    "gradcheck",
    "iou",
    "lch_similarity",
    "normalize_object_label",
    "normalize_predicate_label",
    "rec_at_n",
    "resource_dir",
    "roi_pool",
    "triplet_nms",
    "union_box",
]


def build_trees(objects, predicates, threshold=0.65):
    """Object and predicate IH-trees over raw labels, as dicts."""
    o, p = _core._build_trees(list(objects), list(predicates), threshold)
    return _json.loads(o), _json.loads(p)


def generate_scene(seed, noise=0.0):
    """(H x W x 3 uint8 image, list of relationship dicts)."""
    image, instances = _core._generate_scene(seed, noise)
    return image, _json.loads(instances)


def rec_at_n(predictions, gold, n, task="relationship", iou_thresh=0.5):
    """(covered, total) for task in predicate / phrase / relationship."""
    return _core._rec_at_n(_json.dumps(predictions), _json.dumps(gold), n, task, iou_thresh)


def triplet_nms(predictions, iou_thresh=0.5):
    return _json.loads(_core._triplet_nms(_json.dumps(predictions), iou_thresh))


def gradcheck(ops=(), seeds=20, bits=64):
    """One row per operator: op, max_error, tolerance, pass."""
    return _json.loads(_core._gradcheck(list(ops), seeds, bits))


class Checkpoint:
    """A trained model loaded from a .ckpt file."""

    def __init__(self, path):
        self._ckpt = _Checkpoint(str(path))

    @property
    def parameter_count(self):
        return self._ckpt.parameter_count

    @property
    def config(self):
        return _json.loads(self._ckpt.config)

    def predict(self, image, pairs, k=1, image_id="image"):
        """Score (subject_box, object_box) pairs on a 3 x H x W float image in [0, 1]."""
        return _json.loads(self._ckpt._predict(image, list(pairs), k, image_id))
