import math

import numpy as np
import pytest

import zoomnet


def test_version():
    assert zoomnet.__version__ == "0.1.0"


def test_iou_and_union():
    a = zoomnet.RoiBox(0, 0, 0.5, 0.5)
    b = zoomnet.RoiBox(0.25, 0.25, 0.75, 0.75)
    assert zoomnet.iou(a, a) == 1.0
    assert zoomnet.iou(a, b) == pytest.approx(1 / 7)
    assert zoomnet.union_box(a, b) == zoomnet.RoiBox(0, 0, 0.75, 0.75)


def test_deroi_then_roi_is_identity():
    rng = np.random.default_rng(0)
    local = rng.normal(size=(1, 2, 3, 2))
    box = zoomnet.RoiBox(0.25, 0.0, 0.75, 0.75)  # 6x4 cells on an 8x8 palette
    palette = zoomnet.deroi_pool(local, box, 8, 8)
    assert palette.shape == (1, 2, 8, 8)
    assert np.all(palette[:, :, 6:, :] == 0)
    assert np.all(palette[:, :, :, :2] == 0) and np.all(palette[:, :, :, 6:] == 0)
    np.testing.assert_array_equal(zoomnet.roi_pool(palette, box, 3, 2), local)


def test_roi_pool_rejects_wrong_rank():
    with pytest.raises(ValueError):
        zoomnet.roi_pool(np.zeros((2, 2)), zoomnet.RoiBox(), 1, 1)


def test_normalization_goldens():
    assert zoomnet.normalize_object_label("old man") == "man"
    assert zoomnet.normalize_object_label("men") == "man"
    assert zoomnet.normalize_predicate_label("wears a")["keyword"] == "wear"
    walking = zoomnet.normalize_predicate_label("walking on a")
    assert (walking["verb"], walking["prep"], walking["adj"]) == ("walk", "on", None)


def test_lch():
    assert zoomnet.lch_similarity("shirt", "shirt") == pytest.approx(1.0)
    assert zoomnet.lch_similarity("shirt", "shirt", normalized=False) == pytest.approx(math.log(28))
    assert zoomnet.lch_similarity("shirt", "jacket") >= 0.65
    assert zoomnet.lch_similarity("shirt", "zzqx") is None


def test_trees():
    obj, pred = zoomnet.build_trees(["old man", "men", "dog"], ["stands on", "are standing on", "on"])
    assert obj["levels"][1] == ["man", "dog"]
    assert obj["maps"][0] == [0, 0, 1]
    assert "stand|on" in pred["levels"][1]


def test_scene_and_recall():
    image, gold = zoomnet.generate_scene(3)
    assert image.dtype == np.uint8 and image.shape == (64, 64, 3)
    assert gold
    preds = [
        {
            "image": g["image"],
            "subject": {**g["subject"], "prob": 1.0},
            "predicate": {"label": g["predicate"], "prob": 1.0},
            "object": {**g["object"], "prob": 1.0},
            "score": 1.0,
        }
        for g in gold
    ]
    for task in ("predicate", "phrase", "relationship"):
        assert zoomnet.rec_at_n(preds, gold, 100, task) == (len(gold), len(gold))
    assert len(zoomnet.triplet_nms(preds + preds)) == len(preds)


def test_gradcheck_subset():
    rows = zoomnet.gradcheck(["relu", "roi_pool"], seeds=2)
    assert [r["op"] for r in rows] == ["relu", "roi_pool"]
    assert all(r["pass"] for r in rows)
    with pytest.raises(zoomnet.ConfigError):
        zoomnet.gradcheck(["nope"], seeds=1)
