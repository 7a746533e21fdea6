import math

import numpy as np
import pytest

import semprobe


def test_rle_round_trip_and_iou():
    rng = np.random.default_rng(0)
    mask = (rng.random((7, 5)) < 0.4).astype(np.uint8)
    rle = semprobe.rle_encode(mask)
    assert tuple(rle["size"]) == (7, 5)
    assert sum(rle["counts"]) == 35
    np.testing.assert_array_equal(semprobe.rle_decode(rle), mask)
    assert semprobe.mask_iou(rle, rle) == 1.0

    empty = semprobe.rle_encode(np.zeros((4, 4), dtype=np.uint8))
    assert empty["counts"] == [16]
    assert semprobe.box_iou([0, 0, 2, 2], [1, 1, 2, 2]) == pytest.approx(1 / 7)


def test_invalid_rle_raises():
    with pytest.raises(semprobe.SemprobeError):
        semprobe.rle_decode({"size": [2, 2], "counts": [1, 1]})


def test_grid_and_cosine():
    pts = semprobe.grid_points(1024, 1024, 2)
    np.testing.assert_allclose(pts, [[256, 256], [768, 256], [256, 768], [768, 768]])
    a = np.array([1.0, 2.0, 3.0], dtype=np.float32)
    assert semprobe.cosine_similarity(a, 4 * a) == pytest.approx(1.0)


def test_softmax_and_probe_learns_blobs():
    p = semprobe.softmax(np.array([1.0, 2.0, 3.0], dtype=np.float32))
    assert p.sum() == pytest.approx(1.0, abs=1e-6)

    x, y = semprobe.gen_blobs(num_classes=4, dim=8, per_class=100, separation=6.0, seed=1)
    vx, vy = semprobe.gen_blobs(num_classes=4, dim=8, per_class=100, separation=6.0, seed=2)
    assert x.shape == (400, 8) and y.dtype == np.int64
    w, b, history = semprobe.train_probe(x, y, epochs=20, seed=3, val_x=vx, val_y=vy)
    assert w.shape == (4, 8) and b.shape == (4,)
    assert len(history) == 20
    assert semprobe.topk_accuracy(w, b, vx, vy, k=1) >= 0.99


def test_tensor_io(tmp_path):
    arr = np.arange(12, dtype=np.float32).reshape(3, 4)
    path = tmp_path / "a.tnsr"
    semprobe.write_tensor(path, arr)
    np.testing.assert_array_equal(semprobe.read_tensor(path), arr)
    labels = np.array([3, 1, 2], dtype=np.int64)
    semprobe.write_tensor(tmp_path / "l.tnsr", labels)
    out = semprobe.read_tensor(tmp_path / "l.tnsr")
    assert out.dtype == np.int64
    np.testing.assert_array_equal(out, labels)
    with pytest.raises(semprobe.SemprobeError, match="missing.tnsr"):
        semprobe.read_tensor(tmp_path / "missing.tnsr")


def test_evaluate_ground_truth_as_detections():
    gt = {
        "images": [{"id": 1, "width": 10, "height": 10}],
        "annotations": [
            {"id": 1, "image_id": 1, "category_id": 1, "bbox": [0, 0, 4, 4], "iscrowd": 0},
            {"id": 2, "image_id": 1, "category_id": 2, "bbox": [5, 5, 3, 3], "iscrowd": 0},
        ],
        "categories": [{"id": 1, "name": "a"}, {"id": 2, "name": "b"}],
    }
    dets = [
        {"image_id": 1, "category_id": 1, "score": 0.9, "bbox": [0, 0, 4, 4]},
        {"image_id": 1, "category_id": 2, "score": 0.8, "bbox": [5, 5, 3, 3]},
    ]
    report = semprobe.evaluate(dets, gt, iou_type="box")
    assert report["mean"]["AP"] == 1.0
    assert len(report["per_category"]) == 2


def test_tsne_separates_clusters():
    rng = np.random.default_rng(4)
    x = np.concatenate([rng.normal(size=(20, 16)) + 10 * np.eye(16)[c] for c in range(3)]).astype(np.float32)
    labels = np.repeat(np.arange(3), 20).astype(np.int64)
    points, final_kl, kl_250 = semprobe.tsne(x, perplexity=10, iterations=500, seed=1)
    assert points.shape == (60, 2)
    assert final_kl < kl_250
    assert semprobe.silhouette(points, labels) > 0.5
    assert math.isfinite(final_kl)
