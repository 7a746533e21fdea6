"""Python bindings for the semprobe toolkit."""

import json

from ._core import (
    SemprobeError,
    __version__,
    box_iou,
    cosine_similarity,
    gen_blobs,
    grid_points,
    mask_iou,
    read_tensor,
    rle_decode,
    rle_encode,
    set_num_threads,
    silhouette,
    softmax,
    topk_accuracy,
    train_probe,
    tsne,
    write_tensor,
)
from ._core import evaluate_json as _evaluate_json


def evaluate(detections, ground_truth, iou_type="mask", max_detections=100):
    """Score detections against COCO-style ground truth.

    ``detections`` is a list of result dicts and ``ground_truth`` an
    annotation dict, both in the same layout as the JSON files the CLI reads.
    Returns the report as a dict with ``mean`` and ``per_category`` entries.
    """
    report = _evaluate_json(json.dumps(detections), json.dumps(ground_truth), iou_type, max_detections)
    return json.loads(report)


__all__ = [
    "SemprobeError",
    "__version__",
    "box_iou",
    "cosine_similarity",
    "evaluate",
    "gen_blobs",
    "grid_points",
    "mask_iou",
    "read_tensor",
    "rle_decode",
    "rle_encode",
    "set_num_threads",
    "silhouette",
    "softmax",
    "topk_accuracy",
    "train_probe",
    "tsne",
    "write_tensor",
]
