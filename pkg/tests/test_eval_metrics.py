"""
Object-level metric tests
"""

import math

import numpy as np
import pytest

from utils.errors import MetricError
from utils.eval_metrics import aggregate_reports, compute_metrics, evaluate_masks, hausdorff, iou_matrix, match_objects
from utils.image_prep import LabelMask


def _three_objects():
    labels = np.zeros((40, 60), dtype=np.int32)
    labels[2:12, 2:12] = 1
    labels[20:35, 5:20] = 2
    labels[10:30, 35:55] = 3
    return labels


def _square(offset_x=0, shape=(30, 30)):
    labels = np.zeros(shape, dtype=np.int32)
    labels[5:15, 5 + offset_x:15 + offset_x] = 1
    return labels


def test_identical_masks_match_every_object():
    labels = _three_objects()
    matches = match_objects(labels, labels)
    assert [(p, g) for p, g, _ in matches] == [(1, 1), (2, 2), (3, 3)]
    assert all(iou == 1.0 for _, _, iou in matches)


def test_empty_prediction_matches_nothing():
    assert match_objects(np.zeros((40, 60), dtype=np.int32), _three_objects()) == []


def test_half_overlap_is_below_threshold():
    pred, gt = _square(5), _square(0)
    assert iou_matrix(pred, gt)[0, 0] == pytest.approx(1.0 / 3.0)
    assert match_objects(pred, gt, iou_min=0.5) == []
    assert len(match_objects(pred, gt, iou_min=0.3)) == 1


def test_perfect_prediction_scores_exactly():
    labels = LabelMask(_three_objects())
    report = evaluate_masks(labels, labels)
    assert (report.jaccard, report.precision, report.recall, report.f1, report.hausdorff) == (1.0, 1.0, 1.0, 1.0, 0.0)
    assert report.n_matched == 3


def test_split_object_halves_precision():
    gt = np.zeros((30, 30), dtype=np.int32)
    gt[5:15, 5:25] = 1
    pred = np.zeros_like(gt)
    pred[5:15, 5:15] = 1
    pred[5:15, 15:25] = 2
    report = evaluate_masks(pred, gt, iou_min=0.5)
    assert report.precision == pytest.approx(0.5)
    assert report.recall == pytest.approx(1.0)
    assert report.f1 == pytest.approx(2 * 0.5 / 1.5)


def test_disjoint_masks_score_zero():
    pred, gt = _square(0, (30, 60)), _square(30, (30, 60))
    report = evaluate_masks(pred, gt)
    assert (report.jaccard, report.precision, report.recall, report.f1) == (0.0, 0.0, 0.0, 0.0)
    assert math.isnan(report.hausdorff)
    assert report.to_dict()["hausdorff"] is None


def test_both_empty_is_perfect():
    empty = np.zeros((10, 10), dtype=np.int32)
    report = compute_metrics([], empty, empty)
    assert (report.jaccard, report.precision, report.recall, report.f1, report.hausdorff) == (1.0, 1.0, 1.0, 1.0, 0.0)


def test_shape_mismatch_is_an_error():
    with pytest.raises(MetricError):
        match_objects(np.zeros((10, 10), dtype=int), np.zeros((10, 12), dtype=int))


def test_metrics_ignore_label_permutation():
    gt = _three_objects()
    pred = np.zeros_like(gt)
    pred[3:12, 2:12] = 1
    pred[20:34, 5:21] = 2
    pred[10:30, 36:55] = 3
    reference = evaluate_masks(pred, gt)
    rng = np.random.default_rng(0)
    for _ in range(100):
        mapping = np.concatenate([[0], rng.permutation(3) + 1])
        shuffled = evaluate_masks(mapping[pred], gt)
        assert shuffled.jaccard == pytest.approx(reference.jaccard, abs=1e-12)
        assert shuffled.hausdorff == pytest.approx(reference.hausdorff, abs=1e-12)
        assert (shuffled.precision, shuffled.recall) == (reference.precision, reference.recall)


def test_hausdorff_examples():
    points = np.column_stack([np.arange(10), np.zeros(10)])
    assert hausdorff(points, points) == 0.0
    assert hausdorff(points, points + [0, 3]) == pytest.approx(3.0)

    edge = np.arange(6)
    square = np.array([(x, y) for x in edge for y in edge if x in (0, 5) or y in (0, 5)], dtype=float)
    shifted = square + [5, 0]
    brute = max(
        max(min(math.dist(a, b) for b in shifted) for a in square),
        max(min(math.dist(a, b) for b in square) for a in shifted),
    )
    assert hausdorff(square, shifted) == pytest.approx(brute)
    assert hausdorff(square, shifted) == pytest.approx(5.0)
    assert hausdorff(square, shifted) == hausdorff(shifted, square)


def test_hausdorff_of_empty_set_is_an_error():
    with pytest.raises(MetricError):
        hausdorff(np.zeros((0, 2)), np.zeros((3, 2)))


def test_aggregate_by_group():
    rows = [
        {"group": "BT", "jaccard": 0.8, "precision": 1.0, "recall": 1.0, "f1": 1.0, "hausdorff": 2.0},
        {"group": "BT", "jaccard": 0.6, "precision": 0.5, "recall": 1.0, "f1": 2 / 3, "hausdorff": 4.0},
        {"group": "TM", "jaccard": 0.9, "precision": 1.0, "recall": 1.0, "f1": 1.0, "hausdorff": float("nan")},
    ]
    table = aggregate_reports(rows).set_index("group")
    assert table.loc["BT", "n_images"] == 2
    assert table.loc["BT", "jaccard_mean"] == pytest.approx(0.7)
    assert table.loc["BT", "jaccard_std"] == pytest.approx(0.1)
    assert table.loc["BT", "hausdorff_mean"] == pytest.approx(3.0)
    assert math.isnan(table.loc["TM", "hausdorff_mean"])


def test_aggregate_of_nothing_has_only_headers():
    table = aggregate_reports([])
    assert table.empty
    assert list(table.columns[:3]) == ["group", "n_images", "jaccard_mean"]
