"""
End-to-end pipeline tests on synthetic clumps
"""

import json

import numpy as np
import pytest

from config.settings import PipelineConfig
from pipeline.orchestrator import SegmentationPipeline, json_safe, run_pipeline
from utils.errors import PipelineError
from utils.eval_metrics import evaluate_masks, match_objects
from utils.image_prep import RasterImage

STAGE_NAMES = ["preprocess", "candidates", "pairing", "connections", "dividing"]


def test_stage_order():
    assert [stage.name for stage in SegmentationPipeline().stages] == STAGE_NAMES


def test_blank_image_has_no_objects():
    result = run_pipeline(RasterImage(np.zeros((48, 48))))
    assert result.labels.count == 0
    assert result.paths == []
    assert result.diagnostics["n_contours"] == 0


def test_single_ellipse_is_left_whole(single_ellipse_case):
    img, gt = single_ellipse_case
    result = run_pipeline(img)
    assert result.labels.count == 1
    assert result.paths == []
    assert evaluate_masks(result.labels, gt).jaccard > 0.9


def test_two_nuclei_are_split(two_nucleus_case):
    img, gt = two_nucleus_case
    result = run_pipeline(img)
    assert result.labels.count == 2
    assert len(result.paths) == 1
    matches = match_objects(result.labels.labels, gt.labels, iou_min=0.5)
    assert len(matches) == 2
    assert all(iou >= 0.8 for _, _, iou in matches)


def test_diagnostics_are_strict_json(two_nucleus_case):
    img, _ = two_nucleus_case
    diagnostics = run_pipeline(img).diagnostics
    for key in ("stages", "foreground_area", "n_contours", "n_labels", "n_paths",
                "n_fallback_paths", "contours", "paths", "total_time"):
        assert key in diagnostics
    assert list(diagnostics["stages"]) == STAGE_NAMES
    contour = diagnostics["contours"][0]
    assert len(contour["candidates"]) == 2
    json.dumps(diagnostics, allow_nan=False)


def test_json_safe_drops_non_finite_values():
    cleaned = json_safe({"a": float("nan"), "b": [np.float64(1.5), np.int64(2)], 3: np.bool_(True)})
    assert cleaned == {"a": None, "b": [1.5, 2], "3": True}


def test_same_input_gives_same_labels(two_nucleus_case):
    img, _ = two_nucleus_case
    first, second = run_pipeline(img), run_pipeline(img)
    assert np.array_equal(first.labels.labels, second.labels.labels)
    assert first.paths == second.paths


def test_failing_stage_is_named(monkeypatch, two_nucleus_case):
    img, _ = two_nucleus_case
    pipeline = SegmentationPipeline()
    pairing = pipeline.stages[2]

    def explode(context):
        raise ValueError("broken pairing")

    monkeypatch.setattr(pairing, "process", explode)
    with pytest.raises(PipelineError) as info:
        pipeline.run(img)
    assert info.value.stage == "pairing"
    assert isinstance(info.value.cause, ValueError)
    assert pipeline.get_status()["status"] == "failed"


def test_status_and_progress_reporting(single_ellipse_case):
    img, _ = single_ellipse_case
    seen = []
    pipeline = SegmentationPipeline(PipelineConfig(), progress_callback=lambda **kw: seen.append(kw["stage_name"]))
    pipeline.run(img)
    status = pipeline.get_status()
    assert status["status"] == "completed"
    assert status["events"] == 2 * len(STAGE_NAMES)
    assert set(seen) == set(STAGE_NAMES)
