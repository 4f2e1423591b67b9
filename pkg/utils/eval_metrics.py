"""
Object-level segmentation metrics

Jaccard (eşleşen nesnelerin ortalama IoU'su), Precision, Recall, F1 ve
eşleşen nesne sınırları arasındaki ortalama Hausdorff mesafesi.
Eşleştirme: IoU azalan sırada açgözlü, birebir, IoU ≥ iou_min.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterable, List, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree
from skimage.segmentation import find_boundaries

from utils.errors import MetricError
from utils.image_prep import LabelMask

logger = logging.getLogger(__name__)

Match = Tuple[int, int, float]

METRIC_COLUMNS = ("jaccard", "precision", "recall", "f1", "hausdorff")


@dataclass(frozen=True)
class ObjectScore:
    pred_id: int
    gt_id: int
    iou: float
    hausdorff: float


@dataclass(frozen=True)
class MetricReport:
    jaccard: float
    precision: float
    recall: float
    f1: float
    hausdorff: float
    n_pred: int = 0
    n_gt: int = 0
    n_matched: int = 0
    per_object: Tuple[ObjectScore, ...] = field(default=())

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["hausdorff"] = None if math.isnan(self.hausdorff) else self.hausdorff
        data["per_object"] = [
            {**asdict(obj), "hausdorff": None if math.isnan(obj.hausdorff) else obj.hausdorff}
            for obj in self.per_object
        ]
        return data


def _labels(mask) -> np.ndarray:
    labels = mask.labels if isinstance(mask, LabelMask) else np.asarray(mask)
    if labels.ndim != 2:
        raise MetricError(f"label mask must be 2-D, got shape {labels.shape}")
    return labels.astype(np.int64)


def _object_ids(labels: np.ndarray) -> np.ndarray:
    ids = np.unique(labels)
    return ids[ids > 0]


def iou_matrix(pred, gt) -> np.ndarray:
    """IoU of every (pred label, gt label) pair, indexed by label - 1"""
    p, g = _labels(pred), _labels(gt)
    if p.shape != g.shape:
        raise MetricError(f"shape mismatch: pred {p.shape} vs gt {g.shape}")
    n_p, n_g = int(p.max(initial=0)), int(g.max(initial=0))
    table = np.bincount(p.ravel() * (n_g + 1) + g.ravel(), minlength=(n_p + 1) * (n_g + 1))
    table = table.reshape(n_p + 1, n_g + 1)
    area_p, area_g = table.sum(axis=1), table.sum(axis=0)
    inter = table[1:, 1:].astype(np.float64)
    union = area_p[1:, None] + area_g[None, 1:] - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(union > 0, inter / union, 0.0)


def match_objects(pred, gt, iou_min: float = 0.5) -> List[Match]:
    """Greedy one-to-one matching by descending IoU; ties go to lower ids."""
    iou = iou_matrix(pred, gt)
    if iou.size == 0:
        return []
    rows, cols = np.nonzero((iou >= iou_min) & (iou > 0))
    order = sorted(zip(rows.tolist(), cols.tolist()), key=lambda rc: (-iou[rc], rc[0], rc[1]))

    used_pred, used_gt, matches = set(), set(), []
    for r, c in order:
        if r in used_pred or c in used_gt:
            continue
        used_pred.add(r)
        used_gt.add(c)
        matches.append((r + 1, c + 1, float(iou[r, c])))
    return matches


def hausdorff(a, b) -> float:
    """Symmetric Hausdorff distance between two point sets"""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 2)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 2)
    if len(a) == 0 or len(b) == 0:
        raise MetricError("Hausdorff distance of an empty point set is undefined")
    d_ab, _ = cKDTree(b).query(a)
    d_ba, _ = cKDTree(a).query(b)
    return float(max(d_ab.max(), d_ba.max()))


def boundary_points(object_mask: np.ndarray) -> np.ndarray:
    return np.argwhere(find_boundaries(object_mask, mode="inner") & object_mask)


def compute_metrics(matches: Sequence[Match], pred, gt) -> MetricReport:
    p, g = _labels(pred), _labels(gt)
    n_pred, n_gt = len(_object_ids(p)), len(_object_ids(g))
    if n_pred == 0 and n_gt == 0:
        return MetricReport(jaccard=1.0, precision=1.0, recall=1.0, f1=1.0, hausdorff=0.0)

    tp = len(matches)
    precision = tp / n_pred if n_pred else 0.0
    recall = tp / n_gt if n_gt else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0

    per_object = []
    for pred_id, gt_id, iou in matches:
        distance = hausdorff(boundary_points(p == pred_id), boundary_points(g == gt_id))
        per_object.append(ObjectScore(pred_id=pred_id, gt_id=gt_id, iou=iou, hausdorff=distance))

    jaccard = float(np.mean([obj.iou for obj in per_object])) if per_object else 0.0
    mean_hd = float(np.mean([obj.hausdorff for obj in per_object])) if per_object else float("nan")
    return MetricReport(jaccard=jaccard, precision=precision, recall=recall, f1=f1, hausdorff=mean_hd,
                        n_pred=n_pred, n_gt=n_gt, n_matched=tp, per_object=tuple(per_object))


def evaluate_masks(pred, gt, iou_min: float = 0.5) -> MetricReport:
    return compute_metrics(match_objects(pred, gt, iou_min), pred, gt)


def aggregate_reports(rows: Iterable[Dict[str, Any]]) -> pd.DataFrame:
    """
    (mean, std) of every metric per group.

    Each row needs a "group" key plus the metric columns; std is the
    population std (ddof = 0), NaN Hausdorff values are skipped.
    """
    columns = ["group", "n_images"] + [f"{m}_{s}" for m in METRIC_COLUMNS for s in ("mean", "std")]
    frame = pd.DataFrame(list(rows))
    if frame.empty:
        return pd.DataFrame(columns=columns)

    summary = []
    for group, part in frame.groupby("group", sort=True):
        record = {"group": group, "n_images": int(len(part))}
        for metric in METRIC_COLUMNS:
            values = pd.to_numeric(part[metric], errors="coerce")
            record[f"{metric}_mean"] = float(values.mean())
            record[f"{metric}_std"] = float(values.std(ddof=0))
        summary.append(record)
    return pd.DataFrame(summary, columns=columns)
