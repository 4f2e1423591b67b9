"""
Batch evaluation and synthetic benchmark

Görüntüler asyncio.to_thread ile eşzamanlı işlenir (workers kadar);
sonuçlar dosya adına göre sıralanır, böylece çıktı tamamlanma sırasından
bağımsızdır. Gruplar ilk alt dizinden gelir (ör. BT/, TM/); kökteki
dosyalar "all" grubundadır.
"""

import asyncio
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, TypeVar, Union

import pandas as pd
from tqdm import tqdm

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from config.settings import PipelineConfig
from pipeline.orchestrator import run_pipeline
from services.image_io import IMAGE_SUFFIXES, load_image, load_label_mask, save_label_png
from services.synthetic import generate_synthetic_clump, synthetic_corpus
from utils.errors import SegmentationError
from utils.eval_metrics import METRIC_COLUMNS, MetricReport, aggregate_reports, evaluate_masks

logger = logging.getLogger(__name__)

T = TypeVar("T")
PathLike = Union[str, Path]

DEFAULT_GROUP = "all"
STRIPPED_SUFFIXES = ("_labels", "_gt", "_mask")
AGGREGATE_CSV = "aggregate.csv"


@dataclass
class BatchReport:
    rows: List[Dict[str, Any]]
    aggregate: pd.DataFrame
    csv_path: Optional[Path] = None
    unpaired: List[str] = field(default_factory=list)
    failed: List[str] = field(default_factory=list)


@dataclass
class BenchmarkSummary:
    n_cases: int
    count_accuracy: float
    mean_jaccard: float
    cases: List[Dict[str, Any]]
    aggregate: pd.DataFrame

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_cases": self.n_cases,
            "count_accuracy": self.count_accuracy,
            "mean_jaccard": self.mean_jaccard,
            "cases": self.cases,
        }


def group_of(relative: Path) -> str:
    return relative.parts[0] if len(relative.parts) > 1 else DEFAULT_GROUP


def _match_key(relative: Path) -> str:
    stem = relative.stem
    for suffix in STRIPPED_SUFFIXES:
        if stem.endswith(suffix) and len(stem) > len(suffix):
            stem = stem[: -len(suffix)]
            break
    return (relative.parent / stem).as_posix()


def list_images(root: PathLike) -> Dict[str, Path]:
    """match key -> file, for every PNG/TIFF below root"""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"directory not found: {root}")
    found: Dict[str, Path] = {}
    for path in sorted(root.rglob("*")):
        if path.is_file() and path.suffix.lower() in IMAGE_SUFFIXES:
            key = _match_key(path.relative_to(root))
            if key in found:
                logger.warning(f"Duplicate image for '{key}': {path.name} ignored")
                continue
            found[key] = path
    return found


def pair_files(left: Dict[str, Path], right: Dict[str, Path]) -> Tuple[List[Tuple[str, Path, Path]], List[str]]:
    paired = [(key, left[key], right[key]) for key in sorted(left.keys() & right.keys())]
    unpaired = sorted(left.keys() ^ right.keys())
    for key in unpaired:
        side = "ground truth" if key in left else "input"
        logger.warning(f"'{key}' has no matching {side} file, skipped")
    return paired, unpaired


async def run_concurrently(items: Sequence[T], worker: Callable[[T], Any], workers: int = 1,
                           desc: str = "Processing") -> List[Any]:
    """worker(item) in threads, at most `workers` at once; results in input order"""
    semaphore = asyncio.Semaphore(max(1, workers))
    bar = tqdm(total=len(items), desc=desc, disable=not items, leave=False)

    async def guarded(item: T) -> Any:
        async with semaphore:
            try:
                return await asyncio.to_thread(worker, item)
            finally:
                bar.update(1)

    try:
        return await asyncio.gather(*(guarded(item) for item in items))
    finally:
        bar.close()


def _report_row(key: str, report: MetricReport) -> Dict[str, Any]:
    row = {"image": key, "group": group_of(Path(key))}
    row.update({metric: getattr(report, metric) for metric in METRIC_COLUMNS})
    row.update({"n_pred": report.n_pred, "n_gt": report.n_gt, "n_matched": report.n_matched})
    return row


def _write_report_json(out_dir: Path, key: str, report: MetricReport) -> Path:
    target = out_dir / f"{key}_metrics.json"
    target.parent.mkdir(parents=True, exist_ok=True)
    payload = {"image": key, "group": group_of(Path(key)), **report.to_dict()}
    target.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    return target


def _finish(rows: List[Optional[Dict[str, Any]]], csv_path: Optional[Path], unpaired: List[str],
            failed: List[str]) -> BatchReport:
    kept = sorted((row for row in rows if row is not None), key=lambda row: row["image"])
    aggregate = aggregate_reports(kept)
    if csv_path is not None:
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        aggregate.to_csv(csv_path, index=False)
        logger.info(f"Wrote aggregate metrics of {len(kept)} image(s) to {csv_path}")
    return BatchReport(rows=kept, aggregate=aggregate, csv_path=csv_path, unpaired=unpaired, failed=sorted(failed))


async def evaluate_directories_async(pred_dir: PathLike, gt_dir: PathLike, iou_min: float = 0.5,
                                     out_csv: Optional[PathLike] = None, workers: int = 1) -> BatchReport:
    """Score ready label masks in pred_dir against gt_dir."""
    paired, unpaired = pair_files(list_images(pred_dir), list_images(gt_dir))
    csv_path = Path(out_csv) if out_csv is not None else None
    failed: List[str] = []

    def score(item: Tuple[str, Path, Path]) -> Optional[Dict[str, Any]]:
        key, pred_path, gt_path = item
        try:
            report = evaluate_masks(load_label_mask(pred_path), load_label_mask(gt_path), iou_min)
        except (SegmentationError, OSError) as exc:
            logger.error(f"{key}: {exc}")
            failed.append(key)
            return None
        if csv_path is not None:
            _write_report_json(csv_path.parent / "reports", key, report)
        return _report_row(key, report)

    rows = await run_concurrently(paired, score, workers, desc="Evaluating")
    return _finish(rows, csv_path, unpaired, failed)


def evaluate_directories(pred_dir: PathLike, gt_dir: PathLike, iou_min: float = 0.5,
                         out_csv: Optional[PathLike] = None, workers: int = 1) -> BatchReport:
    return asyncio.run(evaluate_directories_async(pred_dir, gt_dir, iou_min, out_csv, workers))


async def batch_evaluate_async(input_dir: PathLike, gt_dir: PathLike, cfg: Optional[PipelineConfig] = None,
                               out_dir: Optional[PathLike] = None) -> BatchReport:
    """
    Segment every input image, score it against its ground truth and write
    per-image JSON reports plus the (mean, std) CSV per group.
    """
    cfg = cfg or PipelineConfig()
    paired, unpaired = pair_files(list_images(input_dir), list_images(gt_dir))
    out = Path(out_dir) if out_dir is not None else None
    failed: List[str] = []

    def segment_and_score(item: Tuple[str, Path, Path]) -> Optional[Dict[str, Any]]:
        key, image_path, gt_path = item
        try:
            result = run_pipeline(load_image(image_path), cfg)
            report = evaluate_masks(result.labels, load_label_mask(gt_path), cfg.iou_min)
        except (SegmentationError, OSError) as exc:
            logger.error(f"{key}: {exc}")
            failed.append(key)
            return None
        if out is not None:
            save_label_png(out / "labels" / f"{key}_labels.png", result.labels)
            _write_report_json(out / "reports", key, report)
        return _report_row(key, report)

    rows = await run_concurrently(paired, segment_and_score, cfg.workers, desc="Segmenting")
    return _finish(rows, out / AGGREGATE_CSV if out is not None else None, unpaired, failed)


def batch_evaluate(input_dir: PathLike, gt_dir: PathLike, cfg: Optional[PipelineConfig] = None,
                   out_dir: Optional[PathLike] = None) -> BatchReport:
    return asyncio.run(batch_evaluate_async(input_dir, gt_dir, cfg, out_dir))


async def run_benchmark_async(n: int = 100, seed: int = 7, cfg: Optional[PipelineConfig] = None) -> BenchmarkSummary:
    """Segment the seeded synthetic corpus and score it against its analytic ground truth."""
    cfg = cfg or PipelineConfig()
    specs = synthetic_corpus(n=n, seed=seed, valley_dip=cfg.valley_dip)

    def run_case(item: Tuple[int, Any]) -> Dict[str, Any]:
        index, spec = item
        img, gt = generate_synthetic_clump(spec)
        result = run_pipeline(img, cfg)
        report = evaluate_masks(result.labels, gt, cfg.iou_min)
        return {
            "case": index,
            "group": f"{len(spec.nuclei)}_nuclei",
            "n_nuclei": len(spec.nuclei),
            "n_labels": result.labels.count,
            "count_ok": result.labels.count == gt.count,
            "n_paths": len(result.paths),
            **{metric: getattr(report, metric) for metric in METRIC_COLUMNS},
        }

    cases = await run_concurrently(list(enumerate(specs)), run_case, cfg.workers, desc="Benchmark")
    frame = pd.DataFrame(cases)
    count_accuracy = float(frame["count_ok"].mean()) if len(frame) else 0.0
    mean_jaccard = float(frame["jaccard"].mean()) if len(frame) else 0.0
    logger.info(f"Benchmark of {n} clump(s): count accuracy {count_accuracy:.3f}, mean Jaccard {mean_jaccard:.3f}")
    return BenchmarkSummary(n_cases=n, count_accuracy=count_accuracy, mean_jaccard=mean_jaccard,
                            cases=cases, aggregate=aggregate_reports(cases))


def run_benchmark(n: int = 100, seed: int = 7, cfg: Optional[PipelineConfig] = None) -> BenchmarkSummary:
    return asyncio.run(run_benchmark_async(n, seed, cfg))
