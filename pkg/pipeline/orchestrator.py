"""
Pipeline Orchestrator - clumped nuclei splitter

Aşamaları sırayla çalıştırır:
preprocess -> candidates -> pairing -> connections -> dividing

Her aşama bir StageResponse döner; başarısız bir yanıt PipelineError'a
dönüştürülür (hangi aşamanın düştüğü ve orijinal hata saklanır).
"""

import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Union

import numpy as np
from rich.logging import RichHandler

# Add project root to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from config.settings import PipelineConfig
from stages import (BaseStage, CandidateStage, ConnectionStage, DividingStage, PairScreeningStage,
                    PreprocessStage, StageResponse)
from utils.curve_trace import DividingPath
from utils.errors import PipelineError
from utils.image_prep import LabelMask, RasterImage

logger = logging.getLogger("pipeline")

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logging(level: Union[str, int] = "INFO", log_file: Optional[str] = None) -> logging.Logger:
    """Rich console handler plus an optional plain-text log file"""
    root = logging.getLogger()
    root.setLevel(logging.DEBUG)
    for handler in list(root.handlers):
        root.removeHandler(handler)

    console = RichHandler(rich_tracebacks=False, show_path=False)
    console.setLevel(level)
    root.addHandler(console)

    if log_file:
        fh = logging.FileHandler(log_file)
        fh.setLevel(logging.DEBUG)
        fh.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(fh)
    return logger


class PipelineEvent:
    def __init__(self, event_type: str, data: Dict[str, Any], stage_name: str = "", timestamp: str = None):
        self.event_type = event_type
        self.stage_name = stage_name
        self.data = data
        self.timestamp = timestamp or datetime.now().isoformat()

    def __str__(self):
        return f"Event: {self.event_type} [{self.stage_name}] - {self.data}"


class EventBus:
    def __init__(self):
        self.listeners: Dict[str, List[Callable]] = {}
        self.history: List[PipelineEvent] = []

    def subscribe(self, event_type: str, callback: Callable):
        self.listeners.setdefault(event_type, []).append(callback)

    def publish(self, event: PipelineEvent):
        self.history.append(event)
        for callback in self.listeners.get(event.event_type, []):
            try:
                callback(event)
            except Exception as e:
                logger.warning(f"Event callback error: {e}")


class PipelineStatus(Enum):
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


@dataclass
class PipelineResult:
    labels: LabelMask
    paths: List[DividingPath]
    diagnostics: Dict[str, Any]
    context: Dict[str, Any] = field(default_factory=dict, repr=False)


def json_safe(value):
    """Non-finite floats become None so diagnostics stay strict JSON"""
    if isinstance(value, dict):
        return {str(k): json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def build_diagnostics(context: Dict[str, Any], timings: Dict[str, float], notes: Dict[str, List[str]]) -> Dict[str, Any]:
    geometry = context.get("geometry")
    contours = []
    for contour in (geometry.contours if geometry else []):
        cid = contour.contour_id
        partition = context["partitions"][cid]
        plan = context["plans"][cid]
        contours.append({
            "contour_id": cid,
            "n_points": len(contour),
            "length": context["profiles"][cid].length,
            "n_voted": len(context["voted"][cid]),
            "candidates": [
                {"index": c.contour_index, "x": c.position[0], "y": c.position[1], "kappa": c.kappa, "s_star": c.s_star}
                for c in context["candidates"][cid]
            ],
            "c_plus": [pair.to_dict() for pair in partition.screening.c_plus],
            "c_minus": [pair.to_dict() for pair in partition.c_minus],
            "rejected": [pair.to_dict() for pair in partition.screening.rejected],
            "evaluated": [scored.to_dict() for scored in plan.evaluated],
            "committed": [scored.to_dict() for scored in plan.committed],
            "c_star": [pair.to_dict() for pair in plan.c_star],
        })

    paths: List[DividingPath] = context.get("paths", [])
    labels: Optional[LabelMask] = context.get("labels")
    return json_safe({
        "stages": {name: {"processing_time": timings[name], "notes": notes.get(name, [])} for name in timings},
        "foreground_area": geometry.mask.area if geometry else 0,
        "n_contours": len(contours),
        "n_labels": labels.count if labels is not None else 0,
        "n_paths": len(paths),
        "n_fallback_paths": sum(p.fallback for p in paths),
        "contours": contours,
        "paths": [path.to_dict() for path in paths],
    })


class SegmentationPipeline:
    """
    Runs every stage in order over a shared context dict.

    Deterministic end to end: same image + config gives the same labels.
    """

    def __init__(self, config: Optional[PipelineConfig] = None, progress_callback: Optional[Callable] = None):
        self.config = config or PipelineConfig()
        self.event_bus = EventBus()
        self.status = PipelineStatus.PENDING
        self.stages: List[BaseStage] = [
            PreprocessStage(self.config),
            CandidateStage(self.config),
            PairScreeningStage(self.config),
            ConnectionStage(self.config),
            DividingStage(self.config),
        ]
        for stage in self.stages:
            stage.set_progress_callback(progress_callback)
            stage.set_event_callback(self._on_stage_event)
        self.results: Dict[str, StageResponse] = {}

    def _on_stage_event(self, stage_name: str, event_type: str, data: Dict[str, Any], timestamp: str):
        self.event_bus.publish(PipelineEvent(event_type, data, stage_name=stage_name, timestamp=timestamp))

    def run(self, img: RasterImage) -> PipelineResult:
        self.status = PipelineStatus.RUNNING
        self.results = {}
        context: Dict[str, Any] = {"image": img}
        started = time.perf_counter()
        logger.debug(f"Pipeline started on image {img.shape} ({img.channels} channel(s))")

        for stage in self.stages:
            response = stage.execute(context)
            self.results[stage.name] = response
            if not response.success:
                self.status = PipelineStatus.FAILED
                cause = response.exception or RuntimeError("; ".join(response.errors) or "unknown failure")
                raise PipelineError(stage.name, cause) from cause
            context.update(response.data)

        self.status = PipelineStatus.COMPLETED
        timings = {name: r.processing_time for name, r in self.results.items()}
        notes = {name: r.notes for name, r in self.results.items()}
        diagnostics = build_diagnostics(context, timings, notes)
        diagnostics["total_time"] = time.perf_counter() - started
        logger.info(f"Segmented {diagnostics['n_labels']} object(s) with {diagnostics['n_paths']} dividing path(s) "
                    f"in {diagnostics['total_time']:.2f}s")
        return PipelineResult(labels=context["labels"], paths=list(context["paths"]),
                              diagnostics=diagnostics, context=context)

    def get_status(self) -> Dict[str, Any]:
        return {
            "status": self.status.value,
            "stages": [stage.get_status() for stage in self.stages],
            "events": len(self.event_bus.history),
        }


def run_pipeline(img: RasterImage, cfg: Optional[PipelineConfig] = None) -> PipelineResult:
    """image_prep → curvature → pairing → ellipse_fit → curve_trace → apply_divisions"""
    return SegmentationPipeline(cfg).run(img)
