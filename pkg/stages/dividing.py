"""
Dividing Stage

C* içindeki her çift için Hessian vadisi boyunca bölme eğrisi izlenir,
ardından maske eğrilerle bölünüp etiketlenir.
"""

import os
import sys
from typing import Any, Dict, List

# Python path fix
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from config.settings import PipelineConfig
from stages.base_stage import BaseStage, StageConfig, StageResponse
from utils.curve_trace import BoundarySnapper, DividingPath, apply_divisions, hessian_field, trace_dividing_curve
from utils.image_prep import ClumpGeometry
from utils.pairing import PointPair


class DividingStage(BaseStage):

    def __init__(self, pipeline_config: PipelineConfig):
        config = StageConfig(name="dividing", description="Tracing dividing curves along intensity valleys")
        super().__init__(config, pipeline_config)

    def _trace_pair(self, field, geometry: ClumpGeometry, snapper: BoundarySnapper, pair: PointPair):
        # deeper notch first
        first, second = (pair.a, pair.b) if abs(pair.a.kappa) >= abs(pair.b.kappa) else (pair.b, pair.a)
        start, goal = snapper.snap(first.position), snapper.snap(second.position)
        if start == goal:
            self.logger.warning(f"Pair {pair.endpoints} snaps to a single boundary pixel {start}, skipped")
            return None
        cfg = self.pipeline_config
        return trace_dividing_curve(
            field, geometry.channel, start, goal,
            max_dev=cfg.sector_deg,
            lambda1_rel_tol=cfg.lambda1_rel_tol,
            budget_factor=cfg.trace_budget_factor,
            source_pair=pair,
        )

    def process(self, context: Dict[str, Any]) -> StageResponse:
        geometry: ClumpGeometry = context["geometry"]
        plans = context["plans"]
        cfg = self.pipeline_config

        pairs = [pair for plan in plans.values() for pair in plan.c_star]
        paths: List[DividingPath] = []
        if pairs:
            self._update_progress(10, "processing", "Computing Hessian field")
            field = hessian_field(geometry.channel, cfg.hessian_sigma)
            snapper = BoundarySnapper(geometry.mask)
            for k, pair in enumerate(pairs):
                self._update_progress(10 + int(80 * k / len(pairs)), "processing", f"Tracing pair {pair.endpoints}")
                path = self._trace_pair(field, geometry, snapper, pair)
                if path is not None:
                    paths.append(path)

        fallbacks = sum(path.fallback for path in paths)
        if fallbacks:
            self.logger.info(f"{fallbacks} of {len(paths)} path(s) fell back to the straight chord")

        self._update_progress(95, "processing", "Applying divisions")
        labels = apply_divisions(geometry.mask, paths, cfg.min_fragment_area)
        return StageResponse(
            success=True,
            data={"paths": paths, "labels": labels},
            notes=[f"{len(paths)} dividing path(s)", f"{labels.count} object(s)"],
        )
