"""
Connection Stage

Komşu çiftler için elips uydurma kalitesi Q ve açgözlü bağlantı seçimi;
sonuç C* = C+ ∪ C- kümesidir.
"""

import os
import sys
from typing import Any, Dict

# Python path fix
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from config.settings import PipelineConfig
from stages.base_stage import BaseStage, StageConfig, StageResponse
from utils.ellipse_fit import ConnectionPlan, plan_connections
from utils.image_prep import ClumpGeometry


class ConnectionStage(BaseStage):

    def __init__(self, pipeline_config: PipelineConfig):
        config = StageConfig(name="connections", description="Selecting connections by ellipse-fit quality")
        super().__init__(config, pipeline_config)

    def process(self, context: Dict[str, Any]) -> StageResponse:
        geometry: ClumpGeometry = context["geometry"]
        cfg = self.pipeline_config
        pairing, quality = cfg.pairing_params(), cfg.quality_params()

        plans: Dict[int, ConnectionPlan] = {}
        for contour in geometry.contours:
            cid = contour.contour_id
            partition = context["partitions"][cid]
            plans[cid] = plan_connections(
                contour, context["profiles"][cid], context["candidates"][cid],
                partition.faces, partition.c_minus, pairing, quality,
            )

        n_star = sum(len(plan.c_star) for plan in plans.values())
        return StageResponse(success=True, data={"plans": plans}, notes=[f"|C*| = {n_star}"])
