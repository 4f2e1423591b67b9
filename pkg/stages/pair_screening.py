"""
Pair Screening Stage

Aday çiftlerin sınıflandırılması (komşu / komşu olmayan), V skoru testi
ve C- kirişleriyle konturun alt konturlara bölünmesi.
"""

import os
import sys
from typing import Any, Dict

# Python path fix
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from config.settings import PipelineConfig
from stages.base_stage import BaseStage, StageConfig, StageResponse
from utils.image_prep import ClumpGeometry
from utils.pairing import PartitionResult, partition_clump


class PairScreeningStage(BaseStage):

    def __init__(self, pipeline_config: PipelineConfig):
        config = StageConfig(name="pairing", description="Screening connectable point pairs")
        super().__init__(config, pipeline_config)

    def process(self, context: Dict[str, Any]) -> StageResponse:
        geometry: ClumpGeometry = context["geometry"]
        pairing = self.pipeline_config.pairing_params()

        partitions: Dict[int, PartitionResult] = {}
        for contour in geometry.contours:
            cid = contour.contour_id
            partitions[cid] = partition_clump(
                contour, context["candidates"][cid], geometry.mask, pairing, context["profiles"][cid]
            )

        n_chords = sum(len(p.c_minus) for p in partitions.values())
        return StageResponse(success=True, data={"partitions": partitions},
                             notes=[f"{n_chords} non-adjacent chord(s)"])
