"""
Preprocess Stage

Nükleer kanal seçimi, Otsu eşikleme, kontur çıkarma ve Gauss yumuşatma.
"""

import os
import sys
from typing import Any, Dict

# Python path fix
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from config.settings import PipelineConfig
from stages.base_stage import BaseStage, StageConfig, StageResponse
from utils.image_prep import RasterImage, prepare_clumps


class PreprocessStage(BaseStage):
    """image -> channel, foreground mask, smoothed clump contours"""

    def __init__(self, pipeline_config: PipelineConfig):
        config = StageConfig(name="preprocess", description="Binarizing and tracing clump contours")
        super().__init__(config, pipeline_config)

    def process(self, context: Dict[str, Any]) -> StageResponse:
        img: RasterImage = context["image"]
        cfg = self.pipeline_config

        self._update_progress(20, "processing", "Selecting nuclear channel and thresholding")
        geometry = prepare_clumps(
            img,
            contour_sigma=cfg.contour_sigma,
            min_area=cfg.min_area,
            max_hole=cfg.max_hole,
            shrink_correction=cfg.contour_shrink_correction,
        )

        notes = [f"foreground area {geometry.mask.area} px", f"{len(geometry.contours)} contour(s)"]
        if not geometry.contours:
            self.logger.info("No foreground clump found")
        return StageResponse(success=True, data={"geometry": geometry}, notes=notes)
