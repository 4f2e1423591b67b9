"""
Candidate Stage

Her kontur için eğrilik profili, konkav segment oylaması ve düşük
Walking Energy'li aday noktaların birleştirilmesi.
"""

import os
import sys
from typing import Any, Dict, List

# Python path fix
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from config.settings import PipelineConfig
from stages.base_stage import BaseStage, StageConfig, StageResponse
from utils.curvature import CandidatePoint, CurvatureProfile, compute_curvature, vote_candidates
from utils.image_prep import ClumpGeometry
from utils.pairing import merge_low_energy


class CandidateStage(BaseStage):

    def __init__(self, pipeline_config: PipelineConfig):
        config = StageConfig(name="candidates", description="Voting concave candidate points")
        super().__init__(config, pipeline_config)

    def process(self, context: Dict[str, Any]) -> StageResponse:
        geometry: ClumpGeometry = context["geometry"]
        cfg = self.pipeline_config
        pairing = cfg.pairing_params()

        profiles: Dict[int, CurvatureProfile] = {}
        voted: Dict[int, List[CandidatePoint]] = {}
        candidates: Dict[int, List[CandidatePoint]] = {}

        total = max(len(geometry.contours), 1)
        for k, contour in enumerate(geometry.contours):
            self._update_progress(int(100 * k / total), "processing", f"Contour {contour.contour_id}")
            profile = compute_curvature(contour)
            raw = vote_candidates(contour, profile, geometry.mask, cfg.kappa_min)
            profiles[contour.contour_id] = profile
            voted[contour.contour_id] = raw
            candidates[contour.contour_id] = merge_low_energy(raw, contour, pairing, profile)

        n_raw = sum(len(v) for v in voted.values())
        n_kept = sum(len(v) for v in candidates.values())
        if n_raw != n_kept:
            self.logger.debug(f"Walking Energy merge removed {n_raw - n_kept} candidate(s)")
        return StageResponse(
            success=True,
            data={"profiles": profiles, "voted": voted, "candidates": candidates},
            notes=[f"{n_kept} candidate point(s)"],
        )
