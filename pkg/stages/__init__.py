from stages.base_stage import BaseStage, StageConfig, StageResponse
from stages.candidates import CandidateStage
from stages.connections import ConnectionStage
from stages.dividing import DividingStage
from stages.pair_screening import PairScreeningStage
from stages.preprocess import PreprocessStage

__all__ = [
    "BaseStage",
    "StageConfig",
    "StageResponse",
    "PreprocessStage",
    "CandidateStage",
    "PairScreeningStage",
    "ConnectionStage",
    "DividingStage",
]
