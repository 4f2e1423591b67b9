"""
Pipeline configuration

Tüm ayarlanabilir parametreler tek bir düz key=value dosyasında tutulur
(python-dotenv formatı). Yayımlanmış sabitler ile bizim seçtiğimiz
varsayılanlar dump_config çıktısında ayrı ayrı işaretlenir.
"""

import io
import logging
from pathlib import Path
from typing import Dict, Literal, Tuple, Union

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from utils.ellipse_fit import QualityParams
from utils.errors import ConfigError
from utils.pairing import PairingParams

logger = logging.getLogger(__name__)

PUBLISHED = "published"
TUNED = "tuned"

CONFIG_HEADER = "# clumped nuclei splitter configuration\n# key=value, one per line; '#' starts a comment\n"

# key -> (description, provenance)
FIELD_NOTES: Dict[str, Tuple[str, str]] = {
    "r1": ("inner search radius for adjacent and non-adjacent pairs (px)", PUBLISHED),
    "r2": ("outer search radius for non-adjacent ring pairs (px)", PUBLISHED),
    "alpha": ("V score weight of the normal angle", PUBLISHED),
    "beta": ("V score weight of the curvature sum", PUBLISHED),
    "v_threshold": ("minimum V score for ring pairs", PUBLISHED),
    "mu": ("Q weight of the overlap ratio", PUBLISHED),
    "nu": ("Q weight of the fit angle", PUBLISHED),
    "gamma1": ("Q weight of the perimeter difference", PUBLISHED),
    "gamma2": ("Q weight of the elongation", PUBLISHED),
    "q_threshold": ("minimum Q for connecting an adjacent pair", PUBLISHED),
    "sector_deg": ("half-width of the valley tracing sector (deg)", PUBLISHED),
    "contour_sigma": ("Gaussian contour smoothing sigma (px)", TUNED),
    "hessian_sigma": ("Gaussian sigma of the Hessian (px)", TUNED),
    "kappa_min": ("concavity threshold (1/px)", TUNED),
    "walk_energy_threshold": ("Walking Energy merge threshold (rad)", TUNED),
    "sharp_angle_min": ("minimum angle between chords at a shared endpoint (deg)", TUNED),
    "lambda1_rel_tol": ("|lambda1| tolerance relative to |lambda2|", TUNED),
    "iou_min": ("IoU needed for an object match", TUNED),
    "min_area": ("smallest kept foreground component / cut region (px)", TUNED),
    "max_hole": ("largest filled hole (px)", TUNED),
    "contour_shrink_correction": ("compensate Gaussian contour shrinkage", TUNED),
    "psi_unit": ("unit of the fit angle: half_turn or degrees", TUNED),
    "inner_pairs_require_v": ("apply the V test to inner non-adjacent pairs too", TUNED),
    "min_boundary_fraction": ("least share of real contour in a face left by a cut", TUNED),
    "trace_budget_factor": ("valley walk step budget, multiple of |pq|", TUNED),
    "chord_end_margin": ("chord pixels ignored at each end by the inside-mask test", TUNED),
    "min_fragment_area": ("fragments below this area are merged (px)", TUNED),
    "valley_dip": ("synthetic intensity dip along nucleus overlaps", TUNED),
    "workers": ("concurrent images in batch mode", TUNED),
}


class PipelineConfig(BaseModel):
    """Every tunable of the splitter, with its default"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    r1: float = Field(45.0, gt=0)
    r2: float = Field(70.0, gt=0)
    alpha: float = Field(100.0, gt=0)
    beta: float = Field(0.34, gt=0)
    v_threshold: float = Field(200.0, ge=0)
    mu: float = Field(10.70, ge=0)
    nu: float = Field(10.70, ge=0)
    gamma1: float = Field(0.67, ge=0)
    gamma2: float = Field(3.40, ge=0)
    q_threshold: float = Field(0.7, ge=0)
    sector_deg: float = Field(45.0, gt=0, le=90)
    contour_sigma: float = Field(3.0, gt=0)
    hessian_sigma: float = Field(2.0, gt=0)
    kappa_min: float = Field(0.03, gt=0)
    walk_energy_threshold: float = Field(0.35, ge=0)
    sharp_angle_min: float = Field(20.0, ge=0, le=180)
    lambda1_rel_tol: float = Field(0.15, ge=0)
    iou_min: float = Field(0.5, gt=0, le=1)
    min_area: int = Field(50, ge=0)
    max_hole: int = Field(30, ge=0)
    contour_shrink_correction: bool = True
    psi_unit: Literal["half_turn", "degrees"] = "half_turn"
    inner_pairs_require_v: bool = False
    min_boundary_fraction: float = Field(0.35, ge=0, le=1)
    trace_budget_factor: float = Field(4.0, gt=0)
    chord_end_margin: int = Field(2, ge=0)
    min_fragment_area: int = Field(10, ge=0)
    valley_dip: float = Field(0.15, ge=0, lt=1)
    workers: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _check_radii(self) -> "PipelineConfig":
        if self.r1 >= self.r2:
            raise ValueError(f"r1 ({self.r1}) must be smaller than r2 ({self.r2})")
        return self

    def pairing_params(self) -> PairingParams:
        return PairingParams(
            r1=self.r1,
            r2=self.r2,
            alpha=self.alpha,
            beta=self.beta,
            v_threshold=self.v_threshold,
            walk_energy_threshold=self.walk_energy_threshold,
            inner_pairs_require_v=self.inner_pairs_require_v,
            chord_end_margin=self.chord_end_margin,
        )

    def quality_params(self) -> QualityParams:
        return QualityParams(
            mu=self.mu,
            nu=self.nu,
            gamma1=self.gamma1,
            gamma2=self.gamma2,
            q_threshold=self.q_threshold,
            sharp_angle_min=self.sharp_angle_min,
            psi_unit=self.psi_unit,
            min_boundary_fraction=self.min_boundary_fraction,
            min_area=float(self.min_area),
        )


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: PipelineConfig) -> str:
    lines = [CONFIG_HEADER]
    for name in PipelineConfig.model_fields:
        description, provenance = FIELD_NOTES[name]
        lines.append(f"# {description} [{provenance}]\n")
        lines.append(f"{name}={_format_value(getattr(cfg, name))}\n")
    return "".join(lines)


def parse_config(text: str) -> PipelineConfig:
    """Parse key=value text; unknown keys and bare keys are errors."""
    values = dotenv_values(stream=io.StringIO(text))
    bare = [key for key, value in values.items() if value is None]
    if bare:
        raise ConfigError(f"missing '=' for key(s): {', '.join(bare)}")
    try:
        return PipelineConfig(**values)
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def load_config(path: Union[str, Path, None] = None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    logger.info(f"Loading configuration from {path}")
    return parse_config(path.read_text(encoding="utf-8"))


def save_config(cfg: PipelineConfig, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_config(cfg), encoding="utf-8")
    return path
