"""
Configuration file tests
"""

import pytest

from config.settings import FIELD_NOTES, PipelineConfig, dump_config, load_config, parse_config, save_config
from utils.errors import ConfigError


def test_defaults():
    cfg = PipelineConfig()
    assert (cfg.r1, cfg.r2, cfg.alpha, cfg.beta, cfg.v_threshold) == (45.0, 70.0, 100.0, 0.34, 200.0)
    assert (cfg.mu, cfg.nu, cfg.gamma1, cfg.gamma2, cfg.q_threshold) == (10.70, 10.70, 0.67, 3.40, 0.7)
    assert cfg.sector_deg == 45.0
    assert cfg.iou_min == 0.5


def test_every_field_is_documented():
    assert set(FIELD_NOTES) == set(PipelineConfig.model_fields)


def test_dump_and_parse_give_the_same_config():
    cfg = PipelineConfig(r1=40.0, psi_unit="degrees", inner_pairs_require_v=True, workers=3)
    assert parse_config(dump_config(cfg)) == cfg


def test_dump_marks_provenance():
    text = dump_config(PipelineConfig())
    assert "v_threshold=200.0" in text
    assert "[published]" in text and "[tuned]" in text


def test_comments_and_blank_lines_are_ignored():
    cfg = parse_config("# tuned for large nuclei\n\nr1=50\nr2=80\n")
    assert (cfg.r1, cfg.r2) == (50.0, 80.0)


@pytest.mark.parametrize("text", [
    "r1=abc\n",
    "unknown_key=1\n",
    "r1=80\nr2=70\n",
    "r1\n",
    "psi_unit=radians\n",
])
def test_invalid_config_is_rejected(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_save_then_load(tmp_path):
    target = save_config(PipelineConfig(kappa_min=0.05), tmp_path / "cfg" / "splitter.env")
    assert load_config(target).kappa_min == 0.05


def test_missing_file_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.env")


def test_no_path_gives_defaults():
    assert load_config(None) == PipelineConfig()


def test_parameter_objects_follow_the_config():
    cfg = PipelineConfig(r1=30.0, v_threshold=180.0, q_threshold=0.9, min_area=80)
    pairing, quality = cfg.pairing_params(), cfg.quality_params()
    assert (pairing.r1, pairing.v_threshold) == (30.0, 180.0)
    assert (quality.q_threshold, quality.min_area) == (0.9, 80.0)
