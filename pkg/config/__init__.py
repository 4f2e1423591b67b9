"""Configuration package"""

from config.settings import PipelineConfig, dump_config, load_config, parse_config, save_config

__all__ = ["PipelineConfig", "dump_config", "load_config", "parse_config", "save_config"]
