"""Declarative experiments emitting CSV tables and JSON manifests."""
from .config import ExperimentConfig, load_config, parse_config
from .runners import RUNNERS, RunResult

__all__ = ["ExperimentConfig", "RUNNERS", "RunResult", "load_config", "parse_config"]
