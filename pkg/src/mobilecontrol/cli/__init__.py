"""Command-line harness: configs, experiment runs and reports."""
from .config import ExperimentConfig, load_config, loads_config
from .harness import RunArtifact, emit_report, run_experiment

__all__ = ["ExperimentConfig", "load_config", "loads_config", "RunArtifact", "emit_report", "run_experiment"]
