"""Neural iterated learning: O-ILM, A-ILM and one-way agents with exact language metrics."""

from .engine import ExperimentConfig, run_experiment, run_replicate, run_until_egood
from .errors import BaselineError, ConfigError, IlmError, NumericError, StateError
from .lang import LanguageTable

__version__ = "0.1.0"

__all__ = [
    "BaselineError",
    "ConfigError",
    "ExperimentConfig",
    "IlmError",
    "LanguageTable",
    "NumericError",
    "StateError",
    "__version__",
    "run_experiment",
    "run_replicate",
    "run_until_egood",
]
