"""Online conformal prediction intervals for multi-step time series forecasts."""

__version__ = "0.1.0"

from .core import ExperimentConfig, IntervalPanel, ScorePanel, SeriesFrame  # noqa: E402
from .engine import RunPlan, RunResult, run  # noqa: E402
from .forecasters import ForecasterSpec  # noqa: E402

__all__ = [
    "ExperimentConfig",
    "ForecasterSpec",
    "IntervalPanel",
    "RunPlan",
    "RunResult",
    "ScorePanel",
    "SeriesFrame",
    "run",
    "__version__",
]
