"""scalesim: deterministic simulator and policy library for predictive fleet auto-scaling."""

from .core import (
    Forecast,
    RngSeed,
    TimeGrid,
    TimeSeries,
    empirical_quantile,
    forecast_quantile_path,
)
from .engine import (
    LossReport,
    PolicyStats,
    Scenario,
    SimulationError,
    SimulationTrace,
    evaluate,
    run,
)

__version__ = "0.1.0"
