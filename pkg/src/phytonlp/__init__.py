"""Text pipeline for French plant-health bulletins: ingestion, cleaning, weak
labeling, a two-stage classifier harness, evaluation and tweet filtering."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BuildError,
    ConfigError,
    FilterError,
    IngestError,
    MetricError,
    PhytoError,
    PredictError,
    TrainError,
)

__all__ = [
    "BuildError",
    "ConfigError",
    "FilterError",
    "IngestError",
    "MetricError",
    "PhytoError",
    "PredictError",
    "TrainError",
    "__version__",
]
