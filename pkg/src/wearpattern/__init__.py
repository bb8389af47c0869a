"""Daily wearable heart-rate series: ingestion, clustering, sleep-pattern rules and statistics."""
from . import clustering, distance, evaluation, kernels, patterns, stats, synth, timeseries
from .errors import WearPatternError

__version__ = "0.1.0"

__all__ = [
    "WearPatternError", "__version__", "clustering", "distance", "evaluation", "kernels",
    "patterns", "stats", "synth", "timeseries",
]
