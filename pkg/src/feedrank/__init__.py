"""feedrank: simulator and analytic engine for popularity- and
personalization-driven news-feed ranking."""

from .config import (
    CommonBenchmark,
    ConfigError,
    FlatHighlighting,
    HeterogeneousBenchmark,
    ModelConfig,
    NonFlatHighlighting,
    baseline_config,
    load_config,
)
from .driver import (
    ClickEvent,
    EnsembleResult,
    RunResult,
    run_ensemble,
    run_once,
    run_variant_heterogeneous,
    run_variant_noncentered,
)
from .metrics import IndexReport, compute_wap
from .model import Agent, ItemSet, WorldResampleError, sample_world

__version__ = "0.1.0"

__all__ = [
    "Agent",
    "ClickEvent",
    "CommonBenchmark",
    "ConfigError",
    "EnsembleResult",
    "FlatHighlighting",
    "HeterogeneousBenchmark",
    "IndexReport",
    "ItemSet",
    "ModelConfig",
    "NonFlatHighlighting",
    "RunResult",
    "WorldResampleError",
    "baseline_config",
    "compute_wap",
    "load_config",
    "run_ensemble",
    "run_once",
    "run_variant_heterogeneous",
    "run_variant_noncentered",
    "sample_world",
    "__version__",
]
