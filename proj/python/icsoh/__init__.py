"""Battery SOH estimation from incremental-capacity features (C++ core)."""

from ._core import (
    ConfigError,
    DataError,
    NumericalError,
    PipelineConfig,
    compute_metrics,
    config_hash,
    generate_capacity,
    parse_config,
    pca_fit,
    pearson,
    run_command,
    savitzky_golay_smooth,
)

__all__ = [
    "ConfigError",
    "DataError",
    "NumericalError",
    "PipelineConfig",
    "compute_metrics",
    "config_hash",
    "generate_capacity",
    "parse_config",
    "pca_fit",
    "pearson",
    "run_command",
    "savitzky_golay_smooth",
]
