"""Coherent one-way QKD link simulator."""

from ._cowqkd import (
    Config,
    ConfigError,
    Error,
    ParameterError,
    align_csv,
    analytic_rates,
    binary_entropy,
    eve_info_bound,
    predict_csv,
    session,
    sweep_csv,
    toeplitz_hash,
    total_loss_db,
)

__all__ = [
    "Config",
    "ConfigError",
    "Error",
    "ParameterError",
    "align_csv",
    "analytic_rates",
    "binary_entropy",
    "eve_info_bound",
    "predict_csv",
    "session",
    "sweep_csv",
    "toeplitz_hash",
    "total_loss_db",
]
