"""Event camera simulation, reconstruction and evaluation."""

from ._evrecon import (
    DataError,
    NumericError,
    generate_dataset,
    hist_equalize,
    latency,
    load_events,
    mse,
    parse_events,
    reconstruct,
    run_cli,
    save_events,
    ssim,
    voxelize,
)

__all__ = [
    "DataError",
    "NumericError",
    "generate_dataset",
    "hist_equalize",
    "latency",
    "load_events",
    "mse",
    "parse_events",
    "reconstruct",
    "run_cli",
    "save_events",
    "ssim",
    "voxelize",
]
