"""Patch-based channel-independent time-series transformer (C++ core)."""

from ._patchcast import (
    ConfigError,
    Forecaster,
    IoError,
    ShapeError,
    TrainError,
    default_config,
    gelu,
    instance_denormalize,
    instance_normalize,
    mse_mae,
    patch_count,
    patch_count_nonoverlap,
    patchify,
    patchify_nonoverlap,
    softmax,
    synth,
    train_supervised_run,
)

__all__ = [
    "ConfigError",
    "Forecaster",
    "IoError",
    "ShapeError",
    "TrainError",
    "default_config",
    "gelu",
    "instance_denormalize",
    "instance_normalize",
    "mse_mae",
    "patch_count",
    "patch_count_nonoverlap",
    "patchify",
    "patchify_nonoverlap",
    "softmax",
    "synth",
    "train_supervised_run",
]
