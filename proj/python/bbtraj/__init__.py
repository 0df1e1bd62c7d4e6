"""Bounding-box trajectory forecasting with an LSTM encoder-decoder."""

from ._core import (
    FormatError,
    IoError,
    Model,
    ModelConfig,
    NumericError,
    ParseError,
    Track,
    TrainConfig,
    ade,
    baseline_predict,
    benchmark,
    build_features,
    concat_trajectory,
    evaluate,
    evaluate_baseline,
    fde,
    fde_at,
    lr_schedule,
    parameter_count,
    read_tracks,
    reconstruction_target,
    subsample,
    synth_tracks,
    train,
    write_tracks,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
