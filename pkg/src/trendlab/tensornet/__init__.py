"""From-scratch stacked recurrent trend classifiers (vanilla, GRU, LSTM)."""

from .model import (
    CLASS_LABELS,
    InputError,
    RnnSpec,
    backward,
    classify_series,
    forward,
    init_params,
    load_model,
    param_shapes,
    save_model,
    sequence_loss,
    series_to_inputs,
)
from .optim import Adam, Rmsprop, adam_step, make_optimizer, rmsprop_step
from .train import TrainingFailure, TrainOpts, train, training_scale

__all__ = [
    "Adam",
    "CLASS_LABELS",
    "InputError",
    "Rmsprop",
    "RnnSpec",
    "TrainOpts",
    "TrainingFailure",
    "adam_step",
    "backward",
    "classify_series",
    "forward",
    "init_params",
    "load_model",
    "make_optimizer",
    "param_shapes",
    "rmsprop_step",
    "save_model",
    "sequence_loss",
    "series_to_inputs",
    "train",
    "training_scale",
]
