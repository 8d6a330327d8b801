"""Graph neural network engine: autodiff tape, layers, training recipe."""
from .autograd import Tape, Tensor
from .layers import VARIANTS, GraphOperators
from .model import (GNNClassifier, GnnModel, TrainConfig, adam_step, forward, init_params,
                    nll_loss, predict, train)

__all__ = [
    "GNNClassifier",
    "GnnModel",
    "GraphOperators",
    "Tape",
    "Tensor",
    "TrainConfig",
    "VARIANTS",
    "adam_step",
    "forward",
    "init_params",
    "nll_loss",
    "predict",
    "train",
]
