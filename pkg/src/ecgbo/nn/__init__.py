"""Minimal numpy neural-network engine for 1-D residual CNNs."""

from ecgbo.nn.adam import Adam
from ecgbo.nn.layers import (
    Conv1D,
    Dense,
    Dropout,
    Flatten,
    MaxPool1D,
    ReLU,
    ResidualAdd,
    Softmax,
    relu,
    softmax,
)
from ecgbo.nn.loss import softmax_crossentropy
from ecgbo.nn.network import Network
from ecgbo.nn.train import EpochStats, TrainConfig, TrainHistory, evaluate, train

__all__ = [
    "Adam", "Conv1D", "Dense", "Dropout", "Flatten", "MaxPool1D", "ReLU", "ResidualAdd",
    "Softmax", "relu", "softmax", "softmax_crossentropy", "Network", "EpochStats",
    "TrainConfig", "TrainHistory", "evaluate", "train",
]
