"""Differentiable layer set for 1-D time-series models."""

from .base import (
    ACTIVATIONS,
    Layer,
    apply_activation,
    activation_backward,
    fan_uniform,
    recurrent_uniform,
    sigmoid,
    softmax,
)
from .core import (
    ActivationLayer,
    Add,
    BatchNorm1D,
    Concat,
    Conv1D,
    Dense,
    Dropout,
    Flatten,
    Pool1D,
    Reshape,
    Upsample1D,
)
from .recurrent import GRU, LSTM, Bidirectional
from .attention import RTABlock, SEBlock, SpatialTemporalAttention, TanhAttention

__all__ = [
    "ACTIVATIONS",
    "Layer",
    "apply_activation",
    "activation_backward",
    "fan_uniform",
    "recurrent_uniform",
    "sigmoid",
    "softmax",
    "ActivationLayer",
    "Add",
    "BatchNorm1D",
    "Concat",
    "Conv1D",
    "Dense",
    "Dropout",
    "Flatten",
    "Pool1D",
    "Reshape",
    "Upsample1D",
    "GRU",
    "LSTM",
    "Bidirectional",
    "RTABlock",
    "SEBlock",
    "SpatialTemporalAttention",
    "TanhAttention",
]
