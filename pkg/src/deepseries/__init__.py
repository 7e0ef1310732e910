"""deepseries: a self-contained deep-learning engine for 1-D time series.

The package provides a dense tensor core, differentiable CNN/RNN layers, a
graph container with save/load, a registry of ready-made architectures, and
training plus data pipelines for forecasting, classification, and anomaly
detection — all on plain numpy, small enough to audit end to end.
"""

from . import data, graph, layers, tensor, train, zoo
from .errors import (
    ContractError,
    DataError,
    DegenerateBatchError,
    DegenerateSegmentError,
    FormatError,
    GraphError,
    MetricUndefinedError,
    ParameterError,
    RegistryError,
    ShapeError,
    StateError,
    TrainingDivergedError,
)
from .graph import GraphBuilder, Model, NodeSpec, build
from .tensor import Tensor, concat, crop, ewise, gaussian, make, matmul, pad, reduce

__version__ = "0.1.0"
