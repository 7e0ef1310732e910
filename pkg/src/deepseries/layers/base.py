"""Layer protocol, weight initialisation, and activation functions.

Layers are stateful in their parameters only.  ``forward`` writes whatever the
matching ``backward`` needs into a caller-supplied cache dict, so one layer
instance can safely appear in more than one model graph.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..errors import ParameterError, ShapeError

# -- activations -------------------------------------------------------------


def sigmoid(x: np.ndarray) -> np.ndarray:
    # Two-branch form stays finite for large |x|.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x: np.ndarray) -> np.ndarray:
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


ACTIVATIONS = ("linear", "relu", "leaky_relu", "sigmoid", "tanh", "softmax")


def apply_activation(name: str, z: np.ndarray, slope: float = 0.01) -> np.ndarray:
    if name == "linear":
        return z
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "leaky_relu":
        return np.where(z > 0.0, z, slope * z)
    if name == "sigmoid":
        return sigmoid(z)
    if name == "tanh":
        return np.tanh(z)
    if name == "softmax":
        return softmax(z)
    raise ParameterError(f"unknown activation {name!r}")


def activation_backward(
    name: str, da: np.ndarray, z: np.ndarray, a: np.ndarray, slope: float = 0.01
) -> np.ndarray:
    """Gradient through an activation given upstream ``da`` and cached ``z``/``a``."""
    if name == "linear":
        return da
    if name == "relu":
        return da * (z > 0.0)
    if name == "leaky_relu":
        return da * np.where(z > 0.0, 1.0, slope)
    if name == "sigmoid":
        return da * a * (1.0 - a)
    if name == "tanh":
        return da * (1.0 - a * a)
    if name == "softmax":
        # Row Jacobian: dz_i = a_i * (da_i - sum_j da_j a_j)
        return a * (da - (da * a).sum(axis=-1, keepdims=True))
    raise ParameterError(f"unknown activation {name!r}")


# -- initialisers ------------------------------------------------------------


def _snap(a: np.ndarray) -> np.ndarray:
    # Initial weights are snapped to float32-representable values so the
    # float32 weights file round-trips bit-exactly.
    return a.astype(np.float32).astype(np.float64)


def fan_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return _snap(rng.uniform(-limit, limit, size=shape))


def recurrent_uniform(rng: np.random.Generator, shape, units: int) -> np.ndarray:
    limit = 1.0 / np.sqrt(units)
    return _snap(rng.uniform(-limit, limit, size=shape))


# -- layer protocol ----------------------------------------------------------


class Layer:
    """Base class for all layers.

    Subclasses implement ``out_shape`` (static inference on per-sample shapes,
    batch axis excluded), ``_build`` (materialise parameters once input shapes
    are known), ``forward`` and ``backward``.  ``backward`` returns
    ``(input_gradients, parameter_gradients)`` where the first entry matches
    the structure of the forward inputs.
    """

    kind = "layer"
    n_inputs = 1

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self._in_shapes: Optional[list[tuple[int, ...]]] = None

    # static per-sample shape inference; raises ShapeError on bad input
    def out_shape(self, in_shapes: list[tuple[int, ...]]) -> tuple[int, ...]:
        raise NotImplementedError

    def _build(self, in_shapes: list[tuple[int, ...]], rng: np.random.Generator):
        pass

    def bind(self, in_shapes, rng: Optional[np.random.Generator] = None):
        """Materialise parameters for the given per-sample input shapes.

        Binding twice with the same shapes is a no-op, so layer instances can
        be shared between graphs without re-initialising their weights.
        """
        shapes = [tuple(s) for s in (in_shapes if isinstance(in_shapes, list) else [in_shapes])]
        self.out_shape(shapes)  # validate before touching state
        if self._in_shapes is not None:
            if shapes != self._in_shapes:
                raise ShapeError(
                    f"{self.kind} already bound to {self._in_shapes}, got {shapes}"
                )
            return self
        self._build(shapes, rng if rng is not None else np.random.default_rng(0))
        self._in_shapes = shapes
        return self

    @property
    def bound(self) -> bool:
        return self._in_shapes is not None

    def forward(self, x, train: bool = False, cache: Optional[dict] = None):
        raise NotImplementedError

    def backward(self, upstream, cache: dict):
        raise NotImplementedError

    def param_count(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def hyper(self) -> dict:
        """Constructor-level settings, reported by descriptors and ``describe``."""
        return {}

    def __repr__(self):
        return f"{type(self).__name__}()"
