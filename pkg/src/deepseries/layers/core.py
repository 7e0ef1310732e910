"""Convolution, pooling, dense, normalisation, dropout, and shape layers.

All feature-map layers exchange batched arrays shaped ``[batch, time,
channels]``; vector layers use ``[batch, features]``.  Shape inference in
``out_shape`` works on per-sample shapes (no batch axis).
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DegenerateBatchError, ParameterError, ShapeError
from .base import Layer, activation_backward, apply_activation, fan_uniform

PADDINGS = ("valid", "same", "full")


class Conv1D(Layer):
    """1-D convolution (cross-correlation, no kernel flip) over the time axis.

    Kernel shape is ``[kernel, in_channels, filters]``.  Output length:

    * ``valid``: ``floor((time - kernel) / stride) + 1``
    * ``same``:  ``ceil(time / stride)`` (zero padding split left/right,
      the extra unit on the right)
    * ``full``:  zero-pad ``kernel - 1`` on both sides, then valid.
    """

    kind = "conv1d"

    def __init__(self, filters: int, kernel: int, stride: int = 1,
                 padding: str = "valid", activation: str = "linear",
                 leaky_slope: float = 0.01):
        super().__init__()
        if filters < 1 or kernel < 1 or stride < 1:
            raise ParameterError("filters, kernel and stride must be >= 1")
        if padding not in PADDINGS:
            raise ParameterError(f"padding must be one of {PADDINGS}, got {padding!r}")
        self.filters = int(filters)
        self.kernel = int(kernel)
        self.stride = int(stride)
        self.padding = padding
        self.activation = activation
        self.leaky_slope = float(leaky_slope)

    def hyper(self):
        return {"filters": self.filters, "kernel": self.kernel,
                "stride": self.stride, "padding": self.padding,
                "activation": self.activation}

    def _pad_amounts(self, time: int) -> tuple[int, int, int]:
        k, s = self.kernel, self.stride
        if self.padding == "valid":
            if time < k:
                raise ShapeError(f"time {time} shorter than kernel {k}")
            return 0, 0, (time - k) // s + 1
        if self.padding == "full":
            return k - 1, k - 1, (time + k - 2) // s + 1
        t_out = -(-time // s)  # ceil
        total = max((t_out - 1) * s + k - time, 0)
        before = total // 2
        return before, total - before, t_out

    def out_shape(self, in_shapes):
        if len(in_shapes) != 1 or len(in_shapes[0]) != 2:
            raise ShapeError(f"conv1d expects one [time, channels] input, got {in_shapes}")
        time, _ch = in_shapes[0]
        _, _, t_out = self._pad_amounts(time)
        return (t_out, self.filters)

    def _build(self, in_shapes, rng):
        _, ch = in_shapes[0]
        k, f = self.kernel, self.filters
        self.params["w"] = fan_uniform(rng, (k, ch, f), fan_in=k * ch, fan_out=k * f)
        self.params["b"] = np.zeros(f)

    def forward(self, x, train=False, cache=None):
        k, s = self.kernel, self.stride
        before, after, t_out = self._pad_amounts(x.shape[1])
        xp = np.pad(x, ((0, 0), (before, after), (0, 0))) if before or after else x
        # windows: [batch, t_out, channels, kernel]
        win = sliding_window_view(xp, k, axis=1)[:, ::s][:, :t_out]
        z = np.tensordot(win, self.params["w"], axes=([3, 2], [0, 1])) + self.params["b"]
        a = apply_activation(self.activation, z, self.leaky_slope)
        if cache is not None:
            cache.update(win=win, z=z, a=a, pad=(before, after), in_time=x.shape[1])
        return a

    def backward(self, upstream, cache):
        k, s = self.kernel, self.stride
        win, z, a = cache["win"], cache["z"], cache["a"]
        before, _after = cache["pad"]
        dz = activation_backward(self.activation, upstream, z, a, self.leaky_slope)
        t_out = dz.shape[1]
        dw = np.tensordot(win, dz, axes=([0, 1], [0, 1]))  # [ch, k, f]
        dw = dw.transpose(1, 0, 2)
        db = dz.sum(axis=(0, 1))
        w = self.params["w"]
        padded_time = cache["in_time"] + sum(cache["pad"])
        dxp = np.zeros((dz.shape[0], padded_time, w.shape[1]))
        for j in range(k):
            dxp[:, j : j + s * t_out : s] += dz @ w[j].T
        dx = dxp[:, before : before + cache["in_time"]]
        return dx, {"w": dw, "b": db}


class Pool1D(Layer):
    """Max, average, or global-average pooling over the time axis.

    ``max`` backward routes each window's gradient to the first maximal
    position; overlapping windows accumulate.
    """

    kind = "pool1d"

    def __init__(self, window: int = 2, stride: Optional[int] = None, op: str = "max"):
        super().__init__()
        if op not in ("max", "avg", "global_avg"):
            raise ParameterError(f"pool op must be max|avg|global_avg, got {op!r}")
        if op != "global_avg" and window < 1:
            raise ParameterError("pool window must be >= 1")
        self.op = op
        self.window = int(window)
        self.stride = int(stride) if stride is not None else int(window)
        if self.stride < 1:
            raise ParameterError("pool stride must be >= 1")

    def hyper(self):
        return {"op": self.op, "window": self.window, "stride": self.stride}

    def out_shape(self, in_shapes):
        if len(in_shapes) != 1 or len(in_shapes[0]) != 2:
            raise ShapeError(f"pool1d expects one [time, channels] input, got {in_shapes}")
        time, ch = in_shapes[0]
        if self.op == "global_avg":
            return (ch,)
        if time < self.window:
            raise ShapeError(f"time {time} shorter than pool window {self.window}")
        return ((time - self.window) // self.stride + 1, ch)

    def forward(self, x, train=False, cache=None):
        if self.op == "global_avg":
            out = x.mean(axis=1)
            if cache is not None:
                cache.update(in_shape=x.shape)
            return out
        w, s = self.window, self.stride
        t_out = (x.shape[1] - w) // s + 1
        win = sliding_window_view(x, w, axis=1)[:, ::s][:, :t_out]  # [b,t',c,w]
        if self.op == "max":
            arg = win.argmax(axis=3)
            out = np.take_along_axis(win, arg[..., None], axis=3)[..., 0]
            if cache is not None:
                cache.update(arg=arg, in_shape=x.shape)
            return out
        out = win.mean(axis=3)
        if cache is not None:
            cache.update(in_shape=x.shape)
        return out

    def backward(self, upstream, cache):
        in_shape = cache["in_shape"]
        if self.op == "global_avg":
            dx = np.broadcast_to(upstream[:, None, :] / in_shape[1], in_shape).copy()
            return dx, {}
        w, s = self.window, self.stride
        b, t_out, c = upstream.shape
        dx = np.zeros(in_shape)
        if self.op == "max":
            arg = cache["arg"]
            bi, ti, ci = np.ogrid[:b, :t_out, :c]
            np.add.at(dx, (bi, ti * s + arg, ci), upstream)
        else:
            share = upstream / w
            for j in range(w):
                dx[:, j : j + s * t_out : s] += share
        return dx, {}


class Dense(Layer):
    """Affine map on feature vectors with an optional activation."""

    kind = "dense"

    def __init__(self, units: int, activation: str = "linear", leaky_slope: float = 0.01):
        super().__init__()
        if units < 1:
            raise ParameterError("units must be >= 1")
        self.units = int(units)
        self.activation = activation
        self.leaky_slope = float(leaky_slope)

    def hyper(self):
        return {"units": self.units, "activation": self.activation}

    def out_shape(self, in_shapes):
        if len(in_shapes) != 1 or len(in_shapes[0]) != 1:
            raise ShapeError(
                f"dense expects one flat [features] input, got {in_shapes}; flatten first"
            )
        return (self.units,)

    def _build(self, in_shapes, rng):
        n = in_shapes[0][0]
        self.params["w"] = fan_uniform(rng, (n, self.units), fan_in=n, fan_out=self.units)
        self.params["b"] = np.zeros(self.units)

    def forward(self, x, train=False, cache=None):
        z = x @ self.params["w"] + self.params["b"]
        a = apply_activation(self.activation, z, self.leaky_slope)
        if cache is not None:
            cache.update(x=x, z=z, a=a)
        return a

    def backward(self, upstream, cache):
        x, z, a = cache["x"], cache["z"], cache["a"]
        dz = activation_backward(self.activation, upstream, z, a, self.leaky_slope)
        return dz @ self.params["w"].T, {"w": x.T @ dz, "b": dz.sum(axis=0)}


class BatchNorm1D(Layer):
    """Per-channel batch normalisation for vectors or time series.

    Statistics are taken over the batch axis (and time axis for rank-3
    input).  Running buffers move as ``run <- (1 - momentum) * run +
    momentum * batch`` and are only touched in training mode.
    """

    kind = "batchnorm"

    def __init__(self, momentum: float = 0.01, epsilon: float = 1e-3):
        super().__init__()
        if not (0.0 < momentum < 1.0):
            raise ParameterError("momentum must lie in (0, 1)")
        if epsilon <= 0.0:
            raise ParameterError("epsilon must be > 0")
        self.momentum = float(momentum)
        self.epsilon = float(epsilon)

    def hyper(self):
        return {"momentum": self.momentum, "epsilon": self.epsilon}

    def out_shape(self, in_shapes):
        if len(in_shapes) != 1 or len(in_shapes[0]) not in (1, 2):
            raise ShapeError(f"batchnorm expects one rank-1/2 input, got {in_shapes}")
        return in_shapes[0]

    def _build(self, in_shapes, rng):
        ch = in_shapes[0][-1]
        self.params["gain"] = np.ones(ch)
        self.params["shift"] = np.zeros(ch)
        self.buffers["running_mean"] = np.zeros(ch)
        self.buffers["running_var"] = np.ones(ch)

    def forward(self, x, train=False, cache=None):
        axes = tuple(range(x.ndim - 1))
        if train:
            if x.shape[0] < 2:
                raise DegenerateBatchError(
                    f"batchnorm needs batch >= 2 in training mode, got {x.shape[0]}"
                )
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            self.buffers["running_mean"] *= 1.0 - self.momentum
            self.buffers["running_mean"] += self.momentum * mean
            self.buffers["running_var"] *= 1.0 - self.momentum
            self.buffers["running_var"] += self.momentum * var
        else:
            mean = self.buffers["running_mean"]
            var = self.buffers["running_var"]
        inv = 1.0 / np.sqrt(var + self.epsilon)
        xn = (x - mean) * inv
        out = self.params["gain"] * xn + self.params["shift"]
        if cache is not None:
            cache.update(xn=xn, inv=inv, train=train, axes=axes)
        return out

    def backward(self, upstream, cache):
        xn, inv, axes = cache["xn"], cache["inv"], cache["axes"]
        dgain = (upstream * xn).sum(axis=axes)
        dshift = upstream.sum(axis=axes)
        dxn = upstream * self.params["gain"]
        if not cache["train"]:
            return dxn * inv, {"gain": dgain, "shift": dshift}
        n = np.prod([xn.shape[a] for a in axes])
        dx = (inv / n) * (
            n * dxn
            - dxn.sum(axis=axes, keepdims=True)
            - xn * (dxn * xn).sum(axis=axes, keepdims=True)
        )
        return dx, {"gain": dgain, "shift": dshift}


class Dropout(Layer):
    """Inverted dropout: scales kept units by 1/(1-rate); identity in eval mode."""

    kind = "dropout"

    def __init__(self, rate: float, seed: Optional[int] = None):
        super().__init__()
        if not (0.0 <= rate < 1.0):
            raise ParameterError(f"dropout rate must lie in [0, 1), got {rate}")
        self.rate = float(rate)
        self.seed = seed
        self._rng = np.random.default_rng(0 if seed is None else int(seed))

    def hyper(self):
        return {"rate": self.rate}

    def _build(self, in_shapes, rng):
        # With no explicit seed the mask stream derives from the graph seed,
        # so whole-model training is reproducible from one number.
        if self.seed is None:
            self._rng = np.random.default_rng(int(rng.integers(2**63)))

    def reseed(self, seed: int):
        """Restart the mask stream; two identically reseeded layers draw identical masks."""
        self.seed = int(seed)
        self._rng = np.random.default_rng(self.seed)

    def out_shape(self, in_shapes):
        if len(in_shapes) != 1:
            raise ShapeError("dropout expects one input")
        return in_shapes[0]

    def forward(self, x, train=False, cache=None):
        if not train or self.rate == 0.0:
            if cache is not None:
                cache.update(mask=None)
            return x
        keep = 1.0 - self.rate
        mask = self._rng.random(x.shape) >= self.rate
        if cache is not None:
            cache.update(mask=mask)
        return x * mask / keep

    def backward(self, upstream, cache):
        mask = cache["mask"]
        if mask is None:
            return upstream, {}
        return upstream * mask / (1.0 - self.rate), {}


class ActivationLayer(Layer):
    """Standalone elementwise activation node."""

    kind = "activation"

    def __init__(self, activation: str, leaky_slope: float = 0.01):
        super().__init__()
        self.activation = activation
        self.leaky_slope = float(leaky_slope)

    def hyper(self):
        return {"activation": self.activation}

    def out_shape(self, in_shapes):
        if len(in_shapes) != 1:
            raise ShapeError("activation expects one input")
        return in_shapes[0]

    def forward(self, x, train=False, cache=None):
        a = apply_activation(self.activation, x, self.leaky_slope)
        if cache is not None:
            cache.update(z=x, a=a)
        return a

    def backward(self, upstream, cache):
        return (
            activation_backward(self.activation, upstream, cache["z"], cache["a"],
                                self.leaky_slope),
            {},
        )


class Flatten(Layer):
    """Collapse all per-sample axes to one feature axis."""

    kind = "flatten"

    def out_shape(self, in_shapes):
        if len(in_shapes) != 1:
            raise ShapeError("flatten expects one input")
        return (int(np.prod(in_shapes[0], dtype=np.int64)),)

    def forward(self, x, train=False, cache=None):
        if cache is not None:
            cache.update(in_shape=x.shape)
        return x.reshape(x.shape[0], -1)

    def backward(self, upstream, cache):
        return upstream.reshape(cache["in_shape"]), {}


class Reshape(Layer):
    """Reinterpret each sample with a new shape of equal element count."""

    kind = "reshape"

    def __init__(self, target: tuple[int, ...]):
        super().__init__()
        self.target = tuple(int(t) for t in target)
        if any(t < 1 for t in self.target):
            raise ParameterError(f"reshape target must be positive, got {self.target}")

    def hyper(self):
        return {"target": self.target}

    def out_shape(self, in_shapes):
        if len(in_shapes) != 1:
            raise ShapeError("reshape expects one input")
        have = int(np.prod(in_shapes[0], dtype=np.int64))
        want = int(np.prod(self.target, dtype=np.int64))
        if have != want:
            raise ShapeError(f"cannot reshape {in_shapes[0]} ({have}) to {self.target} ({want})")
        return self.target

    def forward(self, x, train=False, cache=None):
        if cache is not None:
            cache.update(in_shape=x.shape)
        return x.reshape((x.shape[0],) + self.target)

    def backward(self, upstream, cache):
        return upstream.reshape(cache["in_shape"]), {}


class Add(Layer):
    """Elementwise sum of same-shaped inputs (skip connections)."""

    kind = "add"

    def __init__(self, n_inputs: int = 2):
        super().__init__()
        if n_inputs < 2:
            raise ParameterError("add needs at least two inputs")
        self.n_inputs = int(n_inputs)

    def out_shape(self, in_shapes):
        if len(in_shapes) != self.n_inputs:
            raise ShapeError(f"add expects {self.n_inputs} inputs, got {len(in_shapes)}")
        if any(s != in_shapes[0] for s in in_shapes[1:]):
            raise ShapeError(f"add inputs must share a shape, got {in_shapes}")
        return in_shapes[0]

    def forward(self, xs, train=False, cache=None):
        out = xs[0].copy()
        for x in xs[1:]:
            out += x
        return out

    def backward(self, upstream, cache):
        return [upstream] * self.n_inputs, {}


class Concat(Layer):
    """Join inputs along one per-sample axis (default: the channel axis)."""

    kind = "concat"

    def __init__(self, n_inputs: int, axis: int = -1):
        super().__init__()
        if n_inputs < 1:
            raise ParameterError("concat needs at least one input")
        self.n_inputs = int(n_inputs)
        self.axis = int(axis)

    def _axis(self, rank: int) -> int:
        ax = self.axis if self.axis >= 0 else rank + self.axis
        if not (0 <= ax < rank):
            raise ShapeError(f"concat axis {self.axis} out of range for rank {rank}")
        return ax

    def out_shape(self, in_shapes):
        if len(in_shapes) != self.n_inputs:
            raise ShapeError(f"concat expects {self.n_inputs} inputs, got {len(in_shapes)}")
        rank = len(in_shapes[0])
        ax = self._axis(rank)
        for s in in_shapes[1:]:
            if len(s) != rank or any(s[i] != in_shapes[0][i] for i in range(rank) if i != ax):
                raise ShapeError(f"concat extents differ off axis {ax}: {in_shapes}")
        out = list(in_shapes[0])
        out[ax] = sum(s[ax] for s in in_shapes)
        return tuple(out)

    def forward(self, xs, train=False, cache=None):
        ax = self._axis(xs[0].ndim - 1) + 1
        if cache is not None:
            cache.update(splits=[x.shape[ax] for x in xs], ax=ax)
        return np.concatenate(xs, axis=ax)

    def backward(self, upstream, cache):
        ax, splits = cache["ax"], cache["splits"]
        cuts = np.cumsum(splits)[:-1]
        return list(np.split(upstream, cuts, axis=ax)), {}


class Upsample1D(Layer):
    """Nearest-neighbour repeat along the time axis by an integer factor."""

    kind = "upsample"

    def __init__(self, factor: int):
        super().__init__()
        if factor < 1:
            raise ParameterError("upsample factor must be >= 1")
        self.factor = int(factor)

    def hyper(self):
        return {"factor": self.factor}

    def out_shape(self, in_shapes):
        if len(in_shapes) != 1 or len(in_shapes[0]) != 2:
            raise ShapeError(f"upsample expects one [time, channels] input, got {in_shapes}")
        t, c = in_shapes[0]
        return (t * self.factor, c)

    def forward(self, x, train=False, cache=None):
        return np.repeat(x, self.factor, axis=1)

    def backward(self, upstream, cache):
        b, tf, c = upstream.shape
        t = tf // self.factor
        return upstream.reshape(b, t, self.factor, c).sum(axis=2), {}
