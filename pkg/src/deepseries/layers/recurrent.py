"""Recurrent layers: LSTM, GRU, and a bidirectional wrapper.

Input is ``[batch, time, channels]``.  With ``return_sequences`` the output is
``[batch, time, units]``, otherwise the final hidden state ``[batch, units]``.
Initial states are zero.  Kernels use the uniform(+-1/sqrt(units)) draw; the
LSTM forget-gate bias starts at one.
"""

from __future__ import annotations

import numpy as np

from ..errors import ParameterError, ShapeError
from .base import Layer, recurrent_uniform, sigmoid


class _Recurrent(Layer):
    def __init__(self, units: int, return_sequences: bool = False):
        super().__init__()
        if units < 1:
            raise ParameterError("units must be >= 1")
        self.units = int(units)
        self.return_sequences = bool(return_sequences)

    def hyper(self):
        return {"units": self.units, "return_sequences": self.return_sequences}

    def out_shape(self, in_shapes):
        if len(in_shapes) != 1 or len(in_shapes[0]) != 2:
            raise ShapeError(f"{self.kind} expects one [time, channels] input, got {in_shapes}")
        t, _ = in_shapes[0]
        return (t, self.units) if self.return_sequences else (self.units,)

    def _spread(self, upstream, batch, time):
        """Upstream laid out per step; non-sequence output touches only the last step."""
        if self.return_sequences:
            return upstream
        per_step = np.zeros((batch, time, self.units))
        per_step[:, -1] = upstream
        return per_step


class LSTM(_Recurrent):
    """Long short-term memory.

    Per step, with gate blocks ``i/f/g/o`` packed in that order:

        z   = x_t @ wx + h_{t-1} @ wh + b
        i,f,o = sigmoid(z_i), sigmoid(z_f), sigmoid(z_o);  g = tanh(z_g)
        c_t = f * c_{t-1} + i * g
        h_t = o * tanh(c_t)
    """

    kind = "lstm"

    def _build(self, in_shapes, rng):
        ch, u = in_shapes[0][1], self.units
        self.params["wx"] = recurrent_uniform(rng, (ch, 4 * u), u)
        self.params["wh"] = recurrent_uniform(rng, (u, 4 * u), u)
        b = np.zeros(4 * u)
        b[u : 2 * u] = 1.0  # forget-gate bias
        self.params["b"] = b

    def forward(self, x, train=False, cache=None):
        b, t, _ = x.shape
        u = self.units
        wx, wh, bias = self.params["wx"], self.params["wh"], self.params["b"]
        h = np.zeros((b, u))
        c = np.zeros((b, u))
        hs = np.empty((b, t, u))
        steps = [] if cache is not None else None
        xw = x @ wx + bias  # input contribution for every step at once
        for ti in range(t):
            z = xw[:, ti] + h @ wh
            i = sigmoid(z[:, :u])
            f = sigmoid(z[:, u : 2 * u])
            g = np.tanh(z[:, 2 * u : 3 * u])
            o = sigmoid(z[:, 3 * u :])
            c_prev = c
            c = f * c_prev + i * g
            tc = np.tanh(c)
            h_prev = h
            h = o * tc
            hs[:, ti] = h
            if steps is not None:
                steps.append((h_prev, c_prev, i, f, g, o, tc))
        if cache is not None:
            cache.update(x=x, steps=steps)
        return hs if self.return_sequences else h

    def backward(self, upstream, cache):
        x, steps = cache["x"], cache["steps"]
        b, t, ch = x.shape
        u = self.units
        wx, wh = self.params["wx"], self.params["wh"]
        up = self._spread(upstream, b, t)
        dwx = np.zeros_like(wx)
        dwh = np.zeros_like(wh)
        db = np.zeros(4 * u)
        dx = np.empty_like(x)
        dh_next = np.zeros((b, u))
        dc_next = np.zeros((b, u))
        for ti in range(t - 1, -1, -1):
            h_prev, c_prev, i, f, g, o, tc = steps[ti]
            dh = dh_next + up[:, ti]
            do = dh * tc
            dc = dc_next + dh * o * (1.0 - tc * tc)
            di = dc * g
            df = dc * c_prev
            dg = dc * i
            dc_next = dc * f
            dz = np.concatenate(
                [
                    di * i * (1.0 - i),
                    df * f * (1.0 - f),
                    dg * (1.0 - g * g),
                    do * o * (1.0 - o),
                ],
                axis=1,
            )
            dwx += x[:, ti].T @ dz
            dwh += h_prev.T @ dz
            db += dz.sum(axis=0)
            dx[:, ti] = dz @ wx.T
            dh_next = dz @ wh.T
        return dx, {"wx": dwx, "wh": dwh, "b": db}


class GRU(_Recurrent):
    """Gated recurrent unit.

    Gate blocks ``z/r/n`` packed in that order; the reset gate scales the
    previous state before the candidate's recurrent product:

        z_t = sigmoid(x_t @ wx_z + h_{t-1} @ wh_z + b_z)
        r_t = sigmoid(x_t @ wx_r + h_{t-1} @ wh_r + b_r)
        n_t = tanh(x_t @ wx_n + (r_t * h_{t-1}) @ wh_n + b_n)
        h_t = (1 - z_t) * h_{t-1} + z_t * n_t
    """

    kind = "gru"

    def _build(self, in_shapes, rng):
        ch, u = in_shapes[0][1], self.units
        self.params["wx"] = recurrent_uniform(rng, (ch, 3 * u), u)
        self.params["wh"] = recurrent_uniform(rng, (u, 3 * u), u)
        self.params["b"] = np.zeros(3 * u)

    def forward(self, x, train=False, cache=None):
        b, t, _ = x.shape
        u = self.units
        wx, wh, bias = self.params["wx"], self.params["wh"], self.params["b"]
        h = np.zeros((b, u))
        hs = np.empty((b, t, u))
        steps = [] if cache is not None else None
        xw = x @ wx + bias
        for ti in range(t):
            zr = xw[:, ti, : 2 * u] + h @ wh[:, : 2 * u]
            z = sigmoid(zr[:, :u])
            r = sigmoid(zr[:, u:])
            rh = r * h
            n = np.tanh(xw[:, ti, 2 * u :] + rh @ wh[:, 2 * u :])
            h_prev = h
            h = (1.0 - z) * h_prev + z * n
            hs[:, ti] = h
            if steps is not None:
                steps.append((h_prev, z, r, n, rh))
        if cache is not None:
            cache.update(x=x, steps=steps)
        return hs if self.return_sequences else h

    def backward(self, upstream, cache):
        x, steps = cache["x"], cache["steps"]
        b, t, ch = x.shape
        u = self.units
        wx, wh = self.params["wx"], self.params["wh"]
        up = self._spread(upstream, b, t)
        dwx = np.zeros_like(wx)
        dwh = np.zeros_like(wh)
        db = np.zeros(3 * u)
        dx = np.empty_like(x)
        dh_next = np.zeros((b, u))
        for ti in range(t - 1, -1, -1):
            h_prev, z, r, n, rh = steps[ti]
            dh = dh_next + up[:, ti]
            dz_gate = dh * (n - h_prev)
            dn = dh * z
            dh_prev = dh * (1.0 - z)
            dn_pre = dn * (1.0 - n * n)
            drh = dn_pre @ wh[:, 2 * u :].T
            dr = drh * h_prev
            dh_prev += drh * r
            dzr = np.concatenate(
                [dz_gate * z * (1.0 - z), dr * r * (1.0 - r)], axis=1
            )
            dgates = np.concatenate([dzr, dn_pre], axis=1)
            dwx += x[:, ti].T @ dgates
            dwh[:, : 2 * u] += h_prev.T @ dzr
            dwh[:, 2 * u :] += rh.T @ dn_pre
            db += dgates.sum(axis=0)
            dx[:, ti] = dgates @ wx.T
            dh_next = dh_prev + dzr @ wh[:, : 2 * u].T
        return dx, {"wx": dwx, "wh": dwh, "b": db}


class Bidirectional(Layer):
    """Run a recurrent layer over both time directions and concatenate channels.

    The two directions hold independent parameters (``fwd_``/``bwd_``
    prefixes).  The backward direction consumes the reversed sequence; its
    per-step outputs are re-reversed before concatenation.
    """

    def __init__(self, inner: _Recurrent):
        super().__init__()
        if not isinstance(inner, _Recurrent):
            raise ParameterError("bidirectional wraps an LSTM or GRU layer")
        cls = type(inner)
        self.fwd = inner
        self.bwd = cls(inner.units, inner.return_sequences)
        self.kind = "bilstm" if isinstance(inner, LSTM) else "bigru"
        self.units = inner.units
        self.return_sequences = inner.return_sequences

    def hyper(self):
        return {"units": self.units, "return_sequences": self.return_sequences}

    def out_shape(self, in_shapes):
        inner = self.fwd.out_shape(in_shapes)
        return inner[:-1] + (2 * inner[-1],)

    def _build(self, in_shapes, rng):
        self.fwd.bind(in_shapes, rng)
        self.bwd.bind(in_shapes, rng)
        for name, p in self.fwd.params.items():
            self.params[f"fwd_{name}"] = p
        for name, p in self.bwd.params.items():
            self.params[f"bwd_{name}"] = p

    def forward(self, x, train=False, cache=None):
        fc = {} if cache is not None else None
        bc = {} if cache is not None else None
        yf = self.fwd.forward(x, train, fc)
        yb = self.bwd.forward(np.ascontiguousarray(x[:, ::-1]), train, bc)
        if self.return_sequences:
            yb = yb[:, ::-1]
        if cache is not None:
            cache.update(fc=fc, bc=bc)
        return np.concatenate([yf, yb], axis=-1)

    def backward(self, upstream, cache):
        u = self.units
        uf = upstream[..., :u]
        ub = upstream[..., u:]
        if self.return_sequences:
            ub = np.ascontiguousarray(ub[:, ::-1])
        dxf, gf = self.fwd.backward(np.ascontiguousarray(uf), cache["fc"])
        dxb, gb = self.bwd.backward(ub, cache["bc"])
        dx = dxf + dxb[:, ::-1]
        grads = {f"fwd_{k}": v for k, v in gf.items()}
        grads.update({f"bwd_{k}": v for k, v in gb.items()})
        return dx, grads
