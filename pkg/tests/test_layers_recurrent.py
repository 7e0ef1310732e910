"""LSTM / GRU / bidirectional forward passes against an independent
re-implementation of the recurrences written inline with plain numpy."""

import numpy as np
import pytest

from deepseries.errors import ParameterError
from deepseries.layers import GRU, LSTM, Bidirectional
from conftest import single_node_model


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _lstm_reference(x, wx, wh, b, return_sequences):
    """Gates packed [input, forget, candidate, output]; zero initial state."""
    t_steps, _ = x.shape
    u = wh.shape[0]
    h = np.zeros(u)
    c = np.zeros(u)
    seq = []
    for t in range(t_steps):
        z = x[t] @ wx + h @ wh + b
        i = _sigmoid(z[0:u])
        f = _sigmoid(z[u:2 * u])
        g = np.tanh(z[2 * u:3 * u])
        o = _sigmoid(z[3 * u:4 * u])
        c = f * c + i * g
        h = o * np.tanh(c)
        seq.append(h.copy())
    return np.stack(seq) if return_sequences else h


def _gru_reference(x, wx, wh, b, return_sequences):
    """Gates packed [update, reset, candidate]; reset scales the hidden state
    before the candidate's recurrent product."""
    t_steps, _ = x.shape
    u = wh.shape[0]
    h = np.zeros(u)
    seq = []
    for t in range(t_steps):
        zx = x[t] @ wx + b
        zz = zx[0:u] + h @ wh[:, 0:u]
        zr = zx[u:2 * u] + h @ wh[:, u:2 * u]
        z = _sigmoid(zz)
        r = _sigmoid(zr)
        n = np.tanh(zx[2 * u:3 * u] + (r * h) @ wh[:, 2 * u:3 * u])
        h = (1.0 - z) * h + z * n
        seq.append(h.copy())
    return np.stack(seq) if return_sequences else h


@pytest.mark.parametrize("return_sequences", [False, True])
def test_lstm_matches_reference_recurrence(return_sequences):
    m = single_node_model(LSTM(3, return_sequences=return_sequences), (4, 2), seed=5)
    L = m.nodes["L"].layer
    rng = np.random.default_rng(42)
    x = rng.normal(size=(2, 4, 2))
    out = np.asarray(m.forward(x).array)
    for s in range(2):
        ref = _lstm_reference(x[s], L.params["wx"], L.params["wh"], L.params["b"],
                              return_sequences)
        np.testing.assert_allclose(out[s], ref, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("return_sequences", [False, True])
def test_gru_matches_reference_recurrence(return_sequences):
    m = single_node_model(GRU(3, return_sequences=return_sequences), (4, 2), seed=6)
    L = m.nodes["L"].layer
    rng = np.random.default_rng(43)
    x = rng.normal(size=(2, 4, 2))
    out = np.asarray(m.forward(x).array)
    for s in range(2):
        ref = _gru_reference(x[s], L.params["wx"], L.params["wh"], L.params["b"],
                             return_sequences)
        np.testing.assert_allclose(out[s], ref, rtol=1e-12, atol=1e-12)


def test_lstm_forget_gate_bias_starts_at_one():
    m = single_node_model(LSTM(4), (3, 2))
    b = m.nodes["L"].layer.params["b"]
    np.testing.assert_array_equal(b[4:8], np.ones(4))
    np.testing.assert_array_equal(b[:4], np.zeros(4))
    np.testing.assert_array_equal(b[8:], np.zeros(8))


def test_recurrent_output_shapes():
    assert single_node_model(LSTM(6), (5, 3)).output_shape == (6,)
    assert single_node_model(LSTM(6, return_sequences=True), (5, 3)).output_shape == (5, 6)
    assert single_node_model(GRU(2), (5, 3)).output_shape == (2,)


def test_bidirectional_concat_of_two_passes():
    m = single_node_model(Bidirectional(LSTM(3)), (4, 2), seed=8)
    L = m.nodes["L"].layer
    rng = np.random.default_rng(44)
    x = rng.normal(size=(1, 4, 2))
    out = np.asarray(m.forward(x).array)
    assert out.shape == (1, 6)
    fwd = _lstm_reference(x[0], L.params["fwd_wx"], L.params["fwd_wh"],
                          L.params["fwd_b"], False)
    bwd = _lstm_reference(x[0, ::-1], L.params["bwd_wx"], L.params["bwd_wh"],
                          L.params["bwd_b"], False)
    np.testing.assert_allclose(out[0], np.concatenate([fwd, bwd]), rtol=1e-12)


def test_bidirectional_sequences_rereversed():
    m = single_node_model(Bidirectional(GRU(2, return_sequences=True)), (5, 1), seed=9)
    L = m.nodes["L"].layer
    rng = np.random.default_rng(45)
    x = rng.normal(size=(1, 5, 1))
    out = np.asarray(m.forward(x).array)
    assert out.shape == (1, 5, 4)
    fwd = _gru_reference(x[0], L.params["fwd_wx"], L.params["fwd_wh"],
                         L.params["fwd_b"], True)
    bwd = _gru_reference(x[0, ::-1], L.params["bwd_wx"], L.params["bwd_wh"],
                         L.params["bwd_b"], True)[::-1]
    np.testing.assert_allclose(out[0], np.concatenate([fwd, bwd], axis=1), rtol=1e-12)


def test_bidirectional_kind_tracks_inner_cell():
    assert Bidirectional(LSTM(2)).kind == "bilstm"
    assert Bidirectional(GRU(2)).kind == "bigru"


def test_bidirectional_halves_are_independent_params():
    m = single_node_model(Bidirectional(LSTM(2)), (3, 1), seed=1)
    L = m.nodes["L"].layer
    assert not np.array_equal(L.params["fwd_wx"], L.params["bwd_wx"])


def test_recurrent_rejects_bad_units():
    with pytest.raises(ParameterError):
        LSTM(0)
    with pytest.raises(ParameterError):
        GRU(-3)
