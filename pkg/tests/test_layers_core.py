"""Convolution, pooling, dense, batchnorm, dropout, and shape ops against
hand-worked examples.  Weights are overwritten in place after binding so every
expected value below was computed by hand from the printed formulas."""

import numpy as np
import pytest

from deepseries.errors import DegenerateBatchError, ParameterError, ShapeError
from deepseries.layers import (
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
from conftest import single_node_model


def _conv(in_shape, **kw):
    m = single_node_model(Conv1D(**kw), in_shape)
    return m, m.nodes["L"].layer


X5 = np.array([1.0, 2.0, 3.0, 4.0, 5.0]).reshape(1, 5, 1)


def _edge_kernel(layer):
    # one filter [1, 0, -1] with bias 0.5: out[t] = x[t] - x[t+2] + 0.5
    layer.params["w"][...] = np.array([1.0, 0.0, -1.0]).reshape(3, 1, 1)
    layer.params["b"][...] = 0.5


def test_conv_valid_hand_example():
    m, L = _conv((5, 1), filters=1, kernel=3)
    _edge_kernel(L)
    out = m.forward(X5).array
    assert out.shape == (1, 3, 1)
    np.testing.assert_allclose(out.ravel(), [-1.5, -1.5, -1.5])


def test_conv_valid_stride_two():
    m, L = _conv((5, 1), filters=1, kernel=3, stride=2)
    _edge_kernel(L)
    x = np.array([1.0, 2.0, 4.0, 8.0, 16.0]).reshape(1, 5, 1)
    out = m.forward(x).array
    # windows start at t = 0 and t = 2: (1-4+0.5), (4-16+0.5)
    np.testing.assert_allclose(out.ravel(), [-2.5, -11.5])


def test_conv_same_padding_splits_left_short():
    m, L = _conv((5, 1), filters=1, kernel=3, padding="same")
    _edge_kernel(L)
    out = m.forward(X5).array
    assert out.shape == (1, 5, 1)
    # padded series [0,1,2,3,4,5,0]
    np.testing.assert_allclose(out.ravel(), [-1.5, -1.5, -1.5, -1.5, 4.5])


def test_conv_full_padding_lengthens_output():
    m, L = _conv((5, 1), filters=1, kernel=3, padding="full")
    _edge_kernel(L)
    out = m.forward(X5).array
    assert out.shape == (1, 7, 1)
    # padded series [0,0,1,2,3,4,5,0,0]
    np.testing.assert_allclose(out.ravel(), [-0.5, -1.5, -1.5, -1.5, -1.5, 4.5, 5.5])


def test_conv_same_output_length_ceil_t_over_s():
    m, _ = _conv((7, 1), filters=2, kernel=3, stride=2, padding="same")
    assert m.output_shape == (4, 2)  # ceil(7/2)


def test_conv_multichannel_contraction():
    m, L = _conv((3, 2), filters=1, kernel=2)
    L.params["w"][...] = np.array([[[1.0], [10.0]], [[100.0], [1000.0]]])
    L.params["b"][...] = 0.0
    x = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).reshape(1, 3, 2)
    out = m.forward(x).array
    # out[t] = x[t,0]*1 + x[t,1]*10 + x[t+1,0]*100 + x[t+1,1]*1000
    np.testing.assert_allclose(out.ravel(), [1 + 20 + 300 + 4000, 3 + 40 + 500 + 6000])


def test_conv_relu_activation_applied():
    m, L = _conv((5, 1), filters=1, kernel=3, activation="relu")
    _edge_kernel(L)
    np.testing.assert_allclose(m.forward(X5).array.ravel(), [0.0, 0.0, 0.0])


def test_conv_rejects_short_input():
    with pytest.raises(ShapeError):
        single_node_model(Conv1D(1, 8), (5, 1))


def test_conv_rejects_bad_hyper():
    with pytest.raises(ParameterError):
        Conv1D(0, 3)
    with pytest.raises(ParameterError):
        Conv1D(1, 3, stride=0)
    with pytest.raises(ParameterError):
        Conv1D(1, 3, padding="reflect")


POOL_X = np.array([3.0, 1.0, 4.0, 1.0, 5.0, 9.0]).reshape(1, 6, 1)


def test_pool_max_and_avg():
    m = single_node_model(Pool1D(2), (6, 1))
    np.testing.assert_allclose(m.forward(POOL_X).array.ravel(), [3, 4, 9])
    m = single_node_model(Pool1D(2, op="avg"), (6, 1))
    np.testing.assert_allclose(m.forward(POOL_X).array.ravel(), [2, 2.5, 7])


def test_pool_window_stride_mix():
    m = single_node_model(Pool1D(3, 2), (6, 1))
    x = np.arange(1.0, 7.0).reshape(1, 6, 1)
    np.testing.assert_allclose(m.forward(x).array.ravel(), [3, 5])


def test_pool_global_avg_drops_time():
    m = single_node_model(Pool1D(op="global_avg"), (4, 2))
    x = np.arange(8.0).reshape(1, 4, 2)
    out = m.forward(x).array
    assert out.shape == (1, 2)
    np.testing.assert_allclose(out.ravel(), [3.0, 4.0])  # column means


def test_pool_max_backward_routes_to_first_tie():
    m = single_node_model(Pool1D(2), (2, 1))
    x = np.array([[2.0], [2.0]]).reshape(1, 2, 1)
    m.forward(x, train=True)
    m.backward(np.ones((1, 1, 1)))
    np.testing.assert_allclose(m.last_input_grads["x0"].ravel(), [1.0, 0.0])


def test_pool_rejects_short_input():
    with pytest.raises(ShapeError):
        single_node_model(Pool1D(4), (3, 1))


def test_dense_hand_example():
    m = single_node_model(Dense(2), (3,))
    L = m.nodes["L"].layer
    L.params["w"][...] = np.array([[1.0, 4.0], [2.0, 5.0], [3.0, 6.0]])
    L.params["b"][...] = np.array([0.5, -0.5])
    out = m.forward(np.array([[1.0, 10.0, 100.0]])).array
    np.testing.assert_allclose(out, [[1 + 20 + 300 + 0.5, 4 + 50 + 600 - 0.5]])


def test_dense_softmax_rows_sum_to_one():
    m = single_node_model(Dense(4, activation="softmax"), (6,), seed=3)
    out = m.forward(np.random.default_rng(0).normal(size=(5, 6))).array
    np.testing.assert_allclose(np.asarray(out).sum(axis=1), np.ones(5), atol=1e-12)


def test_batchnorm_train_matches_hand_stats():
    m = single_node_model(BatchNorm1D(), (2, 1))
    L = m.nodes["L"].layer
    x = np.array([[[1.0], [2.0]], [[3.0], [4.0]]])  # batch 2, time 2
    out = m.forward(x, train=True).array
    mean, var = 2.5, 1.25  # stats over batch and time, biased variance
    expect = (x - mean) / np.sqrt(var + 1e-3)
    np.testing.assert_allclose(np.asarray(out), expect, rtol=1e-12)
    # running stats moved one step of momentum 0.01 from (0, 1)
    np.testing.assert_allclose(L.buffers["running_mean"], [0.99 * 0.0 + 0.01 * mean])
    np.testing.assert_allclose(L.buffers["running_var"], [0.99 * 1.0 + 0.01 * var])


def test_batchnorm_eval_uses_running_stats():
    m = single_node_model(BatchNorm1D(), (2, 1))
    x = np.array([[[1.0], [2.0]], [[3.0], [4.0]]])
    out = m.forward(x).array  # running stats still (0, 1)
    np.testing.assert_allclose(np.asarray(out), x / np.sqrt(1 + 1e-3), rtol=1e-12)


def test_batchnorm_rejects_single_sample_training():
    m = single_node_model(BatchNorm1D(), (2, 1))
    with pytest.raises(DegenerateBatchError):
        m.forward(np.ones((1, 2, 1)), train=True)


def test_batchnorm_gain_shift_applied():
    m = single_node_model(BatchNorm1D(), (1, 2))
    L = m.nodes["L"].layer
    L.params["gain"][...] = np.array([2.0, 3.0])
    L.params["shift"][...] = np.array([10.0, 20.0])
    x = np.array([[[1.0, 1.0]], [[3.0, 5.0]]])
    out = np.asarray(m.forward(x, train=True).array)
    norm0 = (x[..., 0] - 2.0) / np.sqrt(1.0 + 1e-3)
    norm1 = (x[..., 1] - 3.0) / np.sqrt(4.0 + 1e-3)
    np.testing.assert_allclose(out[..., 0], norm0 * 2.0 + 10.0, rtol=1e-12)
    np.testing.assert_allclose(out[..., 1], norm1 * 3.0 + 20.0, rtol=1e-12)


def test_dropout_scales_survivors_and_matches_rate():
    m = single_node_model(Dropout(0.25, seed=11), (40, 5))
    x = np.ones((4, 40, 5))
    out = np.asarray(m.forward(x, train=True).array)
    kept = out != 0.0
    np.testing.assert_allclose(out[kept], 1.0 / 0.75)
    rate = 1.0 - kept.mean()
    assert 0.15 < rate < 0.35
    # evaluation is the identity
    np.testing.assert_array_equal(np.asarray(m.forward(x).array), x)


def test_dropout_reseed_reproduces_masks():
    m = single_node_model(Dropout(0.5, seed=3), (10, 2))
    L = m.nodes["L"].layer
    x = np.ones((2, 10, 2))
    a = np.asarray(m.forward(x, train=True).array)
    b = np.asarray(m.forward(x, train=True).array)
    L.reseed(3)
    c = np.asarray(m.forward(x, train=True).array)
    assert not np.array_equal(a, b)  # stream advances
    np.testing.assert_array_equal(a, c)  # reseed rewinds it


def test_dropout_derives_stream_from_build_seed():
    x = np.ones((2, 10, 2))
    a = np.asarray(single_node_model(Dropout(0.5), (10, 2), seed=5)
                   .forward(x, train=True).array)
    b = np.asarray(single_node_model(Dropout(0.5), (10, 2), seed=5)
                   .forward(x, train=True).array)
    c = np.asarray(single_node_model(Dropout(0.5), (10, 2), seed=6)
                   .forward(x, train=True).array)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_dropout_rejects_bad_rate():
    with pytest.raises(ParameterError):
        Dropout(1.0)
    with pytest.raises(ParameterError):
        Dropout(-0.1)


def test_activation_layer_leaky_slope():
    m = single_node_model(ActivationLayer("leaky_relu", leaky_slope=0.1), (3, 1))
    x = np.array([-2.0, 0.0, 3.0]).reshape(1, 3, 1)
    np.testing.assert_allclose(m.forward(x).array.ravel(), [-0.2, 0.0, 3.0])


def test_flatten_and_reshape_roundtrip():
    m = single_node_model(Flatten(), (2, 3))
    x = np.arange(6.0).reshape(1, 2, 3)
    out = m.forward(x).array
    assert out.shape == (1, 6)
    np.testing.assert_array_equal(np.asarray(out).ravel(), np.arange(6.0))
    m2 = single_node_model(Reshape((3, 2)), (6,))
    back = m2.forward(np.asarray(out)).array
    assert back.shape == (1, 3, 2)


def test_reshape_rejects_element_count_change():
    with pytest.raises(ShapeError):
        single_node_model(Reshape((4, 2)), (6,))


def test_add_and_concat():
    m = single_node_model(Add(2), (2, 1), n_inputs=2)
    x = {"x0": np.ones((1, 2, 1)), "x1": 2 * np.ones((1, 2, 1))}
    np.testing.assert_allclose(m.forward(x).array.ravel(), [3.0, 3.0])
    m2 = single_node_model(Concat(2), (2, 2), n_inputs=2)
    out = m2.forward({"x0": np.zeros((1, 2, 2)), "x1": np.ones((1, 2, 2))}).array
    assert out.shape == (1, 2, 4)
    np.testing.assert_allclose(np.asarray(out)[0, 0], [0, 0, 1, 1])


def test_upsample_repeats_steps():
    m = single_node_model(Upsample1D(3), (2, 1))
    x = np.array([1.0, 2.0]).reshape(1, 2, 1)
    np.testing.assert_allclose(m.forward(x).array.ravel(), [1, 1, 1, 2, 2, 2])


def test_upsample_backward_sums_blocks():
    m = single_node_model(Upsample1D(2), (2, 1))
    m.forward(np.ones((1, 2, 1)), train=True)
    m.backward(np.array([1.0, 2.0, 3.0, 4.0]).reshape(1, 4, 1))
    np.testing.assert_allclose(m.last_input_grads["x0"].ravel(), [3.0, 7.0])
