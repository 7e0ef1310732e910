"""Preprocessing, windowing, synthetic generators, CSV, and the dataset cache."""

import io

import numpy as np
import pytest

from deepseries.data import (
    SeriesDataset,
    anomaly_harness,
    anomaly_windows,
    chrono_split,
    labeled_segments,
    load_csv,
    load_dataset,
    pad_or_truncate,
    save_dataset,
    sine_mix,
    smooth,
    split_pairs,
    traffic_with_anomalies,
    windowize,
    zscore,
)
from deepseries.errors import (
    DataError,
    DegenerateSegmentError,
    FormatError,
    MetricUndefinedError,
    ParameterError,
    ShapeError,
)
from deepseries.tensor import Tensor

# ---------------------------------------------------------------- preprocessing


def smooth_oracle(series, window, iterations):
    a = np.asarray(series, dtype=float).copy()
    if a.ndim == 1:
        a = a[:, None]
    for _ in range(iterations):
        out = np.empty_like(a)
        for i in range(a.shape[0]):
            out[i] = a[max(0, i - window + 1) : i + 1].mean(axis=0)
        a = out
    return a


def test_smooth_hand_case():
    got = np.asarray(smooth([1.0, 2.0, 3.0, 4.0], window=2).array)
    np.testing.assert_allclose(got[:, 0], [1.0, 1.5, 2.5, 3.5], atol=1e-15)
    twice = np.asarray(smooth([1.0, 2.0, 3.0, 4.0], window=2, iterations=2).array)
    np.testing.assert_allclose(twice[:, 0], [1.0, 1.25, 2.0, 3.0], atol=1e-15)


@pytest.mark.parametrize("window,iterations", [(1, 1), (3, 1), (5, 3), (4, 0)])
def test_smooth_matches_bruteforce(window, iterations):
    rng = np.random.default_rng(7)
    series = rng.normal(size=(40, 2))
    got = np.asarray(smooth(series, window, iterations).array)
    np.testing.assert_allclose(got, smooth_oracle(series, window, iterations),
                               atol=1e-12)


def test_smooth_keeps_length_and_validates():
    assert smooth(np.arange(9.0), 4).shape == (9, 1)
    with pytest.raises(ParameterError):
        smooth([1.0], 0)
    with pytest.raises(ParameterError):
        smooth([1.0], 2, iterations=-1)
    with pytest.raises(DataError):
        smooth(np.empty((0, 1)), 2)


def test_zscore_uses_sample_std():
    got = np.asarray(zscore([1.0, 2.0, 3.0]).array)
    np.testing.assert_allclose(got[:, 0], [-1.0, 0.0, 1.0], atol=1e-15)
    rng = np.random.default_rng(0)
    seg = rng.normal(2.0, 5.0, size=(30, 3))
    z = np.asarray(zscore(seg).array)
    np.testing.assert_allclose(z.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(z.std(axis=0, ddof=1), 1.0, atol=1e-12)


def test_zscore_degenerate_and_short():
    seg = np.column_stack([np.arange(5.0), np.full(5, 3.0)])
    with pytest.raises(DegenerateSegmentError, match="column 1 is constant"):
        zscore(seg)
    with pytest.raises(DataError):
        zscore([1.0])


def test_chrono_split_contiguous_and_remainder_to_test():
    series = np.arange(10.0)
    tr, va, te = chrono_split(series)
    assert (tr.shape[0], va.shape[0], te.shape[0]) == (7, 2, 1)
    np.testing.assert_array_equal(np.asarray(tr.array)[:, 0], np.arange(7.0))
    np.testing.assert_array_equal(np.asarray(va.array)[:, 0], [7.0, 8.0])
    np.testing.assert_array_equal(np.asarray(te.array)[:, 0], [9.0])
    # 9 steps: int(9*0.7)=6, int(9*0.2)=1, leaving 2 for test
    tr, va, te = chrono_split(np.arange(9.0))
    assert (tr.shape[0], va.shape[0], te.shape[0]) == (6, 1, 2)


def test_chrono_split_validation():
    with pytest.raises(ParameterError):
        chrono_split(np.arange(10.0), (0.5, 0.5))
    with pytest.raises(ParameterError):
        chrono_split(np.arange(10.0), (0.8, 0.3, -0.1))
    with pytest.raises(DataError):
        chrono_split(np.arange(2.0))
    with pytest.raises(DataError):  # n=3 gives an empty val part
        chrono_split(np.arange(3.0))


def test_windowize_hand_case():
    ds = windowize(np.arange(10.0), window=3, horizon=2)
    assert ds.n == 6
    assert ds.note == "w3h2"
    xs = np.asarray(ds.inputs.array)
    ys = np.asarray(ds.targets.array)
    assert xs.shape == (6, 3, 1) and ys.shape == (6, 2, 1)
    np.testing.assert_array_equal(xs[0, :, 0], [0.0, 1.0, 2.0])
    np.testing.assert_array_equal(ys[0, :, 0], [3.0, 4.0])
    np.testing.assert_array_equal(xs[5, :, 0], [5.0, 6.0, 7.0])
    np.testing.assert_array_equal(ys[5, :, 0], [8.0, 9.0])


def test_windowize_stride_and_counts():
    assert windowize(np.arange(10.0), 3, 2, stride=2).n == 3
    assert windowize(np.arange(5.0), 3, 2).n == 1  # exactly one fits
    with pytest.raises(DataError, match="shorter than window"):
        windowize(np.arange(4.0), 3, 2)
    with pytest.raises(ParameterError):
        windowize(np.arange(10.0), 0, 1)


def test_pad_or_truncate():
    out = np.asarray(pad_or_truncate([1.0, 2.0], 4).array)
    np.testing.assert_array_equal(out[:, 0], [1.0, 2.0, 0.0, 0.0])
    out = np.asarray(pad_or_truncate(np.arange(6.0), 4).array)
    np.testing.assert_array_equal(out[:, 0], [0.0, 1.0, 2.0, 3.0])
    assert pad_or_truncate([1.0, 2.0], 2).shape == (2, 1)
    with pytest.raises(ParameterError):
        pad_or_truncate([1.0], 0)


def test_split_pairs_counts_and_seeding():
    ds = windowize(np.arange(20.0), 3, 1)  # 17 pairs
    tr, va, te = split_pairs(ds)
    assert (tr.n, va.n, te.n) == (11, 3, 3)
    # unseeded split preserves order
    np.testing.assert_array_equal(
        np.asarray(tr.inputs.array), np.asarray(ds.inputs.array)[:11]
    )
    # seeded split shuffles reproducibly and keeps pairs aligned
    a1 = split_pairs(ds, seed=5)[0]
    a2 = split_pairs(ds, seed=5)[0]
    np.testing.assert_array_equal(np.asarray(a1.inputs.array),
                                  np.asarray(a2.inputs.array))
    # each input window still maps to its own following target
    xs = np.asarray(a1.inputs.array)
    ys = np.asarray(a1.targets.array)
    for i in range(a1.n):
        assert ys[i, 0, 0] == xs[i, -1, 0] + 1.0
    with pytest.raises(DataError):
        split_pairs(windowize(np.arange(5.0), 3, 2))


def test_series_dataset_validation():
    with pytest.raises(ShapeError, match="pair counts differ"):
        SeriesDataset(np.zeros((3, 2, 1)), np.zeros((4, 1)))
    ds = SeriesDataset(np.zeros((3, 2, 1)), np.ones((3, 1)))
    sub = ds.take([2, 0])
    assert sub.n == 2


# -------------------------------------------------------------- anomaly support


def test_anomaly_windows_flags():
    labels = [0, 0, 0, 1, 0, 0, 0, 0]
    ds, tgt, clean = anomaly_windows(np.arange(8.0), labels, window=3, horizon=1)
    assert ds.n == 5
    np.testing.assert_array_equal(tgt, [True, False, False, False, False])
    np.testing.assert_array_equal(clean, [False, False, False, False, True])
    with pytest.raises(ShapeError, match="align"):
        anomaly_windows(np.arange(8.0), [0, 1], 3, 1)


class _ZeroModel:
    """Predicts all zeros, so the error score is the target's mean |value|."""

    input_names = ["x"]

    def __init__(self, horizon):
        self.horizon = horizon

    def forward(self, x, train=False):
        a = np.asarray(x)
        return Tensor(np.zeros((a.shape[0], self.horizon, a.shape[2])))


def test_anomaly_harness_scores_and_tiebreak():
    xs = np.zeros((4, 3, 1))
    ys = np.array([1.0, 3.0, 3.0, 0.0])[:, None, None]
    ds = SeriesDataset(xs, ys)
    labels = [0, 1, 1, 0]
    scores, predicted, roc = anomaly_harness(_ZeroModel(1), ds, labels, top_k=2)
    np.testing.assert_array_equal(np.asarray(scores.array), [1.0, 3.0, 3.0, 0.0])
    np.testing.assert_array_equal(np.asarray(predicted.array), [0, 1, 1, 0])
    assert roc == 1.0
    # tied scores: the earlier window wins the single slot
    _, predicted, _ = anomaly_harness(_ZeroModel(1), ds, labels, top_k=1)
    np.testing.assert_array_equal(np.asarray(predicted.array), [0, 1, 0, 0])


def test_anomaly_harness_validation():
    ds = SeriesDataset(np.zeros((3, 2, 1)), np.zeros((3, 1, 1)))
    with pytest.raises(ParameterError, match=r"top_k must lie in \[1, 3\]"):
        anomaly_harness(_ZeroModel(1), ds, [0, 1, 0], top_k=4)
    with pytest.raises(ShapeError):
        anomaly_harness(_ZeroModel(1), ds, [0, 1], top_k=1)
    with pytest.raises(MetricUndefinedError):
        anomaly_harness(_ZeroModel(1), ds, [0, 0, 0], top_k=1)


# ------------------------------------------------------------------- generators


def test_sine_mix_exact_formula():
    t = np.arange(50)
    want = 2.0 + np.sin(2 * np.pi * 0.05 * t) + 0.5 * np.sin(2 * np.pi * 0.11 * t)
    got = np.asarray(
        sine_mix([0.05, 0.11], noise=0.0, length=50, offset=2.0,
                 amplitudes=[1.0, 0.5]).array
    )
    assert got.shape == (50, 1)
    np.testing.assert_allclose(got[:, 0], want, atol=1e-12)


def test_sine_mix_noise_seeded():
    a = np.asarray(sine_mix([0.05], 0.3, 100, seed=4).array)
    b = np.asarray(sine_mix([0.05], 0.3, 100, seed=4).array)
    c = np.asarray(sine_mix([0.05], 0.3, 100, seed=5).array)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sine_mix_validation():
    with pytest.raises(ParameterError):
        sine_mix([], 0.0, 10)
    with pytest.raises(ParameterError):
        sine_mix([0.1], 0.0, 0)
    with pytest.raises(ParameterError):
        sine_mix([0.1, 0.2], 0.0, 10, amplitudes=[1.0])


def test_labeled_segments_layout():
    ds = labeled_segments(classes=3, length=32, count=4, seed=0)
    xs = np.asarray(ds.inputs.array)
    ys = np.asarray(ds.targets.array)
    assert xs.shape == (12, 32, 1) and ys.shape == (12, 3)
    np.testing.assert_array_equal(ys.sum(axis=1), np.ones(12))
    np.testing.assert_array_equal(ys.sum(axis=0), np.full(3, 4.0))
    # shuffled: the first four segments are not all one class
    assert len(set(map(int, ys[:4].argmax(axis=1)))) > 1
    # deterministic for a seed
    again = labeled_segments(classes=3, length=32, count=4, seed=0)
    np.testing.assert_array_equal(xs, np.asarray(again.inputs.array))
    with pytest.raises(ParameterError):
        labeled_segments(1, 32, 4)


def test_labeled_segments_classes_are_separable():
    ds = labeled_segments(classes=2, length=64, count=3, seed=1, noise=0.01)
    xs = np.asarray(ds.inputs.array)
    ys = np.asarray(ds.targets.array).argmax(axis=1)
    # class 1 rides on a +0.25 offset
    means = [xs[ys == c].mean() for c in (0, 1)]
    assert means[1] - means[0] > 0.2


def test_traffic_anomaly_count_and_magnitude():
    series, labels = traffic_with_anomalies(features=3, length=500, rate=0.02,
                                            seed=0)
    a = np.asarray(series.array)
    y = np.asarray(labels.array).astype(bool)
    assert a.shape == (500, 3) and y.shape == (500,)
    assert y.sum() == 10  # exactly floor(0.02 * 500)
    # level shifts push the anomalous rows' maxima well above the clean band
    assert a[y].max(axis=1).min() > a[~y].max() + 1.0
    # reproducible per seed
    b, _ = traffic_with_anomalies(3, 500, 0.02, seed=0)
    np.testing.assert_array_equal(a, np.asarray(b.array))
    with pytest.raises(ParameterError):
        traffic_with_anomalies(0, 500, 0.02)
    with pytest.raises(ParameterError):
        traffic_with_anomalies(3, 500, 0.6)
    with pytest.raises(ParameterError, match="rate too small"):
        traffic_with_anomalies(3, 20, 0.01)


# ----------------------------------------------------------------- CSV loading


CSV_TEXT = "time,load,temp\n0,1.5,20\n1,2.5,21\n2,3.5,22\n"


def test_load_csv_all_columns():
    got = np.asarray(load_csv(io.StringIO(CSV_TEXT)).array)
    np.testing.assert_array_equal(
        got, [[0, 1.5, 20], [1, 2.5, 21], [2, 3.5, 22]]
    )


def test_load_csv_named_and_indexed_columns():
    got = np.asarray(load_csv(io.StringIO(CSV_TEXT), columns=["load"]).array)
    np.testing.assert_array_equal(got[:, 0], [1.5, 2.5, 3.5])
    got = np.asarray(load_csv(io.StringIO(CSV_TEXT), columns=[2, 0]).array)
    np.testing.assert_array_equal(got[0], [20.0, 0.0])


def test_load_csv_without_header():
    got = np.asarray(load_csv(io.StringIO("1,2\n3,4\n"), has_header=False).array)
    np.testing.assert_array_equal(got, [[1, 2], [3, 4]])
    with pytest.raises(FormatError, match="needs a header row"):
        load_csv(io.StringIO("1,2\n"), has_header=False, columns=["a"])


def test_load_csv_skips_blank_lines(tmp_path):
    p = tmp_path / "gaps.csv"
    p.write_text("a,b\n\n1,2\n\n3,4\n\n")
    got = np.asarray(load_csv(str(p)).array)
    np.testing.assert_array_equal(got, [[1, 2], [3, 4]])


def test_load_csv_error_reporting():
    with pytest.raises(FormatError, match="column 'volts' not in header"):
        load_csv(io.StringIO(CSV_TEXT), columns=["volts"])
    with pytest.raises(FormatError, match="column index 9 out of range"):
        load_csv(io.StringIO(CSV_TEXT), columns=[9])
    # bad number on the second data row = file line 3
    with pytest.raises(FormatError, match="line 3: 'oops' is not a number"):
        load_csv(io.StringIO("a,b\n1,2\n1,oops\n"))
    with pytest.raises(FormatError, match="line 3: expected 2 fields, got 3"):
        load_csv(io.StringIO("a,b\n1,2\n1,2,3\n"))
    with pytest.raises(DataError, match="no data rows"):
        load_csv(io.StringIO(""))
    with pytest.raises(DataError, match="header but no data"):
        load_csv(io.StringIO("a,b\n"))


# --------------------------------------------------------------- dataset cache


def test_dataset_cache_roundtrip(tmp_path):
    # float32-representable values survive the cache bit for bit
    xs = np.arange(12.0).reshape(3, 2, 2) * 0.25
    ys = np.arange(3.0)[:, None]
    path = str(tmp_path / "cache.dsd")
    save_dataset(SeriesDataset(xs, ys), path)
    back = load_dataset(path)
    np.testing.assert_array_equal(np.asarray(back.inputs.array), xs)
    np.testing.assert_array_equal(np.asarray(back.targets.array), ys)
    assert back.note == "cache"


def test_dataset_cache_corruption_detected(tmp_path):
    path = tmp_path / "cache.dsd"
    save_dataset(SeriesDataset(np.zeros((2, 3, 1)), np.zeros((2, 1))), str(path))
    blob = bytearray(path.read_bytes())
    blob[len(blob) // 2] ^= 0x01
    path.write_bytes(bytes(blob))
    with pytest.raises(FormatError, match="checksum"):
        load_dataset(str(path))


def test_dataset_cache_rejects_wrong_entries():
    from deepseries.container import write_records
    from deepseries.data import DATASET_MAGIC

    buf = io.BytesIO()
    write_records(DATASET_MAGIC, {"inputs": np.zeros((2, 1))}, buf)
    with pytest.raises(FormatError, match="needs inputs\\+targets"):
        load_dataset(io.BytesIO(buf.getvalue()))


def test_dataset_cache_rejects_weights_magic(tmp_path):
    from deepseries.zoo import build_model

    m = build_model("ExampleModel", (64, 1))
    path = str(tmp_path / "weights.dsw")
    m.save_weights(path)
    with pytest.raises(FormatError, match="bad magic"):
        load_dataset(path)
