"""Losses, the Adam optimizer, the fit loop, and evaluation metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .errors import (
    ContractError,
    MetricUndefinedError,
    ParameterError,
    ShapeError,
    TrainingDivergedError,
)
from .graph import Model
from .tensor import as_array

CE_EPS = 1e-12

# -- losses -------------------------------------------------------------------


def loss_and_grad(kind: str, prediction, target) -> tuple[float, np.ndarray]:
    """Return (scalar loss, gradient w.r.t. the prediction).

    ``mse`` and ``mae`` average over every element; ``cross_entropy``
    averages the per-row negative log likelihood and expects prediction rows
    that already sum to one (softmax outputs).
    """
    p = as_array(prediction)
    t = as_array(target)
    if p.shape != t.shape:
        raise ShapeError(f"prediction {p.shape} and target {t.shape} differ")
    if kind == "mse":
        d = p - t
        return float((d * d).mean()), (2.0 / d.size) * d
    if kind == "mae":
        d = p - t
        return float(np.abs(d).mean()), np.sign(d) / d.size
    if kind == "cross_entropy":
        if p.ndim != 2:
            raise ShapeError(f"cross_entropy expects [batch, classes], got {p.shape}")
        sums = p.sum(axis=1)
        if np.abs(sums - 1.0).max() > 1e-6:
            raise ContractError(
                "cross_entropy needs probability rows; worst row sum "
                f"{sums[np.abs(sums - 1.0).argmax()]:.8f}"
            )
        logp = np.log(p + CE_EPS)
        loss = float(-(t * logp).sum(axis=1).mean())
        grad = -(t / (p + CE_EPS)) / p.shape[0]
        return loss, grad
    raise ParameterError(f"unknown loss {kind!r}")


# -- optimizer ------------------------------------------------------------------


class Adam:
    """Adam with bias correction; updates parameter arrays in place.

    m <- b1 m + (1-b1) g        v <- b2 v + (1-b2) g^2
    theta <- theta - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
    """

    def __init__(self, params: dict[str, np.ndarray], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8,
                 frozen: Iterable[str] = ()):
        if lr <= 0:
            raise ParameterError("lr must be > 0")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ParameterError("betas must lie in [0, 1)")
        self.params = params
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.epsilon = float(epsilon)
        self.frozen = set(frozen)
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items() if k not in self.frozen}
        self.v = {k: np.zeros_like(v) for k, v in params.items() if k not in self.frozen}

    def step(self, grads: dict[str, np.ndarray]):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, m in self.m.items():
            g = grads[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            self.params[name] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.epsilon)


# -- early stopping ---------------------------------------------------------------


class EarlyStopping:
    """Stop after `patience` consecutive epochs without improvement.

    An epoch improves when its monitored value is strictly below
    ``best - min_delta``.  Epoch indices are 0-based.
    """

    def __init__(self, patience: int, min_delta: float = 0.0):
        if patience < 0:
            raise ParameterError("patience must be >= 0")
        if min_delta < 0:
            raise ParameterError("min_delta must be >= 0")
        self.patience = int(patience)
        self.min_delta = float(min_delta)
        self.best = np.inf
        self.best_epoch = -1
        self.strikes = 0
        self.epoch = -1

    def update(self, value: float) -> bool:
        """Record one epoch's monitored value; True means stop now."""
        self.epoch += 1
        if value < self.best - self.min_delta:
            self.best = value
            self.best_epoch = self.epoch
            self.strikes = 0
            return False
        self.strikes += 1
        return self.strikes >= self.patience


# -- fit ---------------------------------------------------------------------------


@dataclass
class TrainConfig:
    loss: str = "mse"
    batch_size: int = 32
    max_epochs: int = 10
    patience: int = 2
    min_delta: float = 0.0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0


@dataclass
class History:
    """Per-epoch train/val losses plus the stopping bookkeeping."""

    epochs: list[dict] = field(default_factory=list)
    best_epoch: int = -1
    stopped_epoch: int = -1

    def lines(self) -> list[str]:
        return [
            f"epoch {e['epoch']} train_loss {e['train_loss']:.10g} "
            f"val_loss {e['val_loss']:.10g}"
            for e in self.epochs
        ]


def _batches(n: int, batch_size: int, order: Optional[np.ndarray] = None):
    idx = np.arange(n) if order is None else order
    for start in range(0, n, batch_size):
        yield idx[start : start + batch_size]


def _model_inputs(model: Model, inputs: np.ndarray):
    """Single-input datasets feed every entry of a multi-input graph."""
    k = len(model.input_names)
    return inputs if k == 1 else [inputs] * k


def _dataset_loss(model: Model, kind: str, inputs, targets, batch_size: int) -> float:
    total, n = 0.0, inputs.shape[0]
    for sel in _batches(n, batch_size):
        pred = model.forward(_model_inputs(model, inputs[sel]), train=False)
        val, _ = loss_and_grad(kind, pred.array, targets[sel])
        total += val * len(sel)
    return total / n


def predict(model: Model, inputs, batch_size: int = 256) -> np.ndarray:
    """Evaluation-mode forward over a whole input array, batched."""
    xs = as_array(inputs)
    outs = [
        np.asarray(model.forward(_model_inputs(model, xs[sel]), train=False).array)
        for sel in _batches(xs.shape[0], batch_size)
    ]
    return np.concatenate(outs, axis=0)


def fit(model: Model, train_set, val_set, config: TrainConfig,
        frozen: Iterable[str] = ()) -> History:
    """Minibatch training with seeded shuffling and early stopping.

    Shuffles pairs each epoch (the final partial batch is kept), monitors the
    validation loss, and restores the best-epoch parameters and buffers on
    return.  A non-finite training loss raises TrainingDivergedError with the
    0-based epoch index.
    """
    if config.batch_size < 1 or config.max_epochs < 1:
        raise ParameterError("batch_size and max_epochs must be >= 1")
    xs, ys = as_array(train_set.inputs), as_array(train_set.targets)
    vx, vy = as_array(val_set.inputs), as_array(val_set.targets)
    rng = np.random.default_rng(config.seed)
    opt = Adam(model.parameters(), config.lr, config.beta1, config.beta2,
               config.epsilon, frozen=frozen)
    stopper = EarlyStopping(config.patience, config.min_delta)
    history = History()
    best_state: Optional[dict[str, np.ndarray]] = None
    n = xs.shape[0]
    for epoch in range(config.max_epochs):
        order = rng.permutation(n)
        total = 0.0
        for sel in _batches(n, config.batch_size, order):
            pred = model.forward(_model_inputs(model, xs[sel]), train=True)
            val, grad = loss_and_grad(config.loss, pred.array, ys[sel])
            if not np.isfinite(val):
                raise TrainingDivergedError(
                    f"training loss became non-finite at epoch {epoch}", epoch
                )
            grads = model.backward(grad)
            opt.step(grads)
            total += val * len(sel)
        train_loss = total / n
        val_loss = _dataset_loss(model, config.loss, vx, vy, config.batch_size)
        if not np.isfinite(val_loss):
            raise TrainingDivergedError(
                f"validation loss became non-finite at epoch {epoch}", epoch
            )
        history.epochs.append(
            {"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss}
        )
        improved_to = stopper.best_epoch
        stop = stopper.update(val_loss)
        if stopper.best_epoch != improved_to:  # new best this epoch
            best_state = {k: v.copy() for k, v in model.state().items()}
        if stop:
            break
    history.best_epoch = stopper.best_epoch
    history.stopped_epoch = stopper.epoch
    if best_state is not None:
        live = model.state()
        for name, arr in best_state.items():
            live[name][...] = arr
    return history


def two_phase_autoencoder_fit(pair, train_set, val_set, config: TrainConfig,
                              phase1_config: Optional[TrainConfig] = None):
    """Reconstruction pretraining, then classification with a frozen encoder.

    ``pair`` carries ``autoencoder``, ``classifier`` (sharing encoder layer
    instances) and ``encoder_params`` (qualified names to freeze in phase 2).
    Returns ``(classifier, {"phase1": History, "phase2": History})``.
    """
    from .data import SeriesDataset  # local import to avoid a cycle

    p1 = phase1_config or config
    ae_train = SeriesDataset(train_set.inputs, train_set.inputs)
    ae_val = SeriesDataset(val_set.inputs, val_set.inputs)
    p1 = TrainConfig(**{**p1.__dict__, "loss": "mse"})
    h1 = fit(pair.autoencoder, ae_train, ae_val, p1)
    h2 = fit(pair.classifier, train_set, val_set, config,
             frozen=pair.encoder_params)
    return pair.classifier, {"phase1": h1, "phase2": h2}


# -- metrics -----------------------------------------------------------------------


def accuracy(predictions, targets) -> float:
    """Fraction of argmax matches; targets may be one-hot rows or class ids."""
    p = as_array(predictions)
    t = as_array(targets)
    if p.ndim != 2:
        raise ShapeError(f"accuracy expects [batch, classes] scores, got {p.shape}")
    labels = t.argmax(axis=1) if t.ndim == 2 else t.astype(int)
    if labels.shape[0] != p.shape[0]:
        raise ShapeError("prediction and target counts differ")
    return float((p.argmax(axis=1) == labels).mean())


def mean_absolute_error(predictions, targets) -> float:
    p = as_array(predictions)
    t = as_array(targets)
    if p.shape != t.shape:
        raise ShapeError(f"prediction {p.shape} and target {t.shape} differ")
    return float(np.abs(p - t).mean())


def auc(scores, labels) -> float:
    """Rank-based (Mann-Whitney) AUC with ties counted as half.

    Raises MetricUndefinedError unless both classes are present.
    """
    s = as_array(scores).ravel()
    y = as_array(labels).ravel().astype(int)
    if s.shape != y.shape:
        raise ShapeError("scores and labels differ in length")
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise MetricUndefinedError("AUC needs both classes present")
    order = np.argsort(s, kind="stable")
    ranks = np.empty(len(s))
    ranks[order] = np.arange(1, len(s) + 1)
    # average ranks across ties
    sorted_s = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        if j > i:
            ranks[order[i : j + 1]] = 0.5 * (i + 1 + j + 1)
        i = j + 1
    r_pos = ranks[y == 1].sum()
    return float((r_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def evaluate(kind: str, predictions, targets) -> float:
    if kind == "accuracy":
        return accuracy(predictions, targets)
    if kind == "mae":
        return mean_absolute_error(predictions, targets)
    if kind == "auc":
        return auc(predictions, targets)
    raise ParameterError(f"unknown metric {kind!r}")
