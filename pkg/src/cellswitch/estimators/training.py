"""Mini-batch Adagrad training with a heldout split and early stopping."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Protocol

import numpy as np

from .nn import AdagradState, LstmParams, MlpParams, lstm_forward, lstm_gradient, \
    mlp_forward, mlp_gradient

log = logging.getLogger(__name__)

DEFAULT_EPOCHS = 50
DEFAULT_BATCH = 64
DEFAULT_PATIENCE = 10


@dataclass
class Dataset:
    """Feature/target pairs with a per-sample train/heldout tag.

    x is (N, 64) for the feedforward estimators or (N, W, D) for the
    recurrent one; targets are stored normalized.
    """

    x: np.ndarray
    y: np.ndarray
    heldout: np.ndarray  # bool mask

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.heldout = np.asarray(self.heldout, dtype=bool)
        if self.x.shape[0] != self.y.shape[0] or self.y.shape != self.heldout.shape:
            raise ValueError("dataset arrays must align on the sample axis")
        if not np.all(np.isfinite(self.x)) or not np.all(np.isfinite(self.y)):
            raise ValueError("non-finite values in dataset")

    @property
    def n_train(self) -> int:
        return int((~self.heldout).sum())

    @property
    def n_heldout(self) -> int:
        return int(self.heldout.sum())

    def train_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        keep = ~self.heldout
        return self.x[keep], self.y[keep]

    def heldout_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return self.x[self.heldout], self.y[self.heldout]


class Network(Protocol):
    def params_list(self) -> List[np.ndarray]: ...
    def loss_and_grads(self, x: np.ndarray, y: np.ndarray) -> tuple[float, List[np.ndarray]]: ...
    def predict_batch(self, x: np.ndarray) -> np.ndarray: ...


@dataclass
class MlpNet:
    params: MlpParams

    def params_list(self) -> List[np.ndarray]:
        return self.params.params_list()

    def loss_and_grads(self, x, y):
        return mlp_gradient(self.params, x, y)

    def predict_batch(self, x):
        return np.atleast_1d(mlp_forward(self.params, x))


@dataclass
class LstmNet:
    params: LstmParams

    def params_list(self) -> List[np.ndarray]:
        return self.params.params_list()

    def loss_and_grads(self, x, y):
        return lstm_gradient(self.params, x, y)

    def predict_batch(self, x):
        return np.atleast_1d(lstm_forward(self.params, x))


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    heldout_loss: float


@dataclass
class TrainReport:
    history: List[EpochStats] = field(default_factory=list)
    stopped_early: bool = False
    best_epoch: int = -1


def _eval_loss(net: Network, x: np.ndarray, y: np.ndarray, batch: int = 1024) -> float:
    if x.shape[0] == 0:
        return float("nan")
    total = 0.0
    for lo in range(0, x.shape[0], batch):
        pred = net.predict_batch(x[lo:lo + batch])
        total += float(np.sum((pred - y[lo:lo + batch]) ** 2))
    return total / x.shape[0]


def train(net: Network, dataset: Dataset, adagrad: AdagradState,
          epochs: int = DEFAULT_EPOCHS, batch_size: int = DEFAULT_BATCH,
          seed: int = 0, patience: int = DEFAULT_PATIENCE) -> TrainReport:
    """Shuffled mini-batch training.

    The heldout loss is evaluated once per epoch and used only to stop
    early (no improvement for `patience` epochs) and to pick the snapshot
    that is restored at the end; it never feeds parameter updates.
    """
    if epochs < 1 or batch_size < 1:
        raise ValueError("epochs and batch size must be >= 1")
    x_tr, y_tr = dataset.train_arrays()
    x_ho, y_ho = dataset.heldout_arrays()
    if x_tr.shape[0] == 0:
        raise ValueError("no training samples")
    rng = np.random.default_rng(seed)
    params = net.params_list()
    best = [p.copy() for p in params]
    best_loss = np.inf
    report = TrainReport()
    since_best = 0
    for epoch in range(epochs):
        order = rng.permutation(x_tr.shape[0])
        running = 0.0
        seen = 0
        for lo in range(0, len(order), batch_size):
            idx = order[lo:lo + batch_size]
            loss, grads = net.loss_and_grads(x_tr[idx], y_tr[idx])
            adagrad.update(params, grads)
            running += loss * len(idx)
            seen += len(idx)
        heldout_loss = _eval_loss(net, x_ho, y_ho)
        report.history.append(EpochStats(epoch, running / seen, heldout_loss))
        score = heldout_loss if x_ho.shape[0] else running / seen
        if score < best_loss - 1e-12:
            best_loss = score
            best = [p.copy() for p in params]
            report.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= patience:
                report.stopped_early = True
                break
    for p, b in zip(params, best):
        p[...] = b
    return report
