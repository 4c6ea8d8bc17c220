"""Mini-batch training with best-validation-F1 model selection."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import TrainingDiverged
from ..features import FeatureGraph
from ..metrics import precision_recall_f1
from . import tensor as T
from .model import ArbiNetModel, GraphBatch, batch_logits, predict, prepare

log = logging.getLogger(__name__)

OPTIMIZERS = ("adam", "sgd")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 40
    batch_size: int = 64
    lr: float = 1e-3
    optimizer: str = "adam"
    seed: int = 0
    weight_decay: float = 0.0
    dropout: float = 0.0
    momentum: float = 0.0
    betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    def to_json(self) -> dict:
        out = asdict(self)
        out["betas"] = list(self.betas)
        return out


class Adam:
    def __init__(self, params, lr, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0):
        self.params = list(params)
        self.lr, self.eps, self.weight_decay = lr, eps, weight_decay
        self.b1, self.b2 = betas
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self) -> None:
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad + self.weight_decay * p.data if self.weight_decay else p.grad
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class SGD:
    def __init__(self, params, lr, momentum=0.0, weight_decay=0.0):
        self.params = list(params)
        self.lr, self.momentum, self.weight_decay = lr, momentum, weight_decay
        self.velocity = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        for p, buf in zip(self.params, self.velocity):
            if p.grad is None:
                continue
            g = p.grad + self.weight_decay * p.data if self.weight_decay else p.grad
            if self.momentum:
                buf *= self.momentum
                buf += g
                g = buf
            p.data -= self.lr * g


def make_optimizer(model: ArbiNetModel, cfg: TrainConfig):
    if cfg.optimizer == "adam":
        return Adam(model.parameters(), cfg.lr, cfg.betas, cfg.adam_eps, cfg.weight_decay)
    return SGD(model.parameters(), cfg.lr, cfg.momentum, cfg.weight_decay)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_precision: Optional[float]
    val_recall: Optional[float]
    val_f1: Optional[float]

    def to_json(self) -> dict:
        return asdict(self)


def evaluate_f1(model: ArbiNetModel, graphs: Sequence[FeatureGraph], batch_size: int = 256):
    labels = np.array([fg.label for fg in graphs], dtype=np.int64)
    pred = predict(model, graphs, batch_size)
    tp = int(np.sum((pred == 1) & (labels == 1)))
    fp = int(np.sum((pred == 1) & (labels == 0)))
    fn = int(np.sum((pred == 0) & (labels == 1)))
    return precision_recall_f1(tp, fp, fn)


def _check_labels(graphs: Sequence[FeatureGraph], name: str) -> None:
    for fg in graphs:
        if fg.label not in (0, 1):
            raise ValueError(f"{name}: graph {fg.tx} has label {fg.label!r}; expected 0 or 1")
        if fg.n_nodes == 0:
            raise ValueError(f"{name}: graph {fg.tx} has no nodes")


def train(model: ArbiNetModel, train_set: Sequence[FeatureGraph],
          val_set: Sequence[FeatureGraph] = (), cfg: TrainConfig = TrainConfig(),
          ) -> tuple[ArbiNetModel, list[EpochRecord]]:
    """Fit ``model`` in place and return a copy of the best-validation-F1 epoch.

    Ties keep the earliest epoch. With an empty validation set the final
    epoch is returned.
    """
    if not train_set:
        raise ValueError("training set is empty")
    _check_labels(train_set, "train")
    _check_labels(val_set, "val")
    train_set = prepare(train_set, model.scheme)
    val_set = prepare(val_set, model.scheme)

    rng = np.random.default_rng(cfg.seed)
    optimizer = make_optimizer(model, cfg)
    history: list[EpochRecord] = []
    best: Optional[ArbiNetModel] = None
    best_f1 = -1.0

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(train_set))
        total, seen = 0.0, 0
        for start in range(0, len(order), cfg.batch_size):
            chunk = [train_set[i] for i in order[start:start + cfg.batch_size]]
            batch = GraphBatch.from_graphs(chunk)
            model.zero_grad()
            logits = batch_logits(model, batch, cfg.dropout, rng)
            loss = T.softmax_cross_entropy(logits, batch.labels)
            value = float(loss.data[0, 0])
            if not math.isfinite(value):
                raise TrainingDiverged(
                    f"loss became {value} at epoch {epoch}, batch starting at {start}; "
                    f"try a smaller learning rate (lr={cfg.lr})"
                )
            loss.backward()
            optimizer.step()
            total += value * len(chunk)
            seen += len(chunk)

        if val_set:
            p, r, f1 = evaluate_f1(model, val_set)
            record = EpochRecord(epoch, total / seen, p, r, f1)
            if f1 > best_f1:
                best_f1, best = f1, model.copy()
                best.metadata["epoch"] = epoch
        else:
            record = EpochRecord(epoch, total / seen, None, None, None)
        history.append(record)
        log.info("epoch %d loss %.5f val_f1 %s", epoch, record.train_loss, record.val_f1)

    if best is None:
        best = model.copy()
        best.metadata["epoch"] = cfg.epochs
    best.metadata["train_config"] = cfg.to_json()
    masked = sorted({group for fg in train_set for group in fg.masked})
    if masked:
        best.metadata["masked"] = masked
    return best, history
