"""Finite-difference check of the analytic parameter gradients."""

from __future__ import annotations

import numpy as np

from ..features import N_FEATURES, FeatureGraph
from . import tensor as T
from .model import ArbiNetModel, GraphBatch, batch_logits

# below this gradient magnitude relative error is meaningless; compare absolutely
ABS_FLOOR = 1e-7


def random_feature_graph(rng: np.random.Generator, max_nodes: int = 10, min_nodes: int = 1) -> FeatureGraph:
    """Random graph with count-like and 0/1 features, for gradient and invariance checks."""
    n = int(rng.integers(min_nodes, max_nodes + 1))
    x = rng.integers(0, 6, size=(n, N_FEATURES)).astype(np.float64)
    x[:, 6:11] = rng.integers(0, 2, size=(n, 5))
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    k = int(rng.integers(0, min(len(pairs), 3 * n) + 1)) if pairs else 0
    picks = sorted(rng.choice(len(pairs), size=k, replace=False)) if k else []
    edges = np.array([pairs[i] for i in picks], dtype=np.int64).reshape(-1, 2)
    return FeatureGraph(f"random-{n}-{k}", (), edges, x)


def loss_value(model: ArbiNetModel, batch: GraphBatch, labels: np.ndarray) -> float:
    return float(T.softmax_cross_entropy(batch_logits(model, batch), labels).data[0, 0])


def grad_check(model: ArbiNetModel, fg: FeatureGraph, label: int, eps: float = 1e-5,
               n_samples: int = 100, seed: int = 0) -> float:
    """Largest relative error over a random subsample of parameters.

    Relative error is |a - n| / max(|a|, |n|); when both gradients are below
    ``ABS_FLOOR`` the absolute difference is used instead. The model's
    parameters are restored afterwards.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError("eps must lie in [1e-7, 1e-3]")
    batch = GraphBatch.from_graphs([fg])
    labels = np.array([label], dtype=np.int64)

    model.zero_grad()
    T.softmax_cross_entropy(batch_logits(model, batch), labels).backward()
    params = model.parameters()
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params]
    model.zero_grad()

    slots = [(i, j) for i, p in enumerate(params) for j in range(p.data.size)]
    rng = np.random.default_rng(seed)
    if len(slots) > n_samples:
        picks = rng.choice(len(slots), size=n_samples, replace=False)
        slots = [slots[k] for k in sorted(picks)]

    worst = 0.0
    for i, j in slots:
        flat = params[i].data.reshape(-1)
        saved = flat[j]
        flat[j] = saved + eps
        up = loss_value(model, batch, labels)
        flat[j] = saved - eps
        down = loss_value(model, batch, labels)
        flat[j] = saved
        numeric = (up - down) / (2 * eps)
        exact = analytic[i].reshape(-1)[j]
        scale = max(abs(exact), abs(numeric))
        err = abs(exact - numeric) if scale < ABS_FLOOR else abs(exact - numeric) / scale
        worst = max(worst, err)
    return worst
