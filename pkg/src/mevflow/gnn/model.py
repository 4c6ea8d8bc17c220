"""The ArbiNet graph classifier: a GNN stack, mean readout and a two-way linear head."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..errors import ShapeError
from ..features import N_FEATURES, FeatureGraph, scale_features
from . import tensor as T
from .layers import KINDS, GnnLayerParams, Topology, glorot, init_layer, layer_forward
from .tensor import Tensor

N_CLASSES = 2


@dataclass(eq=False)
class ArbiNetModel:
    layers: list[GnnLayerParams]
    head_W: Tensor
    head_b: Tensor
    scheme: str = "log1p-counts"
    final_activation: str = "identity"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.layers:
            raise ShapeError("model needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.d_out != nxt.d_in:
                raise ShapeError(f"layer output {prev.d_out} does not feed layer input {nxt.d_in}")
        if self.head_W.shape != (self.layers[-1].d_out, N_CLASSES):
            raise ShapeError(f"head weight must be {(self.layers[-1].d_out, N_CLASSES)}, got {self.head_W.shape}")
        if self.head_b.shape != (1, N_CLASSES):
            raise ShapeError(f"head bias must be (1, {N_CLASSES}), got {self.head_b.shape}")

    @property
    def kind(self) -> str:
        return self.layers[0].kind

    @property
    def d_in(self) -> int:
        return self.layers[0].d_in

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        out = []
        for i, layer in enumerate(self.layers):
            out.extend((f"layers.{i}.{name}", t) for name, t in layer.tensors())
        out.append(("head.W", self.head_W))
        out.append(("head.b", self.head_b))
        return out

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]

    def zero_grad(self) -> None:
        for t in self.parameters():
            t.zero_grad()

    def copy(self) -> "ArbiNetModel":
        layers = [
            GnnLayerParams(l.kind, l.d_in, l.d_out,
                           {k: Tensor(v.data.copy(), requires_grad=True) for k, v in l.params.items()})
            for l in self.layers
        ]
        return ArbiNetModel(
            layers,
            Tensor(self.head_W.data.copy(), requires_grad=True),
            Tensor(self.head_b.data.copy(), requires_grad=True),
            self.scheme, self.final_activation, dict(self.metadata),
        )


def init_model(kind: str = "SAGE", d_in: int = N_FEATURES, hidden: int = 64, n_layers: int = 2,
               seed: int = 0, scheme: str = "log1p-counts", final_activation: str = "identity",
               metadata: Optional[dict] = None) -> ArbiNetModel:
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    if n_layers < 1:
        raise ValueError("n_layers must be >= 1")
    rng = np.random.default_rng(seed)
    layers = []
    width = d_in
    for _ in range(n_layers):
        layers.append(init_layer(kind, width, hidden, rng))
        width = hidden
    head_W = Tensor(glorot(rng, (hidden, N_CLASSES)), requires_grad=True)
    head_b = Tensor(np.zeros((1, N_CLASSES)), requires_grad=True)
    meta = {"seed": seed, "hidden": hidden, "n_layers": n_layers}
    meta.update(metadata or {})
    return ArbiNetModel(layers, head_W, head_b, scheme, final_activation, meta)


@dataclass(frozen=True, eq=False)
class GraphBatch:
    """Disjoint union of feature graphs; node rows keep graph order."""

    x: np.ndarray
    topo: Topology
    graph_index: np.ndarray  # node -> graph
    counts: np.ndarray
    labels: Optional[np.ndarray]
    txs: tuple[str, ...]

    @property
    def n_graphs(self) -> int:
        return len(self.counts)

    @classmethod
    def from_graphs(cls, graphs: Sequence[FeatureGraph]) -> "GraphBatch":
        if not graphs:
            raise ShapeError("empty batch")
        xs, edges, owner, counts = [], [], [], []
        offset = 0
        for g, fg in enumerate(graphs):
            n = fg.n_nodes
            if n == 0:
                raise ShapeError(f"graph {fg.tx} has no nodes")
            xs.append(fg.x)
            if len(fg.edges):
                edges.append(fg.edges + offset)
            owner.append(np.full(n, g, dtype=np.int64))
            counts.append(n)
            offset += n
        x = np.concatenate(xs)
        e = np.concatenate(edges) if edges else np.zeros((0, 2), dtype=np.int64)
        labels = None
        if all(fg.label is not None for fg in graphs):
            labels = np.array([fg.label for fg in graphs], dtype=np.int64)
        return cls(x, Topology.build(offset, e), np.concatenate(owner),
                   np.array(counts, dtype=np.int64), labels, tuple(fg.tx for fg in graphs))


def readout_mean(H: Tensor, graph_index: Optional[np.ndarray] = None,
                 n_graphs: Optional[int] = None) -> Tensor:
    """Column-wise mean per graph; a single graph when ``graph_index`` is omitted."""
    if H.rows == 0:
        raise ShapeError("readout of an empty graph")
    if graph_index is None:
        graph_index = np.zeros(H.rows, dtype=np.int64)
        n_graphs = 1
    counts = np.bincount(graph_index, minlength=n_graphs).astype(np.float64)
    if np.any(counts == 0):
        raise ShapeError("readout of an empty graph")
    return T.scale_rows(T.scatter_rows(H, graph_index, n_graphs), 1.0 / counts)


def batch_logits(model: ArbiNetModel, batch: GraphBatch, dropout: float = 0.0,
                 rng: Optional[np.random.Generator] = None) -> Tensor:
    if batch.x.shape[1] != model.d_in:
        raise ShapeError(f"features have {batch.x.shape[1]} columns, model expects {model.d_in}")
    H = Tensor(batch.x)
    last = len(model.layers) - 1
    for i, layer in enumerate(model.layers):
        if dropout > 0.0 and rng is not None:
            H = T.dropout(H, dropout, rng)
        H = layer_forward(layer, batch.topo, H, "relu" if i < last else model.final_activation)
    pooled = readout_mean(H, batch.graph_index, batch.n_graphs)
    return T.add(T.matmul(pooled, model.head_W), model.head_b)


def prepare(graphs: Sequence[FeatureGraph], scheme: str) -> list[FeatureGraph]:
    """Apply the model's scaling scheme to raw graphs; already-scaled graphs pass through."""
    out = []
    for fg in graphs:
        if fg.scheme == scheme:
            out.append(fg)
        elif fg.scheme == "none":
            out.append(scale_features(fg, scheme))
        else:
            raise ShapeError(f"{fg.tx}: graph scaled with {fg.scheme!r}, model expects {scheme!r}")
    return out


def model_forward(model: ArbiNetModel, fg: FeatureGraph) -> np.ndarray:
    """Two logits (non-MEV, MEV) for one feature graph."""
    [fg] = prepare([fg], model.scheme)
    return batch_logits(model, GraphBatch.from_graphs([fg])).data[0].copy()


def predict_proba(model: ArbiNetModel, graphs: Sequence[FeatureGraph], batch_size: int = 256) -> np.ndarray:
    """Probability of the MEV class for each graph."""
    graphs = prepare(graphs, model.scheme)
    out = []
    for start in range(0, len(graphs), batch_size):
        logits = batch_logits(model, GraphBatch.from_graphs(graphs[start:start + batch_size])).data
        out.append(np.exp(T.log_softmax(logits))[:, 1])
    return np.concatenate(out) if out else np.zeros(0)


def predict(model: ArbiNetModel, graphs: Sequence[FeatureGraph], batch_size: int = 256) -> np.ndarray:
    """Hard labels; ties go to the non-MEV class."""
    graphs = prepare(graphs, model.scheme)
    out = []
    for start in range(0, len(graphs), batch_size):
        logits = batch_logits(model, GraphBatch.from_graphs(graphs[start:start + batch_size])).data
        out.append((logits[:, 1] > logits[:, 0]).astype(np.int64))
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)
