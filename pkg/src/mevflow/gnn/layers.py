"""GCN, GraphSAGE and GAT message-passing layers.

Row-vector convention: node states are rows of H and a layer computes
``H @ W``. Edges run src -> dst in the money-flow direction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ShapeError
from . import tensor as T
from .tensor import Tensor

KINDS = ("GCN", "SAGE", "GAT")
LEAKY_SLOPE = 0.2


@dataclass(frozen=True, eq=False)
class Topology:
    """Index arrays for one (possibly batched) graph, built once and reused by every layer."""

    n: int
    src: np.ndarray  # directed edges, self-loops removed
    dst: np.ndarray
    und_src: np.ndarray  # undirected neighbour pairs, both orientations
    und_dst: np.ndarray
    und_inv_deg: np.ndarray
    in_inv_deg: np.ndarray
    att_src: np.ndarray  # in-edges plus one self-loop per node
    att_dst: np.ndarray

    @classmethod
    def build(cls, n: int, edges: np.ndarray) -> "Topology":
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if len(edges) and (edges.min() < 0 or edges.max() >= n):
            raise ShapeError("edge endpoint out of range")
        edges = edges[edges[:, 0] != edges[:, 1]]
        if len(edges):
            edges = np.unique(edges, axis=0)
        src, dst = edges[:, 0].copy(), edges[:, 1].copy()

        both = np.concatenate([edges, edges[:, ::-1]]) if len(edges) else edges
        if len(both):
            both = np.unique(both, axis=0)
        und_src, und_dst = both[:, 0].copy(), both[:, 1].copy()

        und_deg = np.bincount(und_dst, minlength=n).astype(np.float64)
        in_deg = np.bincount(dst, minlength=n).astype(np.float64)
        loops = np.arange(n, dtype=np.int64)
        return cls(
            n=n, src=src, dst=dst,
            und_src=und_src, und_dst=und_dst,
            und_inv_deg=_safe_inverse(und_deg),
            in_inv_deg=_safe_inverse(in_deg),
            att_src=np.concatenate([src, loops]),
            att_dst=np.concatenate([dst, loops]),
        )


def _safe_inverse(deg: np.ndarray) -> np.ndarray:
    out = np.zeros_like(deg)
    np.divide(1.0, deg, out=out, where=deg > 0)
    return out


@dataclass(frozen=True, eq=False)
class GnnLayerParams:
    kind: str
    d_in: int
    d_out: int
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ShapeError(f"unknown layer kind {self.kind!r}")
        expected = param_shapes(self.kind, self.d_in, self.d_out)
        if set(self.params) != set(expected):
            raise ShapeError(f"{self.kind} expects parameters {sorted(expected)}, got {sorted(self.params)}")
        for name, shape in expected.items():
            if self.params[name].shape != shape:
                raise ShapeError(f"{self.kind}.{name}: expected {shape}, got {self.params[name].shape}")

    def tensors(self) -> list[tuple[str, Tensor]]:
        return [(name, self.params[name]) for name in sorted(self.params)]


def param_shapes(kind: str, d_in: int, d_out: int) -> dict[str, tuple[int, int]]:
    if kind == "GCN":
        return {"W": (d_in, d_out), "B": (d_in, d_out)}
    if kind == "SAGE":
        return {"W": (2 * d_in, d_out)}
    if kind == "GAT":
        return {"W": (d_in, d_out), "a": (2 * d_out, 1)}
    raise ShapeError(f"unknown layer kind {kind!r}")


def glorot(rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    limit = np.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-limit, limit, size=shape)


def init_layer(kind: str, d_in: int, d_out: int, rng: np.random.Generator) -> GnnLayerParams:
    params = {
        name: Tensor(glorot(rng, shape), requires_grad=True)
        for name, shape in sorted(param_shapes(kind, d_in, d_out).items())
    }
    return GnnLayerParams(kind, d_in, d_out, params)


def neighbor_mean(H: Tensor, src: np.ndarray, dst: np.ndarray, inv_deg: np.ndarray, n: int) -> Tensor:
    """Mean of H over each node's neighbours; nodes without neighbours get zeros."""
    return T.scale_rows(T.scatter_rows(T.gather_rows(H, src), dst, n), inv_deg)


def gat_attention(params: GnnLayerParams, topo: Topology, H: Tensor) -> tuple[Tensor, Tensor]:
    """Projected states W h and attention weights, one per (src, dst) in att_src/att_dst."""
    Wh = T.matmul(H, params.params["W"])
    a = params.params["a"]
    d = params.d_out
    score_target = T.matmul(Wh, T.slice_rows(a, 0, d))
    score_source = T.matmul(Wh, T.slice_rows(a, d, 2 * d))
    logits = T.add(T.gather_rows(score_target, topo.att_dst), T.gather_rows(score_source, topo.att_src))
    alpha = T.segment_softmax(T.leaky_relu(logits, LEAKY_SLOPE), topo.att_dst, topo.n)
    return Wh, alpha


def layer_forward(params: GnnLayerParams, topo: Topology, H: Tensor,
                  activation: Optional[str] = "relu") -> Tensor:
    if H.rows != topo.n:
        raise ShapeError(f"H has {H.rows} rows for {topo.n} nodes")
    if H.cols != params.d_in:
        raise ShapeError(f"{params.kind} layer expects {params.d_in} input columns, got {H.cols}")

    if params.kind == "GCN":
        agg = neighbor_mean(H, topo.und_src, topo.und_dst, topo.und_inv_deg, topo.n)
        out = T.add(T.matmul(agg, params.params["W"]), T.matmul(H, params.params["B"]))
    elif params.kind == "SAGE":
        agg = neighbor_mean(H, topo.src, topo.dst, topo.in_inv_deg, topo.n)
        out = T.matmul(T.concat_cols(H, agg), params.params["W"])
    else:
        Wh, alpha = gat_attention(params, topo, H)
        messages = T.mul_col(T.gather_rows(Wh, topo.att_src), alpha)
        out = T.scatter_rows(messages, topo.att_dst, topo.n)

    if activation == "relu":
        return T.relu(out)
    if activation in (None, "identity"):
        return out
    raise ValueError(f"unknown activation {activation!r}")
