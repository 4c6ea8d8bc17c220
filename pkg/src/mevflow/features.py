"""Node feature matrices for the arbitrage classifier.

Column layout (0-based index -> feature):

    0-2   profits    tokens with negative / positive / zero net
    3-5   tokens     distinct tokens sent, received, and in the whole tx
    6-10  addresses  null, builder, contract kind, tx sender, tx recipient
    11-13 transfers  transfers sent, received, and in the whole tx
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Optional

import numpy as np

from .chain import NULL_ADDRESS, Address
from .errors import FeatureError
from .flowgraph import TransferGraph, profits
from .ingest import AddressKind, AddressKindMap

N_FEATURES = 14

FEATURE_GROUPS = {
    "profits": (0, 1, 2),
    "tokens": (3, 4, 5),
    "addresses": (6, 7, 8, 9, 10),
    "transfers": (11, 12, 13),
}
COUNT_COLUMNS = (0, 1, 2, 3, 4, 5, 11, 12, 13)
SCHEMES = ("none", "log1p-counts")

_KIND_VALUE = {AddressKind.CA: 1.0, AddressKind.EOA: 0.0, AddressKind.UNKNOWN: 0.5}


@dataclass(frozen=True)
class FeatureContext:
    builder: Optional[Address]
    tx_from: Address
    tx_to: Optional[Address]
    kinds: AddressKindMap = field(default_factory=AddressKindMap)


@dataclass(frozen=True, eq=False)
class FeatureGraph:
    tx: str
    nodes: tuple[Address, ...]
    edges: np.ndarray  # (E, 2) int64, deduplicated, no self-loops
    x: np.ndarray  # (N, 14) float64
    label: Optional[int] = None
    scheme: str = "none"
    masked: tuple[str, ...] = ()

    @property
    def n_nodes(self) -> int:
        return self.x.shape[0]

    def with_label(self, label: Optional[int]) -> "FeatureGraph":
        return replace(self, label=label)

    def permuted(self, perm: np.ndarray) -> "FeatureGraph":
        """Reorder nodes so that new node i is old node perm[i]."""
        perm = np.asarray(perm)
        inverse = np.empty_like(perm)
        inverse[perm] = np.arange(len(perm))
        edges = inverse[self.edges] if len(self.edges) else self.edges
        nodes = tuple(self.nodes[p] for p in perm) if self.nodes else ()
        return replace(self, nodes=nodes, edges=edges, x=self.x[perm])


def extract_features(graph: TransferGraph, ctx: FeatureContext) -> FeatureGraph:
    nodes = graph.nodes
    index = {a: i for i, a in enumerate(nodes)}
    n = len(nodes)
    x = np.zeros((n, N_FEATURES), dtype=np.float64)
    if n == 0:
        return FeatureGraph(graph.tx.hash, (), np.zeros((0, 2), dtype=np.int64), x)

    net = profits(graph)
    sent_tokens: dict[Address, set] = {a: set() for a in nodes}
    recv_tokens: dict[Address, set] = {a: set() for a in nodes}
    edge_set: dict[tuple[int, int], None] = {}
    for src, dst, token, _, _ in graph.edges:
        s, d = index[src], index[dst]
        sent_tokens[src].add(token)
        recv_tokens[dst].add(token)
        x[s, 11] += 1
        x[d, 12] += 1
        if s != d:
            edge_set.setdefault((s, d))

    n_tokens = len(graph.tokens)
    n_transfers = len(graph.edges)
    for i, a in enumerate(nodes):
        row = net[a].values()
        x[i, 0] = sum(1 for v in row if v < 0)
        x[i, 1] = sum(1 for v in row if v > 0)
        x[i, 2] = sum(1 for v in row if v == 0)
        x[i, 3] = len(sent_tokens[a])
        x[i, 4] = len(recv_tokens[a])
        x[i, 5] = n_tokens
        x[i, 6] = a == NULL_ADDRESS
        x[i, 7] = ctx.builder is not None and a == ctx.builder
        x[i, 8] = _KIND_VALUE[ctx.kinds.kind_of(a)]
        x[i, 9] = a == ctx.tx_from
        x[i, 10] = ctx.tx_to is not None and a == ctx.tx_to
        x[i, 13] = n_transfers

    edges = np.array(list(edge_set), dtype=np.int64).reshape(-1, 2)
    return FeatureGraph(graph.tx.hash, nodes, edges, x)


def scale_features(fg: FeatureGraph, scheme: str) -> FeatureGraph:
    if scheme not in SCHEMES:
        raise FeatureError(f"unknown scaling scheme {scheme!r}; expected one of {SCHEMES}")
    if scheme == "none":
        return fg
    x = fg.x.copy()
    cols = list(COUNT_COLUMNS)
    x[:, cols] = np.log1p(x[:, cols])
    return replace(fg, x=x, scheme=scheme)


def mask_feature_group(fg: FeatureGraph, group: str) -> FeatureGraph:
    if group not in FEATURE_GROUPS:
        raise FeatureError(f"unknown feature group {group!r}; expected one of {tuple(FEATURE_GROUPS)}")
    x = fg.x.copy()
    x[:, list(FEATURE_GROUPS[group])] = 0.0
    masked = fg.masked if group in fg.masked else fg.masked + (group,)
    return replace(fg, x=x, masked=masked)


# -- dataset files ----------------------------------------------------------

def graph_to_json(fg: FeatureGraph) -> dict:
    return {
        "tx": fg.tx,
        "nodes": fg.n_nodes,
        "edges": fg.edges.tolist(),
        "x": fg.x.tolist(),
        "y": fg.label,
    }


def graph_from_json(obj: dict) -> FeatureGraph:
    x = np.array(obj["x"], dtype=np.float64).reshape(-1, N_FEATURES)
    if x.shape[0] != obj["nodes"]:
        raise FeatureError(f"{obj['tx']}: 'nodes' says {obj['nodes']} but x has {x.shape[0]} rows")
    edges = np.array(obj["edges"], dtype=np.int64).reshape(-1, 2)
    if len(edges) and (edges.min() < 0 or edges.max() >= x.shape[0]):
        raise FeatureError(f"{obj['tx']}: edge endpoint out of range")
    return FeatureGraph(obj["tx"], (), edges, x, obj.get("y"))


def write_dataset(graphs: Iterable[FeatureGraph], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for fg in graphs:
            fh.write(json.dumps(graph_to_json(fg), separators=(",", ":")) + "\n")


def iter_dataset(path: str | Path) -> Iterator[FeatureGraph]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                try:
                    yield graph_from_json(json.loads(line))
                except (KeyError, ValueError) as exc:
                    raise FeatureError(f"{path}:{lineno}: {exc}") from None


def read_dataset(path: str | Path) -> list[FeatureGraph]:
    return list(iter_dataset(path))

