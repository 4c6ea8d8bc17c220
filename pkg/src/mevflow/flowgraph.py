"""Per-transaction token transfer graphs and exact per-address profit netting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .chain import Address, TokenTransfer, Transaction, TxRef, decode_transfers

ProfitMap = dict[Address, dict[Address, int]]


class Edge(NamedTuple):
    src: Address
    dst: Address
    token: Address
    amount: int
    log_index: int


@dataclass(frozen=True)
class TransferGraph:
    tx: TxRef
    nodes: tuple[Address, ...]  # first-appearance order
    edges: tuple[Edge, ...]  # log order
    tokens: tuple[Address, ...]  # first-appearance order

    def __len__(self) -> int:
        return len(self.edges)


def graph_from_transfers(ref: TxRef, transfers: Iterable[TokenTransfer]) -> TransferGraph:
    nodes: dict[Address, None] = {}
    tokens: dict[Address, None] = {}
    edges = []
    for t in transfers:
        nodes.setdefault(t.sender)
        nodes.setdefault(t.recipient)
        tokens.setdefault(t.token)
        edges.append(Edge(t.sender, t.recipient, t.token, t.amount, t.log_index))
    return TransferGraph(ref, tuple(nodes), tuple(edges), tuple(tokens))


def build_graph(tx: Transaction) -> TransferGraph:
    transfers, _ = decode_transfers(tx)
    return graph_from_transfers(tx.ref, transfers)


def profits(graph: TransferGraph) -> ProfitMap:
    """Net received-minus-sent amount per address and token.

    Entries that net to exactly zero stay in the map: the sandwich filter has
    to see them.
    """
    net: ProfitMap = {}
    for src, dst, token, amount, _ in graph.edges:
        row = net.setdefault(src, {})
        row[token] = row.get(token, 0) - amount
        row = net.setdefault(dst, {})
        row[token] = row.get(token, 0) + amount
    return net


def scope_profits(net: ProfitMap, scope: Iterable[Address]) -> dict[Address, int]:
    total: dict[Address, int] = {}
    for address in dict.fromkeys(scope):
        for token, amount in net.get(address, {}).items():
            total[token] = total.get(token, 0) + amount
    return total


def taker_scope(tx: Transaction, recipient_only: bool = False) -> tuple[Address, ...]:
    if recipient_only:
        return (tx.to,) if tx.to is not None else (tx.sender,)
    if tx.to is None or tx.to == tx.sender:
        return (tx.sender,)
    return (tx.sender, tx.to)


def taker_profits(tx: Transaction, graph: TransferGraph, recipient_only: bool = False,
                  net: ProfitMap | None = None) -> dict[Address, int]:
    """Combined profit of the transaction sender and recipient.

    With ``recipient_only`` only the ``to`` address is counted (sensitivity mode).
    """
    if net is None:
        net = profits(graph)
    return scope_profits(net, taker_scope(tx, recipient_only))
