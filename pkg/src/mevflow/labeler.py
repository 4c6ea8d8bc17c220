"""Registry-driven MEV labels (S1/S2, A1-A5) and train/test dataset construction.

Arbitrage rules, tried in order A1, A2, A3 and then A4:

* profit gate: the taker scope nets > 0 in some token and < 0 in none.
* A1: a walk along transfer edges leaves the scope, changes token at least
  once and comes back into the scope holding the token it started with.
  Consecutive edges must meet (dst of one is src of the next). If the token
  changes at that meeting node, the node must be an exchange contract
  recognised by the registry.
* A2: the same walk may also hop across the null address when a token's own
  contract is the exchange: a burn of token C into the null address followed
  by an edge out of contract C, or an edge into C followed by a mint of C.
* A3: the scope sends a token to the null address or to an exchange
  contract, and that contract pays the scope at least two other tokens.
* A4: an outside address that, for some token, sends less than it receives
  is merged into the scope and A1-A3 are tried again.

Exchange contracts paying two or more distinct tokens to one receiver are
redemptions; they count for A3 only, never as a walk junction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from random import Random
from typing import Iterable, Mapping, Optional, Sequence

from .chain import NULL_ADDRESS, Address, Block, Transaction, TxRef
from .errors import DatasetError, DecodeError
from .features import FeatureContext, extract_features
from .flowgraph import Edge, TransferGraph, build_graph, profits, scope_profits, taker_scope
from .heuristics import SandwichConfig, detect_nft_arbitrage, detect_sandwiches
from .ingest import AddressKindMap
from .registry import ExchangeAction, ExchangeRegistry, identify_exchanges

log = logging.getLogger(__name__)

CATEGORIES = ("S1", "S2", "A1", "A2", "A3", "A4", "A5")
ARBITRAGE = ("A1", "A2", "A3", "A4")
MAX_WALK = 16
WALK_BUDGET = 50_000


@dataclass(frozen=True)
class MevLabel:
    txs: tuple[TxRef, ...]
    category: str
    takers: tuple[Address, ...]
    profit: dict
    contracts: tuple[Address, ...] = ()

    def __post_init__(self) -> None:
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        want = 2 if self.category.startswith("S") else 1
        if len(self.txs) != want:
            raise ValueError(f"{self.category} labels reference {want} transaction(s), got {len(self.txs)}")

    @property
    def block(self) -> int:
        return self.txs[0].block_number

    def to_json(self) -> dict:
        return {
            "tx": self.txs[0].hash if len(self.txs) == 1 else [t.hash for t in self.txs],
            "category": self.category,
            "block": self.block,
            "takers": list(self.takers),
            "profit": {k: self.profit[k] for k in sorted(self.profit)},
            "contracts": list(self.contracts),
        }


def profit_gate(p: Mapping[Address, int]) -> bool:
    return any(v > 0 for v in p.values()) and not any(v < 0 for v in p.values())


def _redeemers(graph: TransferGraph, exchanges: frozenset) -> frozenset:
    paid: dict[tuple, set] = {}
    for e in graph.edges:
        if e.src in exchanges:
            paid.setdefault((e.src, e.dst), set()).add(e.token)
    return frozenset(src for (src, _), tokens in paid.items() if len(tokens) >= 2)


class _Walker:
    """Bounded depth-first search for a profitable token loop."""

    def __init__(self, graph: TransferGraph, junctions: frozenset, bridges: frozenset):
        self.edges = graph.edges
        self.junctions = junctions
        self.bridges = bridges
        self.out: dict[Address, list[int]] = {}
        for i, e in enumerate(self.edges):
            self.out.setdefault(e.src, []).append(i)
        self.budget = WALK_BUDGET

    def _next(self, e: Edge, allow_bridges: bool):
        for j in self.out.get(e.dst, ()):
            f = self.edges[j]
            if f.token == e.token or e.dst in self.junctions:
                yield j, False
        if not allow_bridges:
            return
        if e.dst == NULL_ADDRESS and e.token in self.bridges:
            # burn of a token whose own contract pays out something else
            for j in self.out.get(e.token, ()):
                yield j, True
        elif e.dst in self.bridges:
            # payment into a contract that mints its own token in return
            for j in self.out.get(NULL_ADDRESS, ()):
                if self.edges[j].token == e.dst:
                    yield j, True

    def find(self, scope: frozenset, allow_bridges: bool) -> Optional[list[int]]:
        self.budget = WALK_BUDGET
        for i, e in enumerate(self.edges):
            if e.src in scope and e.dst not in scope:
                found = self._dfs([i], {i}, e.token, False, False, scope, allow_bridges)
                if found:
                    return found
        return None

    def _dfs(self, path, used, start_token, changed, bridged, scope, allow_bridges):
        self.budget -= 1
        if self.budget < 0 or len(path) > MAX_WALK:
            return None
        e = self.edges[path[-1]]
        for j, bridge in self._next(e, allow_bridges):
            if j in used:
                continue
            f = self.edges[j]
            now_changed = changed or f.token != e.token
            now_bridged = bridged or bridge
            if f.dst in scope and f.token == start_token and now_changed and (now_bridged or not allow_bridges):
                return path + [j]
            used.add(j)
            found = self._dfs(path + [j], used, start_token, now_changed, now_bridged, scope, allow_bridges)
            used.discard(j)
            if found:
                return found
        return None


def _redemption(graph: TransferGraph, scope: frozenset, exchanges: frozenset) -> Optional[Address]:
    """Exchange contract that turned scope tokens into >= 2 other tokens paid to the scope."""
    burned = {e.token for e in graph.edges if e.src in scope and e.dst == NULL_ADDRESS}
    for issuer in sorted(exchanges):
        given = burned | {e.token for e in graph.edges if e.src in scope and e.dst == issuer}
        if not given:
            continue
        returned = {e.token for e in graph.edges if e.src == issuer and e.dst in scope}
        if len(returned - given) >= 2:
            return issuer
    return None


def _secondary_candidates(graph: TransferGraph, net, scope: frozenset, exchanges: frozenset) -> list[Address]:
    sent: dict[tuple, int] = {}
    for e in graph.edges:
        sent[(e.src, e.token)] = sent.get((e.src, e.token), 0) + e.amount
    out = []
    for (address, token), amount in sent.items():
        if address in scope or address == NULL_ADDRESS or address in exchanges:
            continue
        if amount > 0 and net[address][token] > 0:
            out.append(address)
    return sorted(set(out))


def _contracts_used(graph: TransferGraph, path: Optional[list[int]], exchanges: frozenset) -> tuple:
    if not path:
        return ()
    used: dict[Address, None] = {}
    for i in path:
        e = graph.edges[i]
        for node in (e.src, e.dst):
            if node in exchanges:
                used.setdefault(node)
    return tuple(used)


def _try_scope(graph, net, scope, walker, exchanges, redeemers):
    p = scope_profits(net, scope)
    if not profit_gate(p):
        return None
    path = walker["plain"].find(scope, False)
    if path:
        return "A1", p, _contracts_used(graph, path, exchanges)
    path = walker["bridged"].find(scope, True)
    if path:
        return "A2", p, _contracts_used(graph, path, exchanges)
    issuer = _redemption(graph, scope, redeemers)
    if issuer is not None:
        return "A3", p, (issuer,)
    return None


def classify_arbitrage(tx: Transaction, graph: TransferGraph,
                       actions: Sequence[ExchangeAction]) -> Optional[MevLabel]:
    if not graph.edges:
        return None
    exchanges = frozenset(a.contract for a in actions)
    redeemers = _redeemers(graph, exchanges)
    junctions = exchanges - redeemers
    bridges = frozenset(c for c in junctions if c != NULL_ADDRESS)
    walker = {
        "plain": _Walker(graph, junctions, frozenset()),
        "bridged": _Walker(graph, junctions, bridges),
    }
    net = profits(graph)
    scope = frozenset(taker_scope(tx))

    hit = _try_scope(graph, net, scope, walker, exchanges, redeemers)
    if hit:
        category, p, contracts = hit
        return MevLabel((tx.ref,), category, tuple(sorted(scope)), p, contracts)
    for extra in _secondary_candidates(graph, net, scope, exchanges):
        merged = scope | {extra}
        hit = _try_scope(graph, net, merged, walker, exchanges, redeemers)
        if hit:
            _, p, contracts = hit
            return MevLabel((tx.ref,), "A4", tuple(sorted(merged)), p, contracts)
    return None


def classify_sandwiches(block: Block, registry: ExchangeRegistry,
                        config: SandwichConfig = SandwichConfig()) -> list[MevLabel]:
    by_hash = {tx.hash: tx for tx in block.transactions}
    labels = []
    for pair in detect_sandwiches(block, config):
        front = identify_exchanges(by_hash[pair.front.hash], registry)
        back = identify_exchanges(by_hash[pair.back.hash], registry)
        if not front or not back:
            continue
        contracts = tuple(dict.fromkeys(a.contract for a in front + back))
        category = "S1" if len(contracts) == 1 else "S2"
        labels.append(MevLabel((pair.front, pair.back), category, (pair.shared_recipient,),
                               dict(pair.per_token_total), contracts))
    return labels


def label_block(block: Block, registry: ExchangeRegistry,
                config: SandwichConfig = SandwichConfig()) -> list[MevLabel]:
    """All labels for one block. Sandwich legs are not also labelled as arbitrage."""
    labels = classify_sandwiches(block, registry, config)
    in_sandwich = {t.hash for label in labels for t in label.txs}
    for tx in block.transactions:
        if tx.hash in in_sandwich:
            continue
        try:
            graph = build_graph(tx)
            nft = detect_nft_arbitrage(tx)
        except DecodeError as exc:
            log.warning("skipping %s: %s", tx.hash, exc)
            continue
        label = classify_arbitrage(tx, graph, identify_exchanges(tx, registry))
        if label is None and nft is not None:
            label = MevLabel((tx.ref,), "A5", (nft.taker,), {nft.pay_token: nft.margin}, ())
        if label is not None:
            labels.append(label)
    labels.sort(key=lambda l: (l.txs[0].tx_index, l.category))
    return labels


def label_corpus(blocks: Iterable[Block], registry: ExchangeRegistry,
                 config: SandwichConfig = SandwichConfig()) -> list[MevLabel]:
    out = []
    for block in blocks:
        out.extend(label_block(block, registry, config))
    return out


# -- datasets ---------------------------------------------------------------

@dataclass(frozen=True)
class DatasetConfig:
    seed: int = 0
    min_transfers: int = 2
    train_range: tuple[int, int] = (0, 0)  # inclusive block numbers
    test_range: tuple[int, int] = (0, 0)
    val_range: Optional[tuple[int, int]] = None

    def __post_init__(self) -> None:
        ranges = [self.train_range, self.test_range] + ([self.val_range] if self.val_range else [])
        for lo, hi in ranges:
            if lo > hi:
                raise DatasetError(f"empty block range ({lo}, {hi})")
        for i, a in enumerate(ranges):
            for b in ranges[i + 1:]:
                if a[0] <= b[1] and b[0] <= a[1]:
                    raise DatasetError(f"block ranges {a} and {b} overlap")


@dataclass(frozen=True)
class LabeledDataset:
    train: list
    test: list
    val: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)


def _in(rng: Optional[tuple[int, int]], n: int) -> bool:
    return rng is not None and rng[0] <= n <= rng[1]


def transaction_graphs(blocks: Iterable[Block], registry: ExchangeRegistry, kinds: AddressKindMap,
                       keep=lambda block: True):
    """Yield (tx, n_transfers, FeatureGraph, category or None) for every decodable tx."""
    for block in blocks:
        if not keep(block):
            continue
        categories = {}
        for label in label_block(block, registry):
            for ref in label.txs:
                categories[ref.hash] = label.category
        for tx in block.transactions:
            try:
                graph = build_graph(tx)
            except DecodeError:
                continue
            ctx = FeatureContext(block.fee_recipient, tx.sender, tx.to, kinds)
            yield tx, len(graph.edges), extract_features(graph, ctx), categories.get(tx.hash)


def build_dataset(blocks: Iterable[Block], registry: ExchangeRegistry, cfg: DatasetConfig,
                  kinds: Optional[AddressKindMap] = None) -> LabeledDataset:
    """Balanced training set plus naturally imbalanced test (and optional validation) sets.

    Positives are A1-A4 labels. NFT arbitrage (A5) is left out of both classes
    because its ERC-721 legs are not part of the feature graph.
    """
    kinds = kinds if kinds is not None else AddressKindMap()
    positives, candidates = [], []
    held_out = {"test": [], "val": []}
    keep = lambda b: _in(cfg.train_range, b.number) or _in(cfg.test_range, b.number) or _in(cfg.val_range, b.number)
    for tx, n_transfers, fg, category in transaction_graphs(blocks, registry, kinds, keep):
        if category == "A5" or n_transfers == 0:
            continue
        positive = category in ARBITRAGE
        if _in(cfg.train_range, tx.block_number):
            if positive:
                positives.append(fg.with_label(1))
            elif n_transfers >= cfg.min_transfers:
                candidates.append(fg.with_label(0))
        else:
            split = "test" if _in(cfg.test_range, tx.block_number) else "val"
            held_out[split].append(fg.with_label(int(positive)))

    if not positives:
        raise DatasetError("no arbitrage transactions in the training range")
    if len(candidates) < len(positives):
        raise DatasetError(
            f"only {len(candidates)} negatives with >= {cfg.min_transfers} transfers "
            f"for {len(positives)} positives"
        )
    picks = sorted(Random(cfg.seed).sample(range(len(candidates)), len(positives)))
    return LabeledDataset(
        train=positives + [candidates[i] for i in picks],
        test=held_out["test"],
        val=held_out["val"],
        provenance={
            "seed": cfg.seed,
            "min_transfers": cfg.min_transfers,
            "train_range": list(cfg.train_range),
            "test_range": list(cfg.test_range),
            "val_range": list(cfg.val_range) if cfg.val_range else None,
            "train_positives": len(positives),
            "train_candidates": len(candidates),
        },
    )
