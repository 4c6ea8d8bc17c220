"""Transfer-only MEV heuristics: sandwich pairing and NFT arbitrage."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

from .chain import NULL_ADDRESS, Address, Block, Transaction, TxRef, decode_transfers
from .flowgraph import build_graph, graph_from_transfers, taker_profits

# How the front-run loss condition is read:
#   "exists_negative": reject unless some token has a strictly negative net
#   "all_negative":    reject if any token has a non-negative net (literal reading)
FRONT_MODES = ("exists_negative", "all_negative")
# How the back-run zero condition is read:
#   "any_zero": reject if any token nets to exactly zero (literal reading)
#   "all_zero": reject only if every token nets to zero
BACK_MODES = ("any_zero", "all_zero")


@dataclass(frozen=True)
class SandwichConfig:
    front_mode: str = "exists_negative"
    back_mode: str = "any_zero"
    require_victim: bool = False
    recipient_only: bool = False

    def __post_init__(self) -> None:
        if self.front_mode not in FRONT_MODES:
            raise ValueError(f"front_mode must be one of {FRONT_MODES}")
        if self.back_mode not in BACK_MODES:
            raise ValueError(f"back_mode must be one of {BACK_MODES}")


@dataclass(frozen=True)
class SandwichPair:
    front: TxRef
    back: TxRef
    per_token_total: dict
    shared_recipient: Address

    def to_json(self) -> dict:
        return {
            "block": self.front.block_number,
            "front": self.front.hash,
            "back": self.back.hash,
            "front_index": self.front.tx_index,
            "back_index": self.back.tx_index,
            "recipient": self.shared_recipient,
            "total": dict(self.per_token_total),
        }


def front_ok(p: Mapping[Address, int], mode: str = "exists_negative") -> bool:
    if len(p) <= 1:
        return False
    if mode == "exists_negative":
        return any(v < 0 for v in p.values())
    return all(v < 0 for v in p.values())


def back_ok(p: Mapping[Address, int], mode: str = "any_zero") -> bool:
    if len(p) <= 1:
        return False
    if mode == "any_zero":
        return all(v != 0 for v in p.values())
    return any(v != 0 for v in p.values())


def pair_total(p_front: Mapping[Address, int], p_back: Mapping[Address, int]) -> Optional[dict]:
    """Summed profits if the key sets match and no token ends negative, else None."""
    if p_front.keys() != p_back.keys():
        return None
    total = {token: p_front[token] + p_back[token] for token in p_front}
    if any(v < 0 for v in total.values()):
        return None
    return total


def check_pair(p_front: Mapping[Address, int], p_back: Mapping[Address, int],
               config: SandwichConfig = SandwichConfig()) -> Optional[dict]:
    """Apply all five pair filters; returns the per-token totals when accepted."""
    if not front_ok(p_front, config.front_mode) or not back_ok(p_back, config.back_mode):
        return None
    return pair_total(p_front, p_back)


def detect_sandwiches(block: Block, config: SandwichConfig = SandwichConfig(),
                      taker: Optional[dict] = None) -> list[SandwichPair]:
    """Pair front/back-runs sharing a recipient contract within one block.

    Each transaction joins at most one pair; for every unmatched front
    candidate (ascending) the nearest following unmatched partner wins.
    ``taker`` optionally supplies precomputed taker profits keyed by tx hash.
    """
    txs = block.transactions
    profit_of: list[Optional[dict]] = []
    for tx in txs:
        if tx.to is None or tx.to == NULL_ADDRESS:
            profit_of.append(None)
        elif taker is not None:
            profit_of.append(taker[tx.hash])
        else:
            profit_of.append(taker_profits(tx, build_graph(tx), recipient_only=config.recipient_only))

    # bucket by (recipient, token key set): c8 demands identical key sets
    buckets: dict[tuple, list[int]] = {}
    for i, p in enumerate(profit_of):
        if p is not None and len(p) > 1:
            buckets.setdefault((txs[i].to, frozenset(p)), []).append(i)

    matched = [False] * len(txs)
    pairs: list[tuple[int, int, dict]] = []
    for members in buckets.values():
        if len(members) < 2:
            continue
        backs = [j for j in members if back_ok(profit_of[j], config.back_mode)]
        for i in members:
            if matched[i] or not front_ok(profit_of[i], config.front_mode):
                continue
            for j in backs:
                if j <= i or matched[j]:
                    continue
                if config.require_victim and j == i + 1:
                    continue
                total = pair_total(profit_of[i], profit_of[j])
                if total is not None:
                    matched[i] = matched[j] = True
                    pairs.append((i, j, total))
                    break
    pairs.sort()
    return [
        SandwichPair(txs[i].ref, txs[j].ref, total, txs[i].to)
        for i, j, total in pairs
    ]


@dataclass(frozen=True)
class NftArbReport:
    tx: TxRef
    collection: Address
    token_id: int
    seller: Address
    taker: Address
    buyer: Address
    pay_token: Address
    paid: int
    received: int

    @property
    def margin(self) -> int:
        return self.received - self.paid

    def to_json(self) -> dict:
        return {
            "block": self.tx.block_number,
            "tx": self.tx.hash,
            "collection": self.collection,
            "token_id": self.token_id,
            "seller": self.seller,
            "taker": self.taker,
            "buyer": self.buyer,
            "pay_token": self.pay_token,
            "paid": self.paid,
            "received": self.received,
        }


def detect_nft_arbitrage(tx: Transaction) -> Optional[NftArbReport]:
    """Find an NFT bought from one party and resold to another at a profit."""
    tokens, nfts = decode_transfers(tx)
    by_id: dict[tuple, list] = {}
    for t in nfts:
        by_id.setdefault((t.collection, t.token_id), []).append(t)

    for (collection, token_id), moves in by_id.items():
        if len(moves) != 2:
            continue
        first, second = moves
        if first.recipient == second.sender:
            seller, taker, buyer = first.sender, first.recipient, second.recipient
        elif first.sender == second.recipient:
            seller, taker, buyer = second.sender, second.recipient, first.recipient
        else:
            continue
        if tx.sender in (seller, buyer):
            return None
        paid = received = None
        for t in tokens:
            if t.sender == taker and t.recipient == seller:
                paid = (t.amount, t.token)
            if t.sender == buyer and t.recipient == taker:
                received = (t.amount, t.token)
        if paid and received and paid[1] == received[1] and paid[0] < received[0]:
            return NftArbReport(tx.ref, collection, token_id, seller, taker, buyer,
                                paid[1], paid[0], received[0])
    return None


def block_taker_profits(block: Block, recipient_only: bool = False) -> dict[str, dict]:
    out = {}
    for tx in block.transactions:
        transfers, _ = decode_transfers(tx)
        out[tx.hash] = taker_profits(tx, graph_from_transfers(tx.ref, transfers), recipient_only)
    return out
