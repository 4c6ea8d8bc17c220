"""Deterministic synthetic blocks with planted MEV patterns and exact ground truth.

The world (tokens, pools, wrappers, set-token issuers, actors) is fixed and
uses addresses under the reserved prefix ``0x5eed``. Corpora only vary in
which patterns are planted where, driven by ``random.Random(seed)``.

Benign swaps are priced off integer token values with a fee, so a benign
transaction never gains value. Every planted pattern is re-checked with the
real detectors and classifiers before it is accepted.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from random import Random
from typing import Optional, Sequence

from .chain import (NULL_ADDRESS, Address, Block, Log, Transaction, address_topic, erc20_transfer_log,
                    erc721_transfer_log)
from .errors import GenerationError
from .flowgraph import build_graph, profits, scope_profits, taker_profits
from .heuristics import check_pair, detect_nft_arbitrage
from .ingest import AddressKind, AddressKindMap, Corpus, CorpusHeader, dumps_line, save_corpus, save_kinds
from .labeler import MevLabel, classify_arbitrage, label_block
from .registry import ExchangeRegistry, RegistryEntry, identify_exchanges, save_registry

PREFIX = "5eed"

SWAP_V2_TOPIC = bytes.fromhex("d78ad95fa46c994b6551d0da85fc275fe613ce37657fb8d5e3d130840159d822")
SWAP_V3_TOPIC = bytes.fromhex("c42079f94a6350d7e6235f29174924f928cc2ac818eb64fed8004e115fbcca67")
SET_REDEEMED_TOPIC = bytes.fromhex("63d9b9cb88c8c452b7a998318378581598437c0d502acb0f60cb2ba2d09207eb")
MINT_TOPIC = bytes.fromhex("4c209b5fc8ad50758f13e2e1088ba56a560dff690a1c6fef26394f4c03821c4f")
BURN_TOPIC = bytes.fromhex("dccd412f0b1252819cb1fd330b93224ca42612892bb3f4f789976e6d81936496")

SEL_ENTER = "0xa59f3e0c"
SEL_LEAVE = "0x67dfd4c9"
SEL_TRANSFER = "0xa9059cbb"
SEL_SWAP_ROUTER = "0x38ed1739"
SEL_ADD_LIQUIDITY = "0xe8e33700"
SEL_REMOVE_LIQUIDITY = "0xbaa2abde"
SEL_POOL_SWAP = "0x022c0d9f"
SEL_EXECUTE = "0x09c5eabe"
SEL_DISPERSE = "0xc87b1ae3"
SEL_NFT_TRANSFER = "0x42842e0e"

DEX_NAMES = ("SynthSwap V2", "SynthSwap V3")
DEX_TOPICS = (SWAP_V2_TOPIC, SWAP_V3_TOPIC)

# value per unit of each base token; token 0 plays WETH
BASE_PRICES = (1000, 37, 250, 4, 90, 1200, 3, 17)
WRAPPED = (6, 7)
SET_COMPONENTS = ((1, 2, 0), (3, 4, 0))
LP_PRICE = 1
FEE_BPS = 30

N_USERS = 2000
N_BOTS = 512
N_BUILDERS = 8
N_ROUTERS = 4
N_VAULTS = 64
N_DISTRIBUTORS = 8
N_RELAYS = 16
N_COLLECTIONS = 8

MEV_CATEGORIES = ("S1", "S2", "A1", "A2", "A3", "A4", "A5")
NEGATIVE_CATEGORIES = (
    "BENIGN-swap", "BENIGN-transfer", "BENIGN-multihop", "BENIGN-liquidity",
    "BENIGN-airdrop", "BENIGN-relay", "A5-selftrade",
)
CATEGORIES = MEV_CATEGORIES + NEGATIVE_CATEGORIES
DEFAULT_MEV_MIX = {c: 1.0 for c in MEV_CATEGORIES}
DEFAULT_BENIGN_MIX = {
    "BENIGN-swap": 0.35,
    "BENIGN-transfer": 0.15,
    "BENIGN-multihop": 0.15,
    "BENIGN-liquidity": 0.1,
    "BENIGN-airdrop": 0.05,
    "BENIGN-relay": 0.2,
}

TIP_PROBABILITY = 0.5


def _addr(code: int, index: int) -> Address:
    return Address(f"0x{PREFIX}{code:04x}{index:032x}")


@dataclass(frozen=True)
class Pool:
    address: Address
    dex: int
    token0: Address
    token1: Address


class World:
    """The fixed cast of contracts and accounts every corpus draws from."""

    def __init__(self) -> None:
        self.tokens = [_addr(1, i) for i in range(len(BASE_PRICES))]
        self.weth = self.tokens[0]
        self.price: dict[Address, int] = dict(zip(self.tokens, BASE_PRICES))

        self.wrappers = []  # (wrapper contract == wrapper token, underlying)
        for i, base in enumerate(WRAPPED):
            w = _addr(3, i)
            self.wrappers.append((w, self.tokens[base]))
            self.price[w] = BASE_PRICES[base]
        self.sets = []  # (issuer contract == set token, component tokens)
        for i, comps in enumerate(SET_COMPONENTS):
            s = _addr(4, i)
            self.sets.append((s, tuple(self.tokens[c] for c in comps)))
            self.price[s] = sum(BASE_PRICES[c] for c in comps)

        self.pools: dict[tuple, Pool] = {}
        n = 0
        for dex in (0, 1):
            for i in range(len(self.tokens)):
                for j in range(i + 1, len(self.tokens)):
                    self._add_pool(dex, self.tokens[i], self.tokens[j], n)
                    n += 1
        for token in [w for w, _ in self.wrappers] + [s for s, _ in self.sets]:
            self._add_pool(0, self.weth, token, n)
            n += 1
        for pool in self.pools.values():
            self.price[pool.address] = LP_PRICE

        # unregistered look-alike pools used by relay traffic
        self.relay_pools: dict[tuple, Address] = {}
        n = 0
        for a in self.tokens:
            for b in self.tokens:
                if a != b:
                    self.relay_pools[(a, b)] = _addr(5, n)
                    n += 1

        self.routers = [_addr(6, i) for i in range(N_ROUTERS)]
        self.bots = [_addr(7, i) for i in range(N_BOTS)]
        self.owners = [_addr(8, i) for i in range(N_BOTS)]
        self.users = [_addr(9, i) for i in range(N_USERS)]
        self.builders = [_addr(10, i) for i in range(N_BUILDERS)]
        self.collections = [_addr(11, i) for i in range(N_COLLECTIONS)]
        self.vaults = [_addr(12, i) for i in range(N_VAULTS)]
        self.distributors = [_addr(13, i) for i in range(N_DISTRIBUTORS)]
        self.relays = [_addr(14, i) for i in range(N_RELAYS)]
        self.secondaries = [_addr(15, i) for i in range(N_BOTS)]

        self.registry = self._build_registry()
        self.kinds = self._build_kinds()

    def _add_pool(self, dex: int, a: Address, b: Address, n: int) -> None:
        t0, t1 = sorted((a, b))
        self.pools[(dex, t0, t1)] = Pool(_addr(2, n), dex, t0, t1)

    def pool(self, dex: int, a: Address, b: Address) -> Pool:
        t0, t1 = sorted((a, b))
        return self.pools[(dex, t0, t1)]

    def _build_registry(self) -> ExchangeRegistry:
        entries = []
        for pool in sorted(self.pools.values(), key=lambda p: p.address):
            entries.append(RegistryEntry(DEX_NAMES[pool.dex], pool.address, "event", DEX_TOPICS[pool.dex], "Swap"))
        for i, (w, _) in enumerate(self.wrappers):
            for name, sel in (("enter", SEL_ENTER), ("leave", SEL_LEAVE)):
                entries.append(RegistryEntry(f"SynthStake {i}", w, "function", bytes.fromhex(sel[2:]), name))
        for i, (s, _) in enumerate(self.sets):
            entries.append(RegistryEntry(f"SynthIndex {i}", s, "event", SET_REDEEMED_TOPIC, "SetTokenRedeemed"))
        return ExchangeRegistry(tuple(entries))

    def _build_kinds(self) -> AddressKindMap:
        kinds = AddressKindMap()
        eoas = self.owners + self.users + self.builders + self.secondaries
        contracts = (self.tokens + [w for w, _ in self.wrappers] + [s for s, _ in self.sets]
                     + [p.address for p in self.pools.values()] + list(self.relay_pools.values())
                     + self.routers + self.bots + self.collections + self.vaults
                     + self.distributors + self.relays)
        for a in eoas:
            kinds[a] = AddressKind.EOA
        for a in contracts:
            kinds[a] = AddressKind.CA
        return kinds

    def benign_out(self, rng: Random, token_in: Address, amount: int, token_out: Address) -> int:
        """Output of a fee-paying swap; always worth strictly less than the input."""
        bps = 10_000 - FEE_BPS - rng.randint(0, 20)
        out = amount * self.price[token_in] * bps // (self.price[token_out] * 10_000)
        if out <= 0:
            raise GenerationError(f"swap of {amount} produced no output")
        return out


_WORLD: Optional[World] = None


def world() -> World:
    global _WORLD
    if _WORLD is None:
        _WORLD = World()
    return _WORLD


# -- transaction drafts -----------------------------------------------------

def _word(value: int) -> bytes:
    return (value % (1 << 256)).to_bytes(32, "big")


@dataclass
class Draft:
    sender: Address
    to: Optional[Address]
    selector: Optional[str]
    items: list = field(default_factory=list)
    trace: Optional[list] = None
    actions: list = field(default_factory=list)  # exchange contracts in order of use

    def transfer(self, token: Address, src: Address, dst: Address, amount: int) -> None:
        if amount <= 0:
            raise GenerationError(f"non-positive transfer amount {amount}")
        self.items.append(("erc20", token, src, dst, amount))

    def nft(self, collection: Address, src: Address, dst: Address, token_id: int) -> None:
        self.items.append(("erc721", collection, src, dst, token_id))

    def event(self, address: Address, topics: Sequence[bytes], data: bytes) -> None:
        self.items.append(("log", address, tuple(topics), data))

    def call(self, contract: Address, selector: str) -> None:
        if self.trace is None:
            self.trace = []
        self.trace.append((contract, selector))

    def use(self, contract: Address) -> None:
        if contract not in self.actions:
            self.actions.append(contract)

    def finalize(self, number: int, index: int, tx_hash: str, log_start: int) -> Transaction:
        logs = []
        for i, item in enumerate(self.items):
            li = log_start + i
            if item[0] == "erc20":
                logs.append(erc20_transfer_log(item[1], item[2], item[3], item[4], li))
            elif item[0] == "erc721":
                logs.append(erc721_transfer_log(item[1], item[2], item[3], item[4], li))
            else:
                logs.append(Log(item[1], item[2], item[3], li))
        return Transaction(
            hash=tx_hash, sender=self.sender, to=self.to, input_selector=self.selector,
            block_number=number, tx_index=index, logs=tuple(logs),
            trace_calls=None if self.trace is None else tuple(self.trace),
        )


def swap(d: Draft, pool: Pool, payer: Optional[Address], recipient: Address,
         token_in: Address, amount_in: int, token_out: Address, amount_out: int) -> None:
    """Emit the input leg (unless already paid, ``payer=None``), the output leg and a Swap event."""
    if {token_in, token_out} != {pool.token0, pool.token1}:
        raise GenerationError("swap tokens do not match the pool")
    if payer is not None:
        d.transfer(token_in, payer, pool.address, amount_in)
    d.transfer(token_out, pool.address, recipient, amount_out)
    in0 = token_in == pool.token0
    if pool.dex == 0:
        data = b"".join(_word(v) for v in (
            amount_in if in0 else 0, 0 if in0 else amount_in,
            0 if in0 else amount_out, amount_out if in0 else 0,
        ))
    else:
        a0 = amount_in if in0 else -amount_out
        a1 = -amount_out if in0 else amount_in
        data = b"".join(_word(v) for v in (a0, a1, 1 << 96, 10 ** 18, 0))
    d.event(pool.address, (DEX_TOPICS[pool.dex], address_topic(d.to or d.sender), address_topic(recipient)), data)
    d.use(pool.address)


# -- planted patterns -------------------------------------------------------

@dataclass
class Unit:
    """One pattern instance: drafts placed contiguously plus what they should be labelled."""

    category: str
    drafts: list
    positive: tuple = ()  # indices into drafts forming the labelled transaction(s)
    takers: tuple = ()
    contracts: tuple = ()
    nft: bool = False


class _Ctx:
    def __init__(self, w: World, rng: Random, builder: Address, bot_ids: list[int]):
        self.w = w
        self.rng = rng
        self.builder = builder
        self._bots = list(bot_ids)

    def take_bot(self) -> int:
        if not self._bots:
            raise GenerationError("ran out of distinct bots for this block")
        return self._bots.pop()

    def user(self) -> Address:
        return self.rng.choice(self.w.users)

    def amount(self, lo: int = 10, hi: int = 5000, scale: int = 10 ** 15) -> int:
        return self.rng.randint(lo, hi) * scale

    def other_token(self, *exclude: Address) -> Address:
        choices = [t for t in self.w.tokens if t not in exclude]
        return self.rng.choice(choices)

    def maybe_tip(self, d: Draft, payer: Address, token: Address, budget: int) -> int:
        if budget > 1 and self.rng.random() < TIP_PROBABILITY:
            tip = self.rng.randint(1, budget - 1)
            d.transfer(token, payer, self.builder, tip)
            return tip
        return 0


@dataclass(frozen=True)
class PatternSpec:
    category: str
    margin: Optional[int] = None
    variant: Optional[str] = None
    paid: Optional[int] = None  # NFT patterns
    received: Optional[int] = None
    token_id: Optional[int] = None

    def __post_init__(self) -> None:
        if self.category not in CATEGORIES:
            raise GenerationError(f"unknown pattern category {self.category!r}")
        if self.margin is not None and self.margin <= 0:
            raise GenerationError("margin must be positive")
        if (self.paid is None) != (self.received is None):
            raise GenerationError("paid and received go together")
        if self.paid is not None and not 0 < self.paid < self.received:
            raise GenerationError("NFT resale must be for more than the purchase")


def _margin(ctx: _Ctx, spec: PatternSpec) -> int:
    return spec.margin if spec.margin is not None else ctx.amount(1, 200, 10 ** 13)


def _bot_draft(ctx: _Ctx, bot_id: int) -> Draft:
    return Draft(ctx.w.owners[bot_id], ctx.w.bots[bot_id], SEL_EXECUTE)


def _plant_a1(ctx: _Ctx, spec: PatternSpec) -> Unit:
    w, rng = ctx.w, ctx.rng
    b = _bot_draft(ctx, ctx.take_bot())
    bot, weth = b.to, w.weth
    a, m = ctx.amount(), _margin(ctx, spec)
    variant = spec.variant or rng.choice(("two-dex", "triangle", "direct"))
    x = ctx.other_token(weth)
    if variant == "two-dex":
        dex = rng.randint(0, 1)
        p1, p2 = w.pool(dex, weth, x), w.pool(1 - dex, weth, x)
        amt_x = ctx.amount(1, 10 ** 6, 10 ** 12)
        swap(b, p1, bot, bot, weth, a, x, amt_x)
        swap(b, p2, bot, bot, x, amt_x, weth, a + m)
    elif variant == "triangle":
        y = ctx.other_token(weth, x)
        p1, p2, p3 = (w.pool(rng.randint(0, 1), s, t) for s, t in ((weth, x), (x, y), (y, weth)))
        amt_x, amt_y = ctx.amount(1, 10 ** 6, 10 ** 12), ctx.amount(1, 10 ** 6, 10 ** 12)
        swap(b, p1, bot, bot, weth, a, x, amt_x)
        swap(b, p2, bot, bot, x, amt_x, y, amt_y)
        swap(b, p3, bot, bot, y, amt_y, weth, a + m)
    elif variant == "direct":
        dex = rng.randint(0, 1)
        p1, p2 = w.pool(dex, weth, x), w.pool(1 - dex, weth, x)
        amt_x = ctx.amount(1, 10 ** 6, 10 ** 12)
        swap(b, p1, bot, p2.address, weth, a, x, amt_x)
        swap(b, p2, None, bot, x, amt_x, weth, a + m)
    else:
        raise GenerationError(f"unknown A1 variant {variant!r}")
    ctx.maybe_tip(b, bot, weth, m)
    return Unit("A1", [b], (0,), tuple(sorted((b.sender, bot))), tuple(b.actions))


def _plant_a2(ctx: _Ctx, spec: PatternSpec) -> Unit:
    w, rng = ctx.w, ctx.rng
    b = _bot_draft(ctx, ctx.take_bot())
    bot, weth = b.to, w.weth
    wrapper, underlying = rng.choice(w.wrappers)
    a, m = ctx.amount(), _margin(ctx, spec)
    shares, assets = ctx.amount(1, 10 ** 6, 10 ** 12), ctx.amount(1, 10 ** 6, 10 ** 12)
    variant = spec.variant or rng.choice(("leave", "enter"))
    if variant == "leave":
        p1, p2 = w.pool(0, weth, wrapper), w.pool(rng.randint(0, 1), underlying, weth)
        b.call(p1.address, SEL_POOL_SWAP)
        swap(b, p1, bot, bot, weth, a, wrapper, shares)
        b.call(wrapper, SEL_LEAVE)
        b.transfer(wrapper, bot, NULL_ADDRESS, shares)
        b.transfer(underlying, wrapper, bot, assets)
        b.use(wrapper)
        b.call(p2.address, SEL_POOL_SWAP)
        swap(b, p2, bot, bot, underlying, assets, weth, a + m)
    elif variant == "enter":
        p1, p2 = w.pool(rng.randint(0, 1), weth, underlying), w.pool(0, wrapper, weth)
        b.call(p1.address, SEL_POOL_SWAP)
        swap(b, p1, bot, bot, weth, a, underlying, assets)
        b.call(wrapper, SEL_ENTER)
        b.transfer(underlying, bot, wrapper, assets)
        b.transfer(wrapper, NULL_ADDRESS, bot, shares)
        b.use(wrapper)
        b.call(p2.address, SEL_POOL_SWAP)
        swap(b, p2, bot, bot, wrapper, shares, weth, a + m)
    else:
        raise GenerationError(f"unknown A2 variant {variant!r}")
    ctx.maybe_tip(b, bot, weth, m)
    return Unit("A2", [b], (0,), tuple(sorted((b.sender, bot))), tuple(b.actions))


def _plant_a3(ctx: _Ctx, spec: PatternSpec) -> Unit:
    w, rng = ctx.w, ctx.rng
    b = _bot_draft(ctx, ctx.take_bot())
    bot, weth = b.to, w.weth
    issuer, comps = rng.choice(w.sets)
    a, m = ctx.amount(100, 5000), _margin(ctx, spec)
    qty = ctx.amount(1, 10 ** 6, 10 ** 12)
    swap(b, w.pool(0, weth, issuer), bot, bot, weth, a, issuer, qty)
    b.transfer(issuer, bot, NULL_ADDRESS, qty)
    paid = {c: ctx.amount(1, 10 ** 6, 10 ** 12) for c in comps if c != weth}
    weth_part = rng.randint(1, a // 2)
    for c in comps:
        b.transfer(c, issuer, bot, weth_part if c == weth else paid[c])
    b.event(issuer, (SET_REDEEMED_TOPIC, address_topic(issuer), address_topic(bot), address_topic(bot)),
            _word(qty) + _word(0) + _word(0))
    b.use(issuer)
    rest = a + m - weth_part
    sold = [c for c in comps if c != weth]
    first = rng.randint(1, rest - 1)
    for c, out in zip(sold, (first, rest - first)):
        swap(b, w.pool(rng.randint(0, 1), c, weth), bot, bot, c, paid[c], weth, out)
    ctx.maybe_tip(b, bot, weth, m)
    return Unit("A3", [b], (0,), tuple(sorted((b.sender, bot))), (issuer,))


def _plant_a4(ctx: _Ctx, spec: PatternSpec) -> Unit:
    w, rng = ctx.w, ctx.rng
    bot_id = ctx.take_bot()
    b = _bot_draft(ctx, bot_id)
    bot, weth, second = b.to, w.weth, w.secondaries[bot_id]
    a, m = ctx.amount(), _margin(ctx, spec)
    keep = ctx.amount(1, 500, 10 ** 13)  # second address keeps this much beyond the profit
    x = ctx.other_token(weth)
    dex = rng.randint(0, 1)
    p1, p2 = w.pool(dex, weth, x), w.pool(1 - dex, weth, x)
    amt_x = ctx.amount(1, 10 ** 6, 10 ** 12)
    swap(b, p1, bot, bot, weth, a, x, amt_x)
    swap(b, p2, bot, second, x, amt_x, weth, a + m)
    b.transfer(weth, second, bot, a - keep)
    ctx.maybe_tip(b, bot, weth, m)
    return Unit("A4", [b], (0,), tuple(sorted((b.sender, bot, second))), tuple(b.actions))


def _victim(ctx: _Ctx, pool: Pool, token_in: Address, token_out: Address) -> Draft:
    user = ctx.user()
    v = Draft(user, ctx.rng.choice(ctx.w.routers), SEL_SWAP_ROUTER)
    amount = ctx.amount(100, 5000, 10 ** 15) * ctx.w.price[ctx.w.weth] // ctx.w.price[token_in] + 10 ** 12
    swap(v, pool, user, user, token_in, amount, token_out, ctx.w.benign_out(ctx.rng, token_in, amount, token_out))
    return v


def _plant_s1(ctx: _Ctx, spec: PatternSpec) -> Unit:
    w, rng = ctx.w, ctx.rng
    bot_id = ctx.take_bot()
    f, bk = _bot_draft(ctx, bot_id), _bot_draft(ctx, bot_id)
    bot = f.to
    ta = ctx.other_token()
    tb = ctx.other_token(ta)
    pool = w.pool(rng.randint(0, 1), ta, tb)
    a1, b1, m = ctx.amount(), ctx.amount(1, 10 ** 6, 10 ** 12), _margin(ctx, spec)
    swap(f, pool, bot, bot, ta, a1, tb, b1)
    victim = _victim(ctx, pool, ta, tb)
    swap(bk, pool, bot, bot, tb, b1, ta, a1 + m)
    ctx.maybe_tip(bk, bot, ta, m)
    return Unit("S1", [f, victim, bk], (0, 2), (bot,), (pool.address,))


def _plant_s2(ctx: _Ctx, spec: PatternSpec) -> Unit:
    w, rng = ctx.w, ctx.rng
    bot_id = ctx.take_bot()
    f, bk = _bot_draft(ctx, bot_id), _bot_draft(ctx, bot_id)
    bot = f.to
    ta = ctx.other_token()
    tb = ctx.other_token(ta)
    dex1 = rng.randint(0, 1)
    p1, p2 = w.pool(dex1, ta, tb), w.pool(1 - dex1, ta, tb)
    variant = spec.variant or rng.choice(("front-dex2", "front-both"))

    # front-run: buy A with B on DEX2 (and in the second variant dump part of it on DEX1)
    b_front, a_front = ctx.amount(), ctx.amount()
    swap(f, p2, bot, bot, tb, b_front, ta, a_front)
    front_a, front_b = a_front, -b_front
    if variant == "front-both":
        a_sold = rng.randint(1, a_front - 1)
        b_back = rng.randint(1, b_front - 1)
        swap(f, p1, bot, bot, ta, a_sold, tb, b_back)
        front_a, front_b = a_front - a_sold, b_back - b_front
    elif variant != "front-dex2":
        raise GenerationError(f"unknown S2 variant {variant!r}")

    victim = _victim(ctx, p1, ta, tb)

    # back-run: B -> A on DEX1, then A -> B on DEX2, ending up ahead in B
    b1, a1 = ctx.amount(), ctx.amount()
    kept_a = rng.randint(0, front_a - 1)  # A left over in total; never the whole front gain
    a2 = front_a + a1 - kept_a
    m = _margin(ctx, spec)
    b2 = -front_b + b1 + m
    swap(bk, p1, bot, bot, tb, b1, ta, a1)
    swap(bk, p2, bot, bot, ta, a2, tb, b2)
    ctx.maybe_tip(bk, bot, tb, m)
    contracts = tuple(dict.fromkeys(f.actions + bk.actions))
    return Unit("S2", [f, victim, bk], (0, 2), (bot,), contracts)


def _plant_nft(ctx: _Ctx, spec: PatternSpec, selftrade: bool) -> Unit:
    w, rng = ctx.w, ctx.rng
    b = _bot_draft(ctx, ctx.take_bot())
    bot, weth = b.to, w.weth
    seller = b.sender if selftrade else ctx.user()
    buyer = ctx.user()
    while buyer == seller:
        buyer = ctx.user()
    collection = rng.choice(w.collections)
    token_id = spec.token_id if spec.token_id is not None else rng.randint(1, 10_000)
    if spec.paid is not None:
        paid, received = spec.paid, spec.received
    else:
        paid = ctx.amount(100, 5000, 10 ** 15)
        received = paid + _margin(ctx, spec)
    b.nft(collection, seller, bot, token_id)
    b.transfer(weth, bot, seller, paid)
    b.nft(collection, bot, buyer, token_id)
    b.transfer(weth, buyer, bot, received)
    ctx.maybe_tip(b, bot, weth, received - paid)
    if selftrade:
        return Unit("A5-selftrade", [b])
    return Unit("A5", [b], (0,), (bot,), (), nft=True)


def _benign_swap(ctx: _Ctx, spec: PatternSpec) -> Unit:
    w, rng = ctx.w, ctx.rng
    x = ctx.other_token()
    y = ctx.other_token(x)
    user = ctx.user()
    d = Draft(user, rng.choice(w.routers), SEL_SWAP_ROUTER)
    amount = ctx.amount(1, 5000, 10 ** 15) * w.price[w.weth] // w.price[x] + 10 ** 12
    swap(d, w.pool(rng.randint(0, 1), x, y), user, user, x, amount, y, w.benign_out(rng, x, amount, y))
    return Unit("BENIGN-swap", [d])


def _benign_transfer(ctx: _Ctx, spec: PatternSpec) -> Unit:
    token = ctx.other_token()
    user = ctx.user()
    to = ctx.user()
    d = Draft(user, token, SEL_TRANSFER)
    d.transfer(token, user, to, ctx.amount(1, 10 ** 6, 10 ** 12))
    return Unit("BENIGN-transfer", [d])


def _benign_multihop(ctx: _Ctx, spec: PatternSpec) -> Unit:
    w, rng = ctx.w, ctx.rng
    path = rng.sample(w.tokens, rng.randint(3, 4))
    user = ctx.user()
    d = Draft(user, rng.choice(w.routers), SEL_SWAP_ROUTER)
    pools = [w.pool(rng.randint(0, 1), s, t) for s, t in zip(path, path[1:])]
    amount = ctx.amount(1, 5000, 10 ** 15) * w.price[w.weth] // w.price[path[0]] + 10 ** 12
    payer: Optional[Address] = user
    for k, (pool, s, t) in enumerate(zip(pools, path, path[1:])):
        out = w.benign_out(rng, s, amount, t)
        last = k == len(pools) - 1
        swap(d, pool, payer, user if last else pools[k + 1].address, s, amount, t, out)
        payer, amount = None, out
    return Unit("BENIGN-multihop", [d])


def _benign_liquidity(ctx: _Ctx, spec: PatternSpec) -> Unit:
    w, rng = ctx.w, ctx.rng
    x = ctx.other_token()
    y = ctx.other_token(x)
    pool = w.pool(rng.randint(0, 1), x, y)
    lp = pool.address
    user = ctx.user()
    value = ctx.amount(10, 5000, 10 ** 15) * w.price[w.weth]
    if rng.random() < 0.5:
        d = Draft(user, rng.choice(w.routers), SEL_ADD_LIQUIDITY)
        ax, ay = value // (2 * w.price[x]) + 1, value // (2 * w.price[y]) + 1
        d.transfer(x, user, lp, ax)
        d.transfer(y, user, lp, ay)
        shares = (ax * w.price[x] + ay * w.price[y]) * (10_000 - FEE_BPS) // (10_000 * LP_PRICE)
        d.transfer(lp, NULL_ADDRESS, user, shares)
        d.event(lp, (MINT_TOPIC, address_topic(d.to)), _word(ax) + _word(ay))
    else:
        d = Draft(user, rng.choice(w.routers), SEL_REMOVE_LIQUIDITY)
        shares = value // LP_PRICE
        keep = (10_000 - FEE_BPS) * shares * LP_PRICE // 10_000
        ax, ay = keep // (2 * w.price[x]), keep // (2 * w.price[y])
        d.transfer(lp, user, lp, shares)
        d.transfer(lp, lp, NULL_ADDRESS, shares)
        d.transfer(x, lp, user, ax)
        d.transfer(y, lp, user, ay)
        d.event(lp, (BURN_TOPIC, address_topic(d.to), address_topic(user)), _word(ax) + _word(ay))
    return Unit("BENIGN-liquidity", [d])


def _benign_airdrop(ctx: _Ctx, spec: PatternSpec) -> Unit:
    w, rng = ctx.w, ctx.rng
    dist = rng.choice(w.distributors)
    token = ctx.other_token()
    d = Draft(ctx.user(), dist, SEL_DISPERSE)
    for _ in range(rng.randint(2, 6)):
        d.transfer(token, dist, ctx.user(), ctx.amount(1, 1000, 10 ** 14))
    return Unit("BENIGN-airdrop", [d])


def _benign_relay(ctx: _Ctx, spec: PatternSpec) -> Unit:
    """A profitable-looking loop through unregistered pools that pays a third-party vault."""
    w, rng = ctx.w, ctx.rng
    vault = rng.choice(w.vaults)
    d = Draft(ctx.user(), rng.choice(w.relays), SEL_EXECUTE)
    weth = w.weth
    a, m = ctx.amount(), _margin(ctx, spec)
    x = ctx.other_token(weth)
    path = [weth, x] if rng.random() < 0.5 else [weth, x, ctx.other_token(weth, x)]
    amounts = [a] + [ctx.amount(1, 10 ** 6, 10 ** 12) for _ in path[1:]] + [a + m]
    for k, token in enumerate(path):
        nxt = path[(k + 1) % len(path)]
        q = w.relay_pools[(token, nxt)]
        d.transfer(token, vault, q, amounts[k])
        d.transfer(nxt, q, vault, amounts[k + 1])
    ctx.maybe_tip(d, vault, weth, m)
    return Unit("BENIGN-relay", [d])


_PLANTERS = {
    "S1": _plant_s1,
    "S2": _plant_s2,
    "A1": _plant_a1,
    "A2": _plant_a2,
    "A3": _plant_a3,
    "A4": _plant_a4,
    "A5": lambda ctx, spec: _plant_nft(ctx, spec, False),
    "A5-selftrade": lambda ctx, spec: _plant_nft(ctx, spec, True),
    "BENIGN-swap": _benign_swap,
    "BENIGN-transfer": _benign_transfer,
    "BENIGN-multihop": _benign_multihop,
    "BENIGN-liquidity": _benign_liquidity,
    "BENIGN-airdrop": _benign_airdrop,
    "BENIGN-relay": _benign_relay,
}
USES_BOT = {"S1", "S2", "A1", "A2", "A3", "A4", "A5", "A5-selftrade"}


# -- assembly and self-checks -----------------------------------------------

def tx_hash(seed: int, number: int, index: int) -> str:
    return "0x" + hashlib.sha256(f"mevflow-synth:{seed}:{number}:{index}".encode()).hexdigest()


def _truth_for(unit: Unit, txs: list[Transaction]) -> Optional[MevLabel]:
    if not unit.positive:
        return None
    if unit.category in ("S1", "S2"):
        front, back = txs[unit.positive[0]], txs[unit.positive[1]]
        total = check_pair(taker_profits(front, build_graph(front)), taker_profits(back, build_graph(back)))
        if total is None:
            raise GenerationError(f"planted {unit.category} pair fails the sandwich conditions")
        return MevLabel((front.ref, back.ref), unit.category, unit.takers, total, unit.contracts)
    tx = txs[unit.positive[0]]
    if unit.nft:
        report = detect_nft_arbitrage(tx)
        if report is None:
            raise GenerationError("planted NFT arbitrage is not detected")
        return MevLabel((tx.ref,), "A5", unit.takers, {report.pay_token: report.margin}, ())
    net = profits(build_graph(tx))
    return MevLabel((tx.ref,), unit.category, unit.takers, scope_profits(net, unit.takers), unit.contracts)


def _check_unit(unit: Unit, txs: list[Transaction], truth: Optional[MevLabel], registry: ExchangeRegistry) -> None:
    """Re-derive the unit's label with the real classifiers."""
    for i, tx in enumerate(txs):
        graph = build_graph(tx)
        got = classify_arbitrage(tx, graph, identify_exchanges(tx, registry))
        nft = detect_nft_arbitrage(tx)
        planted_arb = truth is not None and i in unit.positive and unit.category in ("A1", "A2", "A3", "A4")
        if planted_arb:
            if got is None or _key(got) != _key(truth):
                raise GenerationError(f"planted {unit.category} classified as {got and got.category}: {tx.hash}")
        elif unit.category in ("S1", "S2") and i in unit.positive:
            if not identify_exchanges(tx, registry):
                raise GenerationError(f"{unit.category} leg without registered exchange: {tx.hash}")
        elif got is not None:
            raise GenerationError(f"{unit.category} transaction wrongly classified {got.category}: {tx.hash}")
        if (nft is not None) != (unit.nft and i in unit.positive):
            raise GenerationError(f"{unit.category} transaction has unexpected NFT result: {tx.hash}")


def _key(label: MevLabel) -> tuple:
    return (tuple(t.hash for t in label.txs), label.category, tuple(label.takers),
            tuple(sorted(label.profit.items())), tuple(label.contracts))


def assemble_block(w: World, rng: Random, number: int, plan: Sequence[str], seed: int,
                   specs: Optional[dict] = None, verify: bool = True) -> tuple[Block, list[MevLabel]]:
    """Build one block realising ``plan`` (a list of category names)."""
    n_bots = sum(1 for c in plan if c in USES_BOT)
    if n_bots > N_BOTS:
        raise GenerationError(f"{n_bots} bot patterns in one block; at most {N_BOTS}")
    builder = rng.choice(w.builders)
    ctx = _Ctx(w, rng, builder, rng.sample(range(N_BOTS), n_bots))
    units = [_PLANTERS[c](ctx, (specs or {}).get(c) or PatternSpec(c)) for c in plan]
    rng.shuffle(units)

    txs: list[Transaction] = []
    spans = []
    log_index = 0
    for unit in units:
        start = len(txs)
        for d in unit.drafts:
            index = len(txs)
            txs.append(d.finalize(number, index, tx_hash(seed, number, index), log_index))
            log_index += len(d.items)
        spans.append((unit, start))

    truth = []
    for unit, start in spans:
        mine = txs[start:start + len(unit.drafts)]
        label = _truth_for(unit, mine)
        if verify:
            _check_unit(unit, mine, label, w.registry)
        if label is not None:
            truth.append(label)
    block = Block(number, builder, tuple(txs))
    truth.sort(key=lambda l: (l.txs[0].tx_index, l.category))

    if verify:
        got = label_block(block, w.registry)
        if [_key(l) for l in got] != [_key(l) for l in truth]:
            raise GenerationError(f"block {number}: labels disagree with the planted truth")
    return block, truth


def gen_pattern(spec: PatternSpec, seed: int = 0, block_number: int = 1) -> tuple[list[Transaction], list[MevLabel]]:
    """Realise a single pattern (plus its victim, for sandwiches) in an otherwise empty block."""
    block, truth = assemble_block(world(), Random(seed), block_number, [spec.category], seed,
                                  {spec.category: spec})
    return list(block.transactions), truth


# -- corpora ----------------------------------------------------------------

@dataclass(frozen=True)
class GenConfig:
    blocks: int = 100
    seed: int = 0
    start_block: int = 1
    benign_ratio: float = 0.95
    mev_per_block: int = 2
    mev_mix: dict = field(default_factory=lambda: dict(DEFAULT_MEV_MIX))
    benign_mix: dict = field(default_factory=lambda: dict(DEFAULT_BENIGN_MIX))
    counts: Optional[dict] = None  # exact totals per category; overrides the per-block mix
    benign_total: Optional[int] = None  # exact number of benign transactions (with counts)
    verify: bool = True

    def __post_init__(self) -> None:
        if self.blocks < 1:
            raise GenerationError("blocks must be >= 1")
        if not 0.0 <= self.benign_ratio < 1.0:
            raise GenerationError("benign_ratio must lie in [0, 1)")
        for mix in (self.mev_mix, self.benign_mix, self.counts or {}):
            for c, v in mix.items():
                if c not in CATEGORIES:
                    raise GenerationError(f"unknown category {c!r}")
                if v < 0:
                    raise GenerationError(f"negative weight for {c}")


def _draw(rng: Random, mix: dict, k: int) -> list[str]:
    names = sorted(c for c, v in mix.items() if v > 0)
    if k and not names:
        raise GenerationError("empty category mix")
    return rng.choices(names, weights=[mix[c] for c in names], k=k) if k else []


def _plan(cfg: GenConfig, rng: Random) -> list[list[str]]:
    if cfg.counts is not None:
        chosen = [c for c in sorted(cfg.counts) for _ in range(cfg.counts[c])]
        chosen += _draw(rng, cfg.benign_mix, cfg.benign_total or 0)
        rng.shuffle(chosen)
        plans = [[] for _ in range(cfg.blocks)]
        for i, c in enumerate(chosen):
            plans[i % cfg.blocks].append(c)
        return plans
    plans = []
    for _ in range(cfg.blocks):
        mev = _draw(rng, cfg.mev_mix, cfg.mev_per_block)
        mev_txs = sum(2 if c in ("S1", "S2") else 1 for c in mev)
        victims = sum(1 for c in mev if c in ("S1", "S2"))
        wanted = math.ceil(cfg.benign_ratio * mev_txs / (1.0 - cfg.benign_ratio) - 1e-9) if mev_txs else 0
        plans.append(mev + _draw(rng, cfg.benign_mix, max(wanted - victims, 0)))
    return plans


@dataclass
class GenResult:
    corpus: Corpus
    truth: list
    registry: ExchangeRegistry
    kinds: AddressKindMap

    @property
    def blocks(self) -> list[Block]:
        return self.corpus.blocks


def gen_corpus(cfg: GenConfig, out_dir: str | Path | None = None) -> GenResult:
    w = world()
    rng = Random(cfg.seed)
    blocks, truth = [], []
    for k, plan in enumerate(_plan(cfg, rng)):
        number = cfg.start_block + k
        block_rng = Random(f"{cfg.seed}:{number}")
        block, labels = assemble_block(w, block_rng, number, plan, cfg.seed, verify=cfg.verify)
        blocks.append(block)
        truth.extend(labels)
    result = GenResult(Corpus(CorpusHeader(source="fixture"), blocks), truth, w.registry, w.kinds)
    if out_dir is not None:
        write_outputs(result, out_dir)
    return result


CORPUS_FILE = "corpus.mevcorpus.jsonl"
REGISTRY_FILE = "registry.json"
KINDS_FILE = "kinds.jsonl"
TRUTH_FILE = "truth.jsonl"


def write_truth(labels: Sequence[MevLabel], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for label in labels:
            fh.write(dumps_line(label.to_json()))


def read_truth(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_outputs(result: GenResult, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_corpus(result.corpus, out / CORPUS_FILE)
    save_registry(result.registry, out / REGISTRY_FILE)
    save_kinds(result.kinds, out / KINDS_FILE)
    write_truth(result.truth, out / TRUTH_FILE)


def bundled_registry_path() -> Path:
    return Path(__file__).parent / "data" / "synthetic_registry.json"


# -- random blocks for detector cross-checks --------------------------------

def fuzz_block(rng: Random, number: int = 1, n_txs: int = 30) -> Block:
    """A dense block of small random transfers among a few recipients and tokens.

    Amounts are tiny so zero nets, shared key sets and exact ties are common;
    this is for comparing detector implementations, not for realism.
    """
    recipients = [_addr(0x20, i) for i in range(3)]
    senders = [_addr(0x21, i) for i in range(4)]
    others = [_addr(0x22, i) for i in range(3)]
    tokens = [_addr(0x23, i) for i in range(3)]
    txs = []
    log_index = 0
    for index in range(n_txs):
        sender = rng.choice(senders)
        roll = rng.random()
        to = None if roll < 0.03 else NULL_ADDRESS if roll < 0.05 else rng.choice(recipients)
        d = Draft(sender, to, None)
        scope = [sender] + ([to] if to is not None else [])
        for _ in range(rng.randint(0, 4)):
            token = rng.choice(tokens)
            inside = rng.choice(scope)
            outside = rng.choice(others)
            amount = rng.randint(1, 4)
            if rng.random() < 0.5:
                d.transfer(token, inside, outside, amount)
            else:
                d.transfer(token, outside, inside, amount)
        txs.append(d.finalize(number, index, tx_hash(-1, number, index), log_index))
        log_index += len(d.items)
    return Block(number, rng.choice(others), tuple(txs))
