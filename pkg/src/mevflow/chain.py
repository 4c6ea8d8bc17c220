"""Block, transaction and log types plus ERC-20/ERC-721 Transfer decoding."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .errors import AddressError, DecodeError

# keccak-256("Transfer(address,address,uint256)"), shared by ERC-20 and ERC-721
TRANSFER_TOPIC = bytes.fromhex(
    "ddf252ad1be2c89b69c2b068fc378daa952ba7f163c4a11628f55a4df523b3ef"
)

_HEX40 = re.compile(r"0x[0-9a-fA-F]{40}\Z")
_HEX_SELECTOR = re.compile(r"0x[0-9a-f]{8}\Z")
_HEX_HASH = re.compile(r"0x[0-9a-f]{64}\Z")


class Address(str):
    """A 20-byte account identifier, always held in lowercase 0x-hex form.

    Subclassing ``str`` keeps addresses cheap to hash and directly
    JSON-serializable; construction validates and canonicalizes.
    """

    __slots__ = ()

    def __new__(cls, value: "str | bytes | Address") -> "Address":
        if type(value) is Address:
            return value
        if isinstance(value, (bytes, bytearray)):
            if len(value) != 20:
                raise AddressError(f"address must be 20 bytes, got {len(value)}")
            return str.__new__(cls, "0x" + bytes(value).hex())
        if not isinstance(value, str) or not _HEX40.match(value):
            raise AddressError(f"not a 0x-prefixed 40-digit hex address: {value!r}")
        return str.__new__(cls, value.lower())

    @property
    def raw(self) -> bytes:
        return bytes.fromhex(self[2:])

    @property
    def is_null(self) -> bool:
        return self == NULL_ADDRESS

    def __repr__(self) -> str:
        return f"Address({str.__repr__(self)})"


NULL_ADDRESS = Address("0x" + "00" * 20)


def normalize_address(text: str) -> Address:
    if not isinstance(text, str):
        raise AddressError(f"expected text, got {type(text).__name__}")
    return Address(text)


def check_selector(value: str) -> str:
    if not isinstance(value, str) or not _HEX_SELECTOR.match(value.lower()):
        raise ValueError(f"not a 4-byte selector: {value!r}")
    return value.lower()


def check_hash(value: str) -> str:
    if not isinstance(value, str) or not _HEX_HASH.match(value.lower()):
        raise ValueError(f"not a 32-byte hash: {value!r}")
    return value.lower()


@dataclass(frozen=True)
class Log:
    address: Address
    topics: tuple[bytes, ...]
    data: bytes
    log_index: int

    def __post_init__(self) -> None:
        if len(self.topics) > 4:
            raise ValueError(f"log {self.log_index}: {len(self.topics)} topics (max 4)")
        for topic in self.topics:
            if len(topic) != 32:
                raise ValueError(f"log {self.log_index}: topic is {len(topic)} bytes")


@dataclass(frozen=True)
class TxRef:
    block_number: int
    tx_index: int
    hash: str


@dataclass(frozen=True)
class Transaction:
    hash: str
    sender: Address
    to: Optional[Address]
    input_selector: Optional[str]
    block_number: int
    tx_index: int
    logs: tuple[Log, ...] = ()
    # (callee, selector) pairs from an execution trace, when one was available
    trace_calls: Optional[tuple[tuple[Address, str], ...]] = None

    def __post_init__(self) -> None:
        previous = None
        for log in self.logs:
            if previous is not None and log.log_index <= previous:
                raise ValueError(f"tx {self.hash}: logs out of order at index {log.log_index}")
            previous = log.log_index

    @property
    def ref(self) -> TxRef:
        return TxRef(self.block_number, self.tx_index, self.hash)


@dataclass(frozen=True)
class Block:
    number: int
    fee_recipient: Address
    transactions: tuple[Transaction, ...] = field(default=())

    def __post_init__(self) -> None:
        previous = None
        for tx in self.transactions:
            if previous is not None and tx.tx_index <= previous:
                raise ValueError(f"block {self.number}: tx_index {tx.tx_index} out of order")
            if tx.block_number != self.number:
                raise ValueError(f"tx {tx.hash} claims block {tx.block_number}, inside {self.number}")
            previous = tx.tx_index


@dataclass(frozen=True)
class TokenTransfer:
    token: Address
    sender: Address
    recipient: Address
    amount: int
    log_index: int


@dataclass(frozen=True)
class NftTransfer:
    collection: Address
    sender: Address
    recipient: Address
    token_id: int
    log_index: int


def _topic_address(topic: bytes) -> Address:
    return Address(topic[12:])


def decode_transfers(tx: Transaction) -> tuple[list[TokenTransfer], list[NftTransfer]]:
    """Split a transaction's Transfer logs into fungible and non-fungible moves.

    Both standards share one topic0; ERC-20 indexes two arguments (3 topics,
    value in data) while ERC-721 indexes all three (4 topics, empty data).
    """
    tokens: list[TokenTransfer] = []
    nfts: list[NftTransfer] = []
    for log in tx.logs:
        if not log.topics or log.topics[0] != TRANSFER_TOPIC:
            continue
        n_topics = len(log.topics)
        if n_topics == 3:
            if len(log.data) != 32:
                raise DecodeError(
                    f"ERC-20 Transfer data is {len(log.data)} bytes, expected 32", log.log_index
                )
            tokens.append(
                TokenTransfer(
                    token=log.address,
                    sender=_topic_address(log.topics[1]),
                    recipient=_topic_address(log.topics[2]),
                    amount=int.from_bytes(log.data, "big"),
                    log_index=log.log_index,
                )
            )
        elif n_topics == 4:
            if log.data:
                raise DecodeError(
                    f"ERC-721 Transfer carries {len(log.data)} data bytes, expected none",
                    log.log_index,
                )
            nfts.append(
                NftTransfer(
                    collection=log.address,
                    sender=_topic_address(log.topics[1]),
                    recipient=_topic_address(log.topics[2]),
                    token_id=int.from_bytes(log.topics[3], "big"),
                    log_index=log.log_index,
                )
            )
    return tokens, nfts


def address_topic(address: Address) -> bytes:
    return bytes(12) + address.raw


def erc20_transfer_log(token: Address, sender: Address, recipient: Address, amount: int, log_index: int) -> Log:
    return Log(
        address=token,
        topics=(TRANSFER_TOPIC, address_topic(sender), address_topic(recipient)),
        data=amount.to_bytes(32, "big"),
        log_index=log_index,
    )


def erc721_transfer_log(collection: Address, sender: Address, recipient: Address, token_id: int, log_index: int) -> Log:
    return Log(
        address=collection,
        topics=(
            TRANSFER_TOPIC,
            address_topic(sender),
            address_topic(recipient),
            token_id.to_bytes(32, "big"),
        ),
        data=b"",
        log_index=log_index,
    )
