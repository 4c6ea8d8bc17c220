"""Corpus files (.mevcorpus.jsonl), address-kind sidecars and kind resolution.

Corpus layout, one JSON object per line:

    {"chain_id": 1, "format_version": 1, "source": "fixture"}
    {"block": {...}}
    {"address_kind": {"address": "0x...", "kind": "CA"}}

Canonical files put every block first (ascending number) and then the
address kinds sorted by address; keys are sorted and separators compact.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .chain import NULL_ADDRESS, Address, Block, Log, Transaction, check_hash, check_selector
from .errors import CorpusError, RpcError

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
CORPUS_SUFFIX = ".mevcorpus.jsonl"


class AddressKind(str, enum.Enum):
    CA = "CA"
    EOA = "EOA"
    UNKNOWN = "UNKNOWN"


class AddressKindMap(dict):
    """Address -> AddressKind. The null address always reads as CA."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.failures = 0

    def kind_of(self, address: Address) -> AddressKind:
        if address == NULL_ADDRESS:
            return AddressKind.CA
        return self.get(address, AddressKind.UNKNOWN)


@dataclass(frozen=True)
class CorpusHeader:
    format_version: int = FORMAT_VERSION
    chain_id: int = 1
    source: str = "fixture"

    def __post_init__(self) -> None:
        if self.format_version != FORMAT_VERSION:
            raise CorpusError(f"unsupported corpus format_version {self.format_version}")
        if self.source not in ("fixture", "rpc"):
            raise CorpusError(f"unknown corpus source {self.source!r}")


@dataclass
class Corpus:
    header: CorpusHeader
    blocks: list[Block] = field(default_factory=list)
    kinds: AddressKindMap = field(default_factory=AddressKindMap)


# -- JSON encoding ----------------------------------------------------------

def _hex(data: bytes) -> str:
    return "0x" + data.hex()


def _unhex(text: str) -> bytes:
    if not isinstance(text, str) or not text.startswith("0x"):
        raise ValueError(f"expected 0x-prefixed hex, got {text!r}")
    return bytes.fromhex(text[2:])


def log_to_json(entry: Log) -> dict:
    return {
        "address": entry.address,
        "topics": [_hex(t) for t in entry.topics],
        "data": _hex(entry.data),
        "log_index": entry.log_index,
    }


def log_from_json(obj: Mapping) -> Log:
    return Log(
        address=Address(obj["address"]),
        topics=tuple(_unhex(t) for t in obj["topics"]),
        data=_unhex(obj["data"]),
        log_index=_int(obj["log_index"]),
    )


def tx_to_json(tx: Transaction) -> dict:
    return {
        "hash": tx.hash,
        "from": tx.sender,
        "to": tx.to,
        "input_selector": tx.input_selector,
        "block_number": tx.block_number,
        "tx_index": tx.tx_index,
        "logs": [log_to_json(entry) for entry in tx.logs],
        "trace_calls": None if tx.trace_calls is None else [[c, s] for c, s in tx.trace_calls],
    }


def tx_from_json(obj: Mapping) -> Transaction:
    trace = obj.get("trace_calls")
    return Transaction(
        hash=check_hash(obj["hash"]),
        sender=Address(obj["from"]),
        to=None if obj["to"] is None else Address(obj["to"]),
        input_selector=None if obj["input_selector"] is None else check_selector(obj["input_selector"]),
        block_number=_int(obj["block_number"]),
        tx_index=_int(obj["tx_index"]),
        logs=tuple(log_from_json(entry) for entry in obj["logs"]),
        trace_calls=None if trace is None else tuple((Address(c), check_selector(s)) for c, s in trace),
    )


def block_to_json(block: Block) -> dict:
    return {
        "number": block.number,
        "fee_recipient": block.fee_recipient,
        "transactions": [tx_to_json(tx) for tx in block.transactions],
    }


def block_from_json(obj: Mapping) -> Block:
    return Block(
        number=_int(obj["number"]),
        fee_recipient=Address(obj["fee_recipient"]),
        transactions=tuple(tx_from_json(tx) for tx in obj["transactions"]),
    )


def _int(value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"expected integer, got {value!r}")
    return value


def dumps_line(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


# -- reading ----------------------------------------------------------------

def _parse_header(line: str) -> CorpusHeader:
    try:
        obj = json.loads(line)
        header = CorpusHeader(
            format_version=_int(obj["format_version"]),
            chain_id=_int(obj["chain_id"]),
            source=obj["source"],
        )
    except CorpusError as exc:
        raise CorpusError(str(exc), line=1) from None
    except (ValueError, KeyError, TypeError) as exc:
        raise CorpusError(f"malformed header: {exc}", line=1) from None
    return header


def _kind_record(obj: Mapping) -> tuple[Address, AddressKind]:
    return Address(obj["address"]), AddressKind(obj["kind"])


def iter_records(path: str | Path) -> Iterator[tuple[int, str, object]]:
    """Yield (line number, record type, parsed record) after validating the header."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if not first.strip():
            raise CorpusError("missing header", line=1)
        yield 1, "header", _parse_header(first)
        last_block = None
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict) or len(obj) != 1:
                    raise ValueError("expected exactly one of 'block' or 'address_kind'")
                if "block" in obj:
                    block = block_from_json(obj["block"])
                    if last_block is not None and block.number <= last_block:
                        raise CorpusError(
                            f"block {block.number} does not follow block {last_block}", line=lineno
                        )
                    last_block = block.number
                    yield lineno, "block", block
                elif "address_kind" in obj:
                    yield lineno, "address_kind", _kind_record(obj["address_kind"])
                else:
                    raise ValueError(f"unknown record type {next(iter(obj))!r}")
            except CorpusError:
                raise
            except (ValueError, KeyError, TypeError) as exc:
                detail = f"missing field {exc}" if isinstance(exc, KeyError) else str(exc)
                raise CorpusError(f"malformed record: {detail}", line=lineno) from None


def load_corpus(path: str | Path, kinds_path: str | Path | None = None) -> Corpus:
    records = iter_records(path)
    _, _, header = next(records)
    corpus = Corpus(header=header)
    for _, kind, record in records:
        if kind == "block":
            corpus.blocks.append(record)
        else:
            address, address_kind = record
            corpus.kinds[address] = address_kind
    if kinds_path is not None:
        corpus.kinds.update(load_kinds(kinds_path))
    return corpus


def iter_blocks(path: str | Path) -> Iterator[Block]:
    """Stream blocks without holding the corpus in memory."""
    for _, kind, record in iter_records(path):
        if kind == "block":
            yield record


def load_kinds(path: str | Path) -> AddressKindMap:
    kinds = AddressKindMap()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                address, kind = _kind_record(json.loads(line)["address_kind"])
            except (ValueError, KeyError, TypeError) as exc:
                raise CorpusError(f"malformed address_kind: {exc}", line=lineno) from None
            kinds[address] = kind
    return kinds


# -- writing ----------------------------------------------------------------

def _kind_lines(kinds: Mapping[Address, AddressKind]) -> Iterator[str]:
    for address in sorted(kinds):
        yield dumps_line({"address_kind": {"address": address, "kind": AddressKind(kinds[address]).value}})


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    header = corpus.header
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_line({
            "format_version": header.format_version,
            "chain_id": header.chain_id,
            "source": header.source,
        }))
        for block in corpus.blocks:
            fh.write(dumps_line({"block": block_to_json(block)}))
        fh.writelines(_kind_lines(corpus.kinds))


def save_kinds(kinds: Mapping[Address, AddressKind], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(_kind_lines(kinds))


# -- kind resolution --------------------------------------------------------

def resolve_kinds(addresses: Iterable[Address], source) -> AddressKindMap:
    """Map every address to CA/EOA/UNKNOWN.

    ``source`` is either a mapping loaded from a sidecar (offline mode) or an
    object with a ``get_code(address)`` method such as :class:`mevflow.rpc.RpcClient`.
    Per-address RPC failures degrade to UNKNOWN and bump ``failures``.
    """
    resolved = AddressKindMap()
    offline = isinstance(source, Mapping)
    for address in addresses:
        address = Address(address)
        if address == NULL_ADDRESS:
            resolved[address] = AddressKind.CA
        elif offline:
            resolved[address] = AddressKind(source.get(address, AddressKind.UNKNOWN))
        else:
            try:
                code = source.get_code(address)
            except RpcError as exc:
                log.warning("code lookup failed for %s: %s", address, exc)
                resolved.failures += 1
                resolved[address] = AddressKind.UNKNOWN
                continue
            resolved[address] = AddressKind.CA if code not in ("", "0x", b"", None) else AddressKind.EOA
    return resolved
