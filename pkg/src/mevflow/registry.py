"""Exchange registries: which (contract, topic0 or selector) pairs mean a token exchange.

JSON layout::

    {"version": 1, "entries": [
        {"platform": "Uniswap V2", "contract": "0x...", "kind": "event",
         "value": "0x<64 hex>", "action": "Swap"}
    ]}

TOML files use the same keys with ``[[entries]]`` tables. Hashes are always
given explicitly; nothing is derived from names.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .chain import Address, Transaction, TxRef
from .errors import AddressError, RegistryError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

REGISTRY_VERSION = 1
MATCH_KINDS = ("event", "function")


@dataclass(frozen=True)
class RegistryEntry:
    platform: str
    contract: Address
    kind: str  # "event" (32-byte topic0) or "function" (4-byte selector)
    value: bytes
    action: str

    def __post_init__(self) -> None:
        if self.kind not in MATCH_KINDS:
            raise RegistryError(f"match kind must be one of {MATCH_KINDS}, got {self.kind!r}")
        size = 32 if self.kind == "event" else 4
        if len(self.value) != size:
            raise RegistryError(f"{self.kind} match value must be {size} bytes, got {len(self.value)}")

    def to_json(self) -> dict:
        return {
            "platform": self.platform,
            "contract": self.contract,
            "kind": self.kind,
            "value": "0x" + self.value.hex(),
            "action": self.action,
        }


@dataclass(frozen=True)
class ExchangeRegistry:
    entries: tuple[RegistryEntry, ...] = ()
    _events: dict = field(default_factory=dict, repr=False, compare=False)
    _functions: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        for entry in self.entries:
            table = self._events if entry.kind == "event" else self._functions
            key = (entry.contract, entry.value)
            if key in table:
                raise RegistryError(
                    f"duplicate registry entry for {entry.contract} / 0x{entry.value.hex()}"
                )
            table[key] = entry

    def __len__(self) -> int:
        return len(self.entries)

    def match_event(self, contract: Address, topic0: bytes) -> Optional[RegistryEntry]:
        return self._events.get((contract, topic0))

    def match_function(self, contract: Address, selector: str | bytes) -> Optional[RegistryEntry]:
        if isinstance(selector, str):
            selector = bytes.fromhex(selector[2:])
        return self._functions.get((contract, selector))

    @property
    def contracts(self) -> frozenset:
        return frozenset(e.contract for e in self.entries)

    def to_json(self) -> dict:
        return {"version": REGISTRY_VERSION, "entries": [e.to_json() for e in self.entries]}


def _parse_hex(text, where: str) -> bytes:
    if not isinstance(text, str) or not text.startswith("0x"):
        raise RegistryError(f"{where}: expected 0x-prefixed hex, got {text!r}")
    try:
        return bytes.fromhex(text[2:])
    except ValueError:
        raise RegistryError(f"{where}: malformed hex {text!r}") from None


def registry_from_obj(obj) -> ExchangeRegistry:
    if not obj:
        return ExchangeRegistry()
    version = obj.get("version", REGISTRY_VERSION)
    if version != REGISTRY_VERSION:
        raise RegistryError(f"unsupported registry version {version!r}")
    entries = []
    for i, raw in enumerate(obj.get("entries", [])):
        where = f"entry {i}"
        try:
            entries.append(RegistryEntry(
                platform=str(raw.get("platform", "")),
                contract=Address(raw["contract"]),
                kind=raw["kind"],
                value=_parse_hex(raw["value"], where),
                action=str(raw["action"]),
            ))
        except KeyError as exc:
            raise RegistryError(f"{where}: missing field {exc}") from None
        except AddressError as exc:
            raise RegistryError(f"{where}: {exc}") from None
    return ExchangeRegistry(tuple(entries))


def load_registry(path: str | Path) -> ExchangeRegistry:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        return ExchangeRegistry()
    try:
        if path.suffix == ".toml":
            obj = tomllib.loads(text)
        else:
            obj = json.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise RegistryError(f"{path}: cannot parse registry: {exc}") from None
    return registry_from_obj(obj)


def save_registry(registry: ExchangeRegistry, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(registry.to_json(), fh, indent=1, sort_keys=True)
        fh.write("\n")


@dataclass(frozen=True)
class ExchangeAction:
    tx: TxRef
    contract: Address
    action: str
    platform: str
    source: str  # "event", "call" (top-level selector) or "trace"
    position: int  # log_index for events, call index for traces, -1 for top level


def identify_exchanges(tx: Transaction, registry: ExchangeRegistry) -> list[ExchangeAction]:
    actions = []
    ref = tx.ref
    for entry in tx.logs:
        if not entry.topics:
            continue
        hit = registry.match_event(entry.address, entry.topics[0])
        if hit is not None:
            actions.append(ExchangeAction(ref, entry.address, hit.action, hit.platform, "event", entry.log_index))
    if tx.to is not None and tx.input_selector is not None:
        hit = registry.match_function(tx.to, tx.input_selector)
        if hit is not None:
            actions.append(ExchangeAction(ref, tx.to, hit.action, hit.platform, "call", -1))
    for i, (contract, selector) in enumerate(tx.trace_calls or ()):
        hit = registry.match_function(contract, selector)
        if hit is not None:
            actions.append(ExchangeAction(ref, contract, hit.action, hit.platform, "trace", i))
    return actions


def action_contracts(actions: Iterable[ExchangeAction]) -> frozenset:
    return frozenset(a.contract for a in actions)
