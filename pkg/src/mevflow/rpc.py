"""Minimal Ethereum JSON-RPC client: blocks, receipts and code lookups."""

from __future__ import annotations

import itertools
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, Optional

import requests

from .chain import Address, Block, Log, Transaction, check_selector
from .errors import BlockNotFound, RetryExhausted, RpcError

log = logging.getLogger(__name__)

RPC_URL_ENV = "MEVFLOW_RPC_URL"
TRANSIENT_STATUS = {429, 500, 502, 503, 504}


def default_endpoint() -> str:
    url = os.environ.get(RPC_URL_ENV)
    if not url:
        raise RpcError(f"no RPC endpoint given and {RPC_URL_ENV} is unset")
    return url


class RpcClient:
    """JSON-RPC 2.0 over HTTP with bounded exponential backoff.

    Transient failures (connection errors, timeouts, HTTP 429/5xx) are retried
    up to ``attempts`` times in total, sleeping ``backoff * 2**n`` in between.
    JSON-RPC error objects are not retried.
    """

    def __init__(self, endpoint: Optional[str] = None, attempts: int = 3, backoff: float = 0.5,
                 timeout: float = 30.0, session: Optional[requests.Session] = None):
        self.endpoint = endpoint or default_endpoint()
        self.attempts = attempts
        self.backoff = backoff
        self.timeout = timeout
        self.session = session or requests.Session()
        self._ids = itertools.count(1)

    def call(self, method: str, params: list):
        payload = {"jsonrpc": "2.0", "id": next(self._ids), "method": method, "params": params}
        last_error = None
        for attempt in range(self.attempts):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                response = self.session.post(self.endpoint, json=payload, timeout=self.timeout)
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                log.debug("%s attempt %d failed: %s", method, attempt + 1, last_error)
                continue
            if response.status_code in TRANSIENT_STATUS:
                last_error = f"HTTP {response.status_code}"
                log.debug("%s attempt %d failed: %s", method, attempt + 1, last_error)
                continue
            if response.status_code != 200:
                raise RpcError(f"{method}: HTTP {response.status_code}")
            try:
                body = response.json()
            except ValueError:
                raise RpcError(f"{method}: response is not JSON") from None
            if body.get("error") is not None:
                raise RpcError(f"{method}: {body['error']}")
            return body.get("result")
        raise RetryExhausted(f"{method}: gave up after {self.attempts} attempts ({last_error})")

    def get_block(self, number: int):
        return self.call("eth_getBlockByNumber", [hex(number), True])

    def get_receipt(self, tx_hash: str):
        return self.call("eth_getTransactionReceipt", [tx_hash])

    def get_code(self, address: Address, block: str = "latest") -> str:
        return self.call("eth_getCode", [address, block])


def _qty(value: str) -> int:
    return int(value, 16)


def _selector(tx_input: Optional[str]) -> Optional[str]:
    if not tx_input or len(tx_input) < 10:
        return None
    return check_selector(tx_input[:10].lower())


def _receipt_logs(receipt: dict) -> tuple[Log, ...]:
    return tuple(
        Log(
            address=Address(entry["address"]),
            topics=tuple(bytes.fromhex(t[2:]) for t in entry["topics"]),
            data=bytes.fromhex(entry["data"][2:]),
            log_index=_qty(entry["logIndex"]),
        )
        for entry in receipt.get("logs", [])
    )


def fetch_block(endpoint, block_number: int) -> Block:
    """Assemble a Block from eth_getBlockByNumber plus one receipt per transaction."""
    client = endpoint if isinstance(endpoint, RpcClient) else RpcClient(endpoint)
    raw = client.get_block(block_number)
    if raw is None:
        raise BlockNotFound(f"block {block_number} not found")
    number = _qty(raw["number"])
    transactions = []
    for raw_tx in raw["transactions"]:
        receipt = client.get_receipt(raw_tx["hash"])
        if receipt is None:
            raise RpcError(f"receipt for {raw_tx['hash']} not available")
        transactions.append(
            Transaction(
                hash=raw_tx["hash"].lower(),
                sender=Address(raw_tx["from"]),
                to=Address(raw_tx["to"]) if raw_tx.get("to") else None,
                input_selector=_selector(raw_tx.get("input")),
                block_number=number,
                tx_index=_qty(raw_tx["transactionIndex"]),
                logs=_receipt_logs(receipt),
            )
        )
    transactions.sort(key=lambda tx: tx.tx_index)
    return Block(number=number, fee_recipient=Address(raw["miner"]), transactions=tuple(transactions))


def fetch_blocks(endpoint, numbers: Iterable[int], workers: int = 4) -> list[Block]:
    """Fetch several blocks concurrently; results come back in request order."""
    client = endpoint if isinstance(endpoint, RpcClient) else RpcClient(endpoint)
    numbers = list(numbers)
    if workers <= 1:
        return [fetch_block(client, n) for n in numbers]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda n: fetch_block(client, n), numbers))
