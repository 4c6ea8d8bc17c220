import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from mevflow.chain import TRANSFER_TOPIC, Address
from mevflow.errors import BlockNotFound, RetryExhausted, RpcError
from mevflow.ingest import AddressKind, resolve_kinds
from mevflow.rpc import RpcClient, fetch_block, fetch_blocks

TOKEN = "0x" + "11" * 20
A = "0x" + "aa" * 20
B = "0x" + "bb" * 20
MINER = "0x" + "cc" * 20


def topic(a):
    return "0x" + "00" * 12 + a[2:]


def chain_data():
    blocks, receipts = {}, {}
    for number in (100, 101):
        txs = []
        for i in range(2):
            h = "0x" + f"{number:032x}{i:032x}"
            txs.append({"hash": h, "from": A, "to": B if i else None, "input": "0xa9059cbb" + "00" * 64 if i else "0x",
                        "transactionIndex": hex(i), "blockNumber": hex(number)})
            receipts[h] = {"logs": [{"address": TOKEN, "topics": ["0x" + TRANSFER_TOPIC.hex(), topic(A), topic(B)],
                                     "data": "0x" + f"{number + i:064x}", "logIndex": hex(2 * i)}]}
        blocks[hex(number)] = {"number": hex(number), "miner": MINER, "transactions": list(reversed(txs))}
    return blocks, receipts


class Node:
    def __init__(self, fail_first=0, status=429):
        self.blocks, self.receipts = chain_data()
        self.fail_first = fail_first
        self.status = status
        self.calls = []
        node = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                node.calls.append(body["method"])
                if node.fail_first > 0:
                    node.fail_first -= 1
                    self.send_response(node.status)
                    self.end_headers()
                    return
                method, params = body["method"], body["params"]
                if method == "eth_getBlockByNumber":
                    result = node.blocks.get(params[0])
                elif method == "eth_getTransactionReceipt":
                    result = node.receipts.get(params[0])
                elif method == "eth_getCode":
                    result = "0x6080" if params[0] == B else "0x"
                else:
                    out = {"jsonrpc": "2.0", "id": body["id"], "error": {"code": -32601, "message": "no such method"}}
                    return self._send(out)
                self._send({"jsonrpc": "2.0", "id": body["id"], "result": result})

            def _send(self, obj):
                data = json.dumps(obj).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.server.server_port}"
        threading.Thread(target=self.server.serve_forever, daemon=True).start()

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def node():
    n = Node()
    yield n
    n.close()


def client(url, **kw):
    kw.setdefault("backoff", 0.001)
    return RpcClient(url, **kw)


def test_fetch_block(node):
    block = fetch_block(client(node.url), 100)
    assert block.number == 100 and block.fee_recipient == MINER
    assert [tx.tx_index for tx in block.transactions] == [0, 1]
    first, second = block.transactions
    assert first.to is None and first.input_selector is None
    assert second.to == B and second.input_selector == "0xa9059cbb"
    assert int.from_bytes(second.logs[0].data, "big") == 101
    assert second.logs[0].address == Address(TOKEN)


def test_fetch_is_idempotent(node):
    c = client(node.url)
    assert fetch_block(c, 101) == fetch_block(c, 101)


def test_fetch_blocks_keeps_order(node):
    blocks = fetch_blocks(client(node.url), [101, 100], workers=2)
    assert [b.number for b in blocks] == [101, 100]


def test_missing_block(node):
    with pytest.raises(BlockNotFound):
        fetch_block(client(node.url), 999)


def test_retry_then_succeed():
    n = Node(fail_first=2, status=503)
    try:
        block = fetch_block(client(n.url), 100)
        assert block.number == 100
        assert n.calls[:3] == ["eth_getBlockByNumber"] * 3
    finally:
        n.close()


def test_429_three_times_exhausts():
    n = Node(fail_first=3, status=429)
    try:
        with pytest.raises(RetryExhausted):
            client(n.url).get_block(100)
        assert len(n.calls) == 3
    finally:
        n.close()


def test_rpc_error_not_retried(node):
    with pytest.raises(RpcError):
        client(node.url).call("eth_bogus", [])
    assert node.calls == ["eth_bogus"]


def test_connection_refused_exhausts():
    with pytest.raises(RetryExhausted):
        client("http://127.0.0.1:9", attempts=2, timeout=0.5).get_block(1)


def test_env_endpoint(monkeypatch, node):
    monkeypatch.setenv("MEVFLOW_RPC_URL", node.url)
    assert RpcClient().endpoint == node.url
    monkeypatch.delenv("MEVFLOW_RPC_URL")
    with pytest.raises(RpcError):
        RpcClient()


def test_resolve_kinds_over_rpc(node):
    kinds = resolve_kinds([A, B], client(node.url))
    assert kinds == {Address(A): AddressKind.EOA, Address(B): AddressKind.CA}
