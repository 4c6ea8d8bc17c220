import pytest

from mevflow.chain import Address, Block, Transaction, erc20_transfer_log, erc721_transfer_log


def addr(n: int) -> Address:
    return Address(f"0x{n:040x}")


def make_tx(transfers=(), sender=None, to=None, index=0, block=1, selector=None, nfts=(), logs=(), trace=None,
            tx_hash=None):
    """transfers: (token, src, dst, amount); nfts: (collection, src, dst, token_id)."""
    out = []
    for token, src, dst, amount in transfers:
        out.append(erc20_transfer_log(token, src, dst, amount, len(out)))
    for collection, src, dst, token_id in nfts:
        out.append(erc721_transfer_log(collection, src, dst, token_id, len(out)))
    for entry in logs:
        out.append(entry.__class__(entry.address, entry.topics, entry.data, len(out)))
    return Transaction(
        hash=tx_hash or "0x" + f"{block:032x}{index:032x}",
        sender=sender if sender is not None else addr(0xAAAA),
        to=to,
        input_selector=selector,
        block_number=block,
        tx_index=index,
        logs=tuple(out),
        trace_calls=trace,
    )


def make_block(txs, number=1, builder=None):
    return Block(number, builder or addr(0xB0B), tuple(txs))


@pytest.fixture(scope="session")
def small_corpus():
    from mevflow.synthgen import GenConfig, gen_corpus
    return gen_corpus(GenConfig(blocks=12, seed=5))


# -- acceptance report ---------------------------------------------------------

_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or not (rep.when == "call" or rep.failed):
        return
    number, title = marker.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    status = "PASS" if rep.passed else "FAIL"
    _CRITERIA[number] = f"criterion {number:2d} {status}  {title}" + (f"  [{detail}]" if detail else "")


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
