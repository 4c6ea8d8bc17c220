import pytest
from Crypto.Hash import keccak
from hypothesis import given, strategies as st

from mevflow import synthgen
from mevflow.chain import (NULL_ADDRESS, TRANSFER_TOPIC, Address, Block, Log, Transaction, decode_transfers,
                           erc20_transfer_log, normalize_address)
from mevflow.errors import AddressError, DecodeError

from conftest import addr, make_tx


def k256(text: str) -> bytes:
    return keccak.new(digest_bits=256, data=text.encode()).digest()


@pytest.mark.parametrize("constant, signature, size", [
    (TRANSFER_TOPIC, "Transfer(address,address,uint256)", 32),
    (synthgen.SWAP_V2_TOPIC, "Swap(address,uint256,uint256,uint256,uint256,address)", 32),
    (synthgen.SWAP_V3_TOPIC, "Swap(address,address,int256,int256,uint160,uint128,int24)", 32),
    (synthgen.SET_REDEEMED_TOPIC, "SetTokenRedeemed(address,address,address,uint256,address,uint256)", 32),
    (synthgen.MINT_TOPIC, "Mint(address,uint256,uint256)", 32),
    (synthgen.BURN_TOPIC, "Burn(address,uint256,uint256,address)", 32),
])
def test_event_hashes_match_keccak(constant, signature, size):
    assert constant == k256(signature)[:size]


@pytest.mark.parametrize("selector, signature", [
    (synthgen.SEL_ENTER, "enter(uint256)"),
    (synthgen.SEL_LEAVE, "leave(uint256)"),
    (synthgen.SEL_TRANSFER, "transfer(address,uint256)"),
    (synthgen.SEL_SWAP_ROUTER, "swapExactTokensForTokens(uint256,uint256,address[],address,uint256)"),
    (synthgen.SEL_ADD_LIQUIDITY, "addLiquidity(address,address,uint256,uint256,uint256,uint256,address,uint256)"),
    (synthgen.SEL_REMOVE_LIQUIDITY, "removeLiquidity(address,address,uint256,uint256,uint256,address,uint256)"),
    (synthgen.SEL_POOL_SWAP, "swap(uint256,uint256,address,bytes)"),
    (synthgen.SEL_EXECUTE, "execute(bytes)"),
    (synthgen.SEL_DISPERSE, "disperse(address,address[],uint256[])"),
    (synthgen.SEL_NFT_TRANSFER, "safeTransferFrom(address,address,uint256)"),
])
def test_selectors_match_keccak(selector, signature):
    assert selector == "0x" + k256(signature)[:4].hex()


def test_normalize_uniswap_row():
    a = normalize_address("0xD34D4916440DBa56A5719af981e646d69C9Cec0d")
    assert a == "0xd34d4916440dba56a5719af981e646d69c9cec0d"
    assert a.raw == bytes.fromhex("d34d4916440dba56a5719af981e646d69c9cec0d")
    assert len(a) == 42


def test_null_address():
    a = normalize_address("0x" + "0" * 40)
    assert a == NULL_ADDRESS and a.is_null and a.raw == bytes(20)


@pytest.mark.parametrize("bad", ["0x123", "d34d4916440dba56a5719af981e646d69c9cec0d", "0x" + "g" * 40, "0x" + "0" * 41])
def test_normalize_rejects(bad):
    with pytest.raises(AddressError):
        normalize_address(bad)


@given(st.binary(min_size=20, max_size=20))
def test_address_round_trip(raw):
    a = Address(raw)
    assert Address(a.upper().replace("0X", "0x")) == a
    assert a.raw == raw


def test_decode_erc20():
    tx = make_tx([(addr(1), addr(2), addr(3), 5)])
    tokens, nfts = decode_transfers(tx)
    assert nfts == []
    [t] = tokens
    assert (t.token, t.sender, t.recipient, t.amount, t.log_index) == (addr(1), addr(2), addr(3), 5, 0)


def test_decode_erc721():
    tx = make_tx(nfts=[(addr(9), addr(2), addr(3), 9795)])
    tokens, nfts = decode_transfers(tx)
    assert tokens == []
    [n] = nfts
    assert (n.collection, n.sender, n.recipient, n.token_id) == (addr(9), addr(2), addr(3), 9795)


def test_decode_empty():
    assert decode_transfers(make_tx()) == ([], [])


def test_decode_ignores_other_events():
    other = Log(addr(1), (synthgen.SWAP_V2_TOPIC, bytes(32)), b"\x00" * 128, 0)
    two_topics = Log(addr(1), (TRANSFER_TOPIC, bytes(32)), b"\x00" * 32, 1)
    tx = make_tx(logs=[other, two_topics])
    assert decode_transfers(tx) == ([], [])


def test_decode_bad_erc20_data_names_log():
    bad = Log(addr(1), (TRANSFER_TOPIC, bytes(32), bytes(32)), b"\x01" * 31, 7)
    tx = Transaction("0x" + "11" * 32, addr(5), addr(6), None, 1, 0, (bad,))
    with pytest.raises(DecodeError) as err:
        decode_transfers(tx)
    assert err.value.log_index == 7


def test_decode_bad_erc721_data():
    bad = Log(addr(1), (TRANSFER_TOPIC, bytes(32), bytes(32), bytes(32)), b"\x01", 3)
    tx = Transaction("0x" + "11" * 32, addr(5), addr(6), None, 1, 0, (bad,))
    with pytest.raises(DecodeError):
        decode_transfers(tx)


def test_zero_amount_transfer_kept():
    tokens, _ = decode_transfers(make_tx([(addr(1), addr(2), addr(3), 0)]))
    assert tokens[0].amount == 0


def test_log_topic_limit():
    with pytest.raises(ValueError):
        Log(addr(1), (bytes(32),) * 5, b"", 0)


def test_block_requires_order():
    a = make_tx(index=1)
    b = make_tx(index=0)
    with pytest.raises(ValueError):
        Block(1, addr(1), (a, b))


def test_tx_logs_must_be_ordered():
    logs = (erc20_transfer_log(addr(1), addr(2), addr(3), 1, 5), erc20_transfer_log(addr(1), addr(2), addr(3), 1, 4))
    with pytest.raises(ValueError):
        Transaction("0x" + "11" * 32, addr(5), addr(6), None, 1, 0, logs)


@given(st.lists(st.tuples(st.integers(1, 4), st.integers(1, 6), st.integers(1, 6), st.integers(0, 2 ** 256 - 1)),
                max_size=12))
def test_decode_order_and_token_origin(rows):
    tx = make_tx([(addr(t), addr(s), addr(d), v) for t, s, d, v in rows])
    tokens, _ = decode_transfers(tx)
    assert [t.log_index for t in tokens] == sorted({t.log_index for t in tokens})
    for t, log in zip(tokens, tx.logs):
        assert t.token == log.address
    assert [t.amount for t in tokens] == [r[3] for r in rows]
