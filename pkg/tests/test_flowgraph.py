import random

from hypothesis import given, strategies as st

from mevflow.chain import NULL_ADDRESS
from mevflow.flowgraph import build_graph, graph_from_transfers, profits, scope_profits, taker_profits, taker_scope

from conftest import addr, make_tx

X, Y = addr(0x10), addr(0x11)
TAKER, P1, P2, OWNER = addr(1), addr(2), addr(3), addr(4)


def figure_loop(sender=OWNER, to=TAKER):
    return make_tx([(X, TAKER, P1, 100), (Y, P1, TAKER, 50), (Y, TAKER, P2, 50), (X, P2, TAKER, 110)],
                   sender=sender, to=to)


def test_one_transfer():
    g = build_graph(make_tx([(X, addr(1), addr(2), 5)]))
    assert len(g.nodes) == 2 and len(g.edges) == 1
    assert profits(g) == {addr(1): {X: -5}, addr(2): {X: 5}}


def test_empty():
    g = build_graph(make_tx())
    assert g.nodes == () and g.edges == () and profits(g) == {}


def test_three_node_loop():
    a, b, c = addr(1), addr(2), addr(3)
    g = build_graph(make_tx([(X, a, b, 1), (Y, b, c, 1), (X, c, a, 1)]))
    assert len(g.nodes) == 3 and len(g.edges) == 3 and len(g.tokens) == 2


def test_cancellation_keeps_zeros():
    g = build_graph(make_tx([(X, addr(1), addr(2), 5), (X, addr(2), addr(1), 5)]))
    assert profits(g) == {addr(1): {X: 0}, addr(2): {X: 0}}


def test_loop_taker_row():
    net = profits(build_graph(figure_loop()))
    assert net[TAKER] == {X: 10, Y: 0}


def test_taker_profits_additive():
    tx = make_tx([(X, P1, OWNER, 10), (X, TAKER, P1, 3), (Y, P2, TAKER, 1)], sender=OWNER, to=TAKER)
    assert taker_profits(tx, build_graph(tx)) == {X: 7, Y: 1}


def test_taker_profits_same_address_once():
    tx = make_tx([(X, P1, OWNER, 10)], sender=OWNER, to=OWNER)
    assert taker_scope(tx) == (OWNER,)
    assert taker_profits(tx, build_graph(tx)) == {X: 10}


def test_taker_profits_sender_only_when_no_recipient():
    tx = make_tx([(X, P1, OWNER, 10), (X, P1, TAKER, 4)], sender=OWNER, to=None)
    assert taker_profits(tx, build_graph(tx)) == {X: 10}


def test_taker_profits_loop_equals_taker_row():
    tx = figure_loop()
    assert taker_profits(tx, build_graph(tx)) == profits(build_graph(tx))[TAKER]


def test_recipient_only_mode():
    tx = make_tx([(X, P1, OWNER, 10), (X, P1, TAKER, 4)], sender=OWNER, to=TAKER)
    assert taker_profits(tx, build_graph(tx), recipient_only=True) == {X: 4}


def test_scope_profits_ignores_duplicates():
    net = {addr(1): {X: 3}}
    assert scope_profits(net, [addr(1), addr(1)]) == {X: 3}


transfers = st.lists(
    st.tuples(st.integers(0, 3), st.integers(0, 6), st.integers(0, 6), st.integers(0, 2 ** 256 - 1)),
    max_size=40,
)


def _tx(rows):
    def who(i):
        return NULL_ADDRESS if i == 0 else addr(i)
    return make_tx([(addr(0x100 + t), who(s), who(d), v) for t, s, d, v in rows])


@given(transfers)
def test_conservation(rows):
    net = profits(build_graph(_tx(rows)))
    totals = {}
    for row in net.values():
        for token, v in row.items():
            totals[token] = totals.get(token, 0) + v
    assert all(v == 0 for v in totals.values())


@given(transfers, st.randoms(use_true_random=False))
def test_profits_depend_on_edge_multiset(rows, rnd):
    g = build_graph(_tx(rows))
    shuffled = list(g.edges)
    rnd.shuffle(shuffled)
    assert profits(g) == profits(graph_from_transfers(g.tx, []).__class__(g.tx, g.nodes, tuple(shuffled), g.tokens))


@given(transfers)
def test_edge_count_matches_transfers(rows):
    g = build_graph(_tx(rows))
    assert len(g.edges) == len(rows)
    assert {e.src for e in g.edges} | {e.dst for e in g.edges} == set(g.nodes)
    assert {e.token for e in g.edges} == set(g.tokens)


def test_conservation_on_generated_blocks():
    from mevflow.synthgen import fuzz_block
    rng = random.Random(3)
    for n in range(20):
        for tx in fuzz_block(rng, n + 1).transactions:
            net = profits(build_graph(tx))
            tokens = {t for row in net.values() for t in row}
            for t in tokens:
                assert sum(row.get(t, 0) for row in net.values()) == 0
