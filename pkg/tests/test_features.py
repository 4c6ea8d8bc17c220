import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mevflow.chain import NULL_ADDRESS
from mevflow.errors import FeatureError
from mevflow.features import (FEATURE_GROUPS, N_FEATURES, FeatureContext, extract_features, mask_feature_group,
                              read_dataset, scale_features, write_dataset)
from mevflow.flowgraph import build_graph
from mevflow.ingest import AddressKind, AddressKindMap

from conftest import addr, make_tx

X, Y = addr(0x10), addr(0x11)
TAKER, P1, P2, OWNER, BUILDER = addr(1), addr(2), addr(3), addr(4), addr(5)


def loop_graph():
    tx = make_tx([(X, TAKER, P1, 100), (Y, P1, TAKER, 50), (Y, TAKER, P2, 50), (X, P2, TAKER, 110)],
                 sender=OWNER, to=TAKER)
    kinds = AddressKindMap({TAKER: AddressKind.CA, P1: AddressKind.CA, OWNER: AddressKind.EOA})
    return extract_features(build_graph(tx), FeatureContext(BUILDER, OWNER, TAKER, kinds))


def row(fg, a):
    return fg.x[fg.nodes.index(a)]


def test_burn_to_null():
    tx = make_tx([(X, addr(7), NULL_ADDRESS, 3)])
    fg = extract_features(build_graph(tx), FeatureContext(BUILDER, addr(7), None))
    r = row(fg, NULL_ADDRESS)
    assert (r[6], r[4], r[12], r[0], r[1]) == (1, 1, 1, 0, 1)
    assert r[8] == 1.0  # null address reads as a contract


def test_loop_taker_node():
    fg = loop_graph()
    r = row(fg, TAKER)
    assert (r[1], r[2], r[0], r[3], r[4]) == (1, 1, 0, 2, 2)
    assert (r[9], r[10], r[8]) == (0, 1, 1.0)
    assert row(fg, P2)[8] == 0.5  # unknown kind
    assert row(fg, P1)[10] == 0


def test_builder_and_sender_flags():
    tx = make_tx([(X, OWNER, BUILDER, 1)], sender=OWNER, to=TAKER)
    fg = extract_features(build_graph(tx), FeatureContext(BUILDER, OWNER, TAKER))
    assert row(fg, BUILDER)[7] == 1 and row(fg, OWNER)[9] == 1 and row(fg, OWNER)[7] == 0


def test_empty_tx():
    fg = extract_features(build_graph(make_tx()), FeatureContext(BUILDER, OWNER, None))
    assert fg.n_nodes == 0 and fg.x.shape == (0, N_FEATURES) and fg.edges.shape == (0, 2)


def test_edges_deduplicated_without_self_loops():
    tx = make_tx([(X, TAKER, P1, 1), (Y, TAKER, P1, 1), (X, TAKER, TAKER, 1)])
    fg = extract_features(build_graph(tx), FeatureContext(BUILDER, OWNER, None))
    assert fg.edges.tolist() == [[0, 1]]


def test_scaling():
    fg = loop_graph()
    scaled = scale_features(fg, "log1p-counts")
    assert scaled.scheme == "log1p-counts"
    r = row(scaled, TAKER)
    assert r[1] == pytest.approx(math.log(2)) and r[0] == 0
    assert r[10] == 1 and r[8] == 1.0  # indicators untouched
    assert scale_features(fg, "none") is fg
    with pytest.raises(FeatureError):
        scale_features(fg, "zscore")


def test_masking():
    fg = loop_graph()
    masked = mask_feature_group(fg, "profits")
    assert not masked.x[:, :3].any() and masked.masked == ("profits",)
    again = mask_feature_group(masked, "profits")
    assert np.array_equal(again.x, masked.x) and again.masked == ("profits",)
    addresses = mask_feature_group(fg, "addresses")
    assert row(addresses, TAKER)[9] == 0 and row(addresses, TAKER)[10] == 0
    assert addresses.x.shape[1] == N_FEATURES
    with pytest.raises(FeatureError):
        mask_feature_group(fg, "colour")


def test_groups_cover_all_columns_once():
    cols = sorted(c for group in FEATURE_GROUPS.values() for c in group)
    assert cols == list(range(N_FEATURES))


def test_dataset_round_trip(tmp_path):
    fg = loop_graph().with_label(1)
    path = tmp_path / "d.jsonl"
    write_dataset([fg, fg.with_label(0)], path)
    a, b = read_dataset(path)
    assert np.array_equal(a.x, fg.x) and np.array_equal(a.edges, fg.edges)
    assert (a.label, b.label, a.tx) == (1, 0, fg.tx)


def test_dataset_rejects_bad_rows(tmp_path):
    path = tmp_path / "d.jsonl"
    path.write_text('{"tx":"t","nodes":2,"edges":[],"x":[' + ",".join(["0"] * 14) + '],"y":0}\n')
    with pytest.raises(FeatureError):
        read_dataset(path)


transfer_rows = st.lists(st.tuples(st.integers(0, 2), st.integers(0, 5), st.integers(0, 5), st.integers(0, 50)),
                         min_size=1, max_size=25)


def _fg(rows):
    who = lambda i: NULL_ADDRESS if i == 0 else addr(i)
    tx = make_tx([(addr(0x100 + t), who(s), who(d), v) for t, s, d, v in rows], sender=addr(1), to=addr(2))
    return extract_features(build_graph(tx), FeatureContext(addr(3), addr(1), addr(2))), len(rows)


@given(transfer_rows)
def test_count_invariants(rows):
    fg, n = _fg(rows)
    x = fg.x
    assert np.all(x[:, 11] >= x[:, 3]) and np.all(x[:, 12] >= x[:, 4])
    assert x[:, 11].sum() == x[:, 12].sum() == n
    assert np.all(x[:, 13] == n) and np.all(x[:, 5] == x[0, 5])
    assert len(fg.edges) <= n


@settings(deadline=None)
@given(transfer_rows, st.randoms(use_true_random=False))
def test_permutation_equivariance(rows, rnd):
    fg, _ = _fg(rows)
    perm = list(range(fg.n_nodes))
    rnd.shuffle(perm)
    moved = fg.permuted(np.array(perm))
    assert np.array_equal(moved.x, fg.x[perm])
    before = {(fg.nodes[s], fg.nodes[d]) for s, d in fg.edges}
    after = {(moved.nodes[s], moved.nodes[d]) for s, d in moved.edges}
    assert before == after
