import json
from collections import Counter
from random import Random

import pytest
from hypothesis import given, settings, strategies as st

from mevflow.chain import Block
from mevflow.errors import GenerationError
from mevflow.flowgraph import build_graph, profits
from mevflow.heuristics import detect_nft_arbitrage, detect_sandwiches
from mevflow.ingest import load_corpus
from mevflow.labeler import label_block
from mevflow.registry import load_registry
from mevflow.synthgen import (CORPUS_FILE, MEV_CATEGORIES, NEGATIVE_CATEGORIES, REGISTRY_FILE, TRUTH_FILE, GenConfig,
                              PatternSpec, bundled_registry_path, fuzz_block, gen_corpus, gen_pattern, read_truth,
                              world)


def test_same_seed_same_bytes(tmp_path):
    cfg = GenConfig(blocks=6, seed=7)
    gen_corpus(cfg, tmp_path / "a")
    gen_corpus(cfg, tmp_path / "b")
    for name in (CORPUS_FILE, REGISTRY_FILE, TRUTH_FILE, "kinds.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    gen_corpus(GenConfig(blocks=6, seed=8), tmp_path / "c")
    assert (tmp_path / "a" / CORPUS_FILE).read_bytes() != (tmp_path / "c" / CORPUS_FILE).read_bytes()


def test_written_corpus_loads_back(tmp_path):
    result = gen_corpus(GenConfig(blocks=3, seed=1), tmp_path)
    corpus = load_corpus(tmp_path / CORPUS_FILE)
    assert corpus.blocks == result.blocks
    assert len(read_truth(tmp_path / TRUTH_FILE)) == len(result.truth)


def test_truth_count_matches_plan():
    counts = {"A1": 4, "A2": 3, "A3": 3, "A4": 3, "S1": 2, "S2": 2, "A5": 2, "A5-selftrade": 2}
    result = gen_corpus(GenConfig(blocks=5, seed=2, counts=counts, benign_total=20))
    got = Counter(l.category for l in result.truth)
    assert got == Counter({c: n for c, n in counts.items() if c in MEV_CATEGORIES})
    n_txs = sum(len(b.transactions) for b in result.blocks)
    # sandwiches add a victim, every other unit is one transaction
    assert n_txs == sum(counts.values()) + 20 + counts["S1"] + counts["S2"] + counts["S1"] + counts["S2"]


def test_benign_ratio_respected():
    result = gen_corpus(GenConfig(blocks=20, seed=3, mev_per_block=2, benign_ratio=0.95))
    mev_txs = sum(len(l.txs) for l in result.truth)
    total = sum(len(b.transactions) for b in result.blocks)
    assert (total - mev_txs) / total >= 0.95


@pytest.mark.parametrize("category", ["A1", "A2", "A3", "A4"])
def test_margin_is_taker_profit(category):
    exact = 0
    for seed in range(12):
        txs, truth = gen_pattern(PatternSpec(category, margin=10), seed=seed)
        [label] = truth
        gains = [v for v in label.profit.values() if v > 0]
        assert len(gains) == 1 and 1 <= gains[0] <= 10  # a builder tip may take part of it
        exact += gains[0] == 10
    assert exact > 0


@pytest.mark.parametrize("variant", ["two-dex", "triangle", "direct"])
def test_a1_variants(variant):
    _, [label] = gen_pattern(PatternSpec("A1", variant=variant), seed=4)
    assert label.category == "A1"


def test_nft_mirror_pattern():
    spec = PatternSpec("A5", paid=135 * 10 ** 16, received=1395 * 10 ** 15, token_id=9795)
    txs, [label] = gen_pattern(spec, seed=0)
    reports = [r for r in map(detect_nft_arbitrage, txs) if r is not None]
    assert len(reports) == 1
    assert reports[0].margin == 45 * 10 ** 15 and reports[0].token_id == 9795
    assert label.category == "A5"


def test_selftrade_is_negative():
    txs, truth = gen_pattern(PatternSpec("A5-selftrade"), seed=3)
    assert truth == [] and all(detect_nft_arbitrage(tx) is None for tx in txs)


@pytest.mark.parametrize("spec", [
    dict(category="A9"),
    dict(category="A1", margin=0),
    dict(category="A5", paid=10),
    dict(category="A5", paid=10, received=10),
])
def test_infeasible_specs_rejected(spec):
    with pytest.raises(GenerationError):
        PatternSpec(**spec)


def test_bad_config_rejected():
    with pytest.raises(GenerationError):
        GenConfig(blocks=0)
    with pytest.raises(GenerationError):
        GenConfig(benign_ratio=1.0)
    with pytest.raises(GenerationError):
        GenConfig(mev_mix={"A7": 1})
    with pytest.raises(GenerationError):
        GenConfig(counts={"A1": -1})


def test_bundled_registry_matches_world():
    assert load_registry(bundled_registry_path()).to_json() == world().registry.to_json()


def test_reserved_address_space():
    w = world()
    for a in list(w.tokens) + list(w.users[:10]) + list(w.bots):
        assert a.startswith("0x5eed")


def test_labels_equal_truth(small_corpus):
    got = [l.to_json() for b in small_corpus.blocks for l in label_block(b, small_corpus.registry)]
    assert got == [l.to_json() for l in small_corpus.truth]


def test_sandwich_truth_found_by_detector(small_corpus):
    planted = {tuple(t.hash for t in l.txs) for l in small_corpus.truth if l.category in ("S1", "S2")}
    found = {(p.front.hash, p.back.hash) for b in small_corpus.blocks for p in detect_sandwiches(b)}
    assert planted <= found


def test_negative_categories_unlabelled():
    for category in NEGATIVE_CATEGORIES:
        txs, truth = gen_pattern(PatternSpec(category), seed=1)
        assert truth == []
        assert label_block(Block(1, txs[0].sender, tuple(txs)), world().registry) == []


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_generated_blocks_conserve(seed):
    result = gen_corpus(GenConfig(blocks=1, seed=seed, start_block=seed % 1000 + 1, verify=False))
    for block in result.blocks:
        for tx in block.transactions:
            net = profits(build_graph(tx))
            totals = Counter()
            for per_token in net.values():
                for token, v in per_token.items():
                    totals[token] += v
            assert all(v == 0 for v in totals.values())


def test_fuzz_block_is_deterministic():
    a = fuzz_block(Random(3), 5)
    b = fuzz_block(Random(3), 5)
    assert a == b and a.number == 5 and len(a.transactions) == 30
    assert json.dumps([t.hash for t in a.transactions]) == json.dumps([t.hash for t in b.transactions])
