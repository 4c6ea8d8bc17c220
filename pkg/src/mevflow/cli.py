"""Command-line entry point: ``mevflow <subcommand> ...``.

Every subcommand accepts ``--config FILE.toml`` (defaults read from the table
named after the subcommand, e.g. ``[train]``), ``--seed`` and ``--out``.
Results are written as JSON/JSONL files under ``--out``; a short summary goes
to standard output. Exit status: 0 ok, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .errors import MevflowError
from .features import FEATURE_GROUPS, SCHEMES, mask_feature_group, read_dataset, write_dataset
from .heuristics import BACK_MODES, FRONT_MODES, SandwichConfig, detect_nft_arbitrage, detect_sandwiches
from .ingest import CORPUS_SUFFIX, Corpus, CorpusHeader, dumps_line, load_corpus, resolve_kinds, save_corpus
from .labeler import DatasetConfig, build_dataset, label_block
from .metrics import Metrics, dominance_report, evaluate, metrics_from_labels
from .registry import ExchangeRegistry, load_registry

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("mevflow")

LAYER_KINDS = ("GCN", "SAGE", "GAT")


class UsageError(Exception):
    pass


# -- inputs -----------------------------------------------------------------

def _corpus_path(path: str | Path) -> Path:
    """A corpus file, or a directory holding exactly one."""
    path = Path(path)
    if path.is_dir():
        found = sorted(path.glob("*" + CORPUS_SUFFIX))
        if len(found) != 1:
            raise UsageError(f"{path}: expected one *{CORPUS_SUFFIX} file, found {len(found)}")
        return found[0]
    return path


def _load_input(path: str | Path, kinds: Optional[str] = None) -> Corpus:
    file = _corpus_path(path)
    if kinds is None and (file.parent / "kinds.jsonl").exists():
        kinds = str(file.parent / "kinds.jsonl")
    return load_corpus(file, kinds)


def _registry(path: Optional[str], corpus_input: Optional[str]) -> ExchangeRegistry:
    if path is not None:
        return load_registry(path)
    if corpus_input is not None:
        beside = _corpus_path(corpus_input).parent / "registry.json"
        if beside.exists():
            return load_registry(beside)
    from .synthgen import bundled_registry_path
    return load_registry(bundled_registry_path())


def _block_range(text: str) -> tuple[int, int]:
    try:
        lo, _, hi = text.partition(":")
        return int(lo), int(hi or lo)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected FIRST:LAST block numbers, got {text!r}") from None


def _block_list(text: str) -> list[int]:
    out = []
    try:
        for part in text.split(","):
            lo, _, hi = part.partition("-")
            out.extend(range(int(lo), int(hi or lo) + 1))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad block list {text!r}") from None
    return out


def _out_dir(args) -> Path:
    if args.out is None:
        raise UsageError("--out is required")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_jsonl(path: Path, rows) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(dumps_line(row))
            n += 1
    return n


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _read_jsonl(path: Path) -> list:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


# -- subcommands ------------------------------------------------------------

def cmd_gen(args) -> int:
    from .synthgen import GenConfig, gen_corpus
    kw = dict(blocks=args.blocks, seed=args.seed, start_block=args.start_block,
              benign_ratio=args.benign_ratio, mev_per_block=args.mev_per_block)
    if args.mix:
        kw["mev_mix"] = _weights(args.mix)
    if args.benign_mix:
        kw["benign_mix"] = _weights(args.benign_mix)
    if args.counts:
        kw["counts"] = {k: int(v) for k, v in _weights(args.counts).items()}
        kw["benign_total"] = args.benign_total
    result = gen_corpus(GenConfig(**kw), _out_dir(args))
    n_txs = sum(len(b.transactions) for b in result.blocks)
    print(f"generated {len(result.blocks)} blocks, {n_txs} transactions, {len(result.truth)} planted labels -> {args.out}")
    return 0


def _weights(text: str) -> dict:
    out = {}
    for part in text.split(","):
        name, sep, value = part.partition("=")
        if not sep:
            raise UsageError(f"expected NAME=WEIGHT pairs, got {part!r}")
        out[name.strip()] = float(value)
    return out


def cmd_ingest(args) -> int:
    corpus = load_corpus(args.corpus, args.kinds)
    out = _out_dir(args) / Path(args.corpus).name
    save_corpus(corpus, out)
    n_txs = sum(len(b.transactions) for b in corpus.blocks)
    print(f"ingested {len(corpus.blocks)} blocks, {n_txs} transactions, {len(corpus.kinds)} address kinds -> {out}")
    return 0


def cmd_fetch(args) -> int:
    from .rpc import RpcClient, fetch_blocks
    client = RpcClient(args.rpc, attempts=args.attempts)
    blocks = fetch_blocks(client, args.blocks, workers=args.workers)
    corpus = Corpus(CorpusHeader(source="rpc"), blocks)
    if args.resolve_kinds:
        seen = set()
        for block in blocks:
            for tx in block.transactions:
                seen.add(tx.sender)
                if tx.to is not None:
                    seen.add(tx.to)
        corpus.kinds = resolve_kinds(sorted(seen), client)
    out = _out_dir(args) / ("blocks" + CORPUS_SUFFIX)
    save_corpus(corpus, out)
    print(f"fetched {len(blocks)} blocks -> {out}")
    return 0


def cmd_detect_sandwich(args) -> int:
    config = SandwichConfig(args.front_mode, args.back_mode, args.require_victim, args.recipient_only)
    corpus = _load_input(args.input)
    pairs = [p for block in corpus.blocks for p in detect_sandwiches(block, config)]
    out = _out_dir(args) / "sandwiches.jsonl"
    _write_jsonl(out, (p.to_json() for p in pairs))
    print(f"{len(pairs)} sandwich pairs in {len(corpus.blocks)} blocks -> {out}")
    return 0


def cmd_detect_nft_arb(args) -> int:
    corpus = _load_input(args.input)
    reports = []
    for block in corpus.blocks:
        for tx in block.transactions:
            report = detect_nft_arbitrage(tx)
            if report is not None:
                reports.append(report)
    out = _out_dir(args) / "nft_arbitrage.jsonl"
    _write_jsonl(out, (r.to_json() for r in reports))
    print(f"{len(reports)} NFT arbitrages -> {out}")
    return 0


def cmd_label(args) -> int:
    corpus = _load_input(args.input)
    registry = _registry(args.registry, args.input)
    config = SandwichConfig(args.front_mode, args.back_mode, args.require_victim, args.recipient_only)
    labels = [label for block in corpus.blocks for label in label_block(block, registry, config)]
    out = _out_dir(args) / "labels.jsonl"
    _write_jsonl(out, (label.to_json() for label in labels))
    counts: dict[str, int] = {}
    for label in labels:
        counts[label.category] = counts.get(label.category, 0) + 1
    summary = ", ".join(f"{k}={counts[k]}" for k in sorted(counts)) or "none"
    print(f"{len(labels)} labels ({summary}) -> {out}")
    return 0


def cmd_dataset(args) -> int:
    blocks, kinds = [], None
    for path in args.inputs:
        corpus = _load_input(path)
        blocks.extend(corpus.blocks)
        if kinds is None:
            kinds = corpus.kinds
        else:
            kinds.update(corpus.kinds)
    registry = _registry(args.registry, args.inputs[0])
    if args.train_range is None or args.test_range is None:
        raise UsageError("--train-range and --test-range are required")
    cfg = DatasetConfig(args.seed, args.min_transfers, args.train_range, args.test_range, args.val_range)
    ds = build_dataset(blocks, registry, cfg, kinds)
    out = _out_dir(args)
    write_dataset(ds.train, out / "train.jsonl")
    write_dataset(ds.test, out / "test.jsonl")
    if ds.val:
        write_dataset(ds.val, out / "val.jsonl")
    _write_json(out / "provenance.json", ds.provenance)
    pos = lambda gs: sum(1 for g in gs if g.label == 1)
    print(f"train {len(ds.train)} ({pos(ds.train)} positive), val {len(ds.val)} ({pos(ds.val)} positive), "
          f"test {len(ds.test)} ({pos(ds.test)} positive) -> {out}")
    return 0


def _dataset_split(root: str, name: str, required: bool = True) -> list:
    path = Path(root)
    path = path / f"{name}.jsonl" if path.is_dir() else path
    if not path.exists():
        if required:
            raise UsageError(f"missing dataset split {path}")
        return []
    return read_dataset(path)


def _train_config(args):
    from .gnn import TrainConfig
    return TrainConfig(epochs=args.epochs, batch_size=args.batch_size, lr=args.lr, optimizer=args.optimizer,
                       seed=args.seed, weight_decay=args.weight_decay, dropout=args.dropout,
                       momentum=args.momentum)


def _fit(args, kind: str, train_set, val_set):
    from .gnn import init_model, train
    model = init_model(kind=kind, d_in=train_set[0].x.shape[1], hidden=args.hidden, n_layers=args.layers,
                       seed=args.seed, scheme=args.scheme)
    return train(model, train_set, val_set, _train_config(args))


def cmd_train(args) -> int:
    from .gnn import save_checkpoint
    train_set = _dataset_split(args.dataset, "train")
    val_set = _dataset_split(args.dataset, "val", required=False)
    best, history = _fit(args, args.kind, train_set, val_set)
    out = _out_dir(args)
    save_checkpoint(best, out / "model.arbinet.json")
    _write_jsonl(out / "history.jsonl", (h.to_json() for h in history))
    chosen = history[best.metadata["epoch"] - 1]
    print(f"{args.kind}: kept epoch {chosen.epoch} (val F1 {chosen.val_f1}) -> {out / 'model.arbinet.json'}")
    return 0


def cmd_infer(args) -> int:
    from .gnn import load_checkpoint, predict_proba
    model = load_checkpoint(args.model)
    graphs = _dataset_split(args.dataset, "test")
    proba = predict_proba(model, graphs)
    out = _out_dir(args) / "predictions.jsonl"
    rows = [{"tx": g.tx, "p_mev": float(p), "pred": int(p > 0.5)} for g, p in zip(graphs, proba)]
    _write_jsonl(out, rows)
    print(f"{sum(r['pred'] for r in rows)} of {len(rows)} graphs predicted MEV -> {out}")
    return 0


def _positives(path: Path, categories: Optional[set]) -> tuple[set, set]:
    """(positive tx hashes, every tx hash mentioned) from any result file."""
    if path.is_dir():
        names = ("predictions.jsonl", "labels.jsonl", "sandwiches.jsonl", "nft_arbitrage.jsonl", "truth.jsonl")
        found = [path / n for n in names if (path / n).exists()]
        if not found:
            raise UsageError(f"{path}: no result file found")
        path = found[0]
    positive, seen = set(), set()
    for row in _read_jsonl(path):
        if "front" in row:  # sandwich pair
            hashes, hit = [row["front"], row["back"]], True
        elif "pred" in row or "y" in row:  # per-graph prediction or dataset row
            hashes, hit = [row["tx"]], bool(row.get("pred", row.get("y")))
        else:  # label / truth / NFT report
            hashes = row["tx"] if isinstance(row["tx"], list) else [row["tx"]]
            hit = categories is None or row.get("category") in categories
        seen.update(hashes)
        if hit:
            positive.update(hashes)
    return positive, seen


def cmd_eval(args) -> int:
    if args.pred is None or args.truth is None:
        raise UsageError("--pred and --truth are required")
    categories = set(args.categories.split(",")) if args.categories else None
    predicted, seen_pred = _positives(Path(args.pred), categories)
    truth, seen_truth = _positives(Path(args.truth), categories)
    universe_src = args.universe
    if universe_src is None:
        truth_dir = Path(args.truth) if Path(args.truth).is_dir() else Path(args.truth).parent
        if list(truth_dir.glob("*" + CORPUS_SUFFIX)):
            universe_src = str(truth_dir)
    if universe_src is not None:
        corpus = _load_input(universe_src)
        universe = {tx.hash for b in corpus.blocks for tx in b.transactions}
    else:
        universe = seen_pred | seen_truth
    metrics: Metrics = evaluate(predicted, truth, universe)
    out = _out_dir(args) / "metrics.json"
    _write_json(out, metrics.to_json())
    print(f"P={metrics.precision:.4f} R={metrics.recall:.4f} F1={metrics.f1:.4f} "
          f"(tp={metrics.tp} fp={metrics.fp} fn={metrics.fn} tn={metrics.tn}) -> {out}")
    return 0


def cmd_ablate(args) -> int:
    from .gnn import predict
    train_set = _dataset_split(args.dataset, "train")
    val_set = _dataset_split(args.dataset, "val", required=False)
    test_set = _dataset_split(args.dataset, "test")
    groups = args.group or list(FEATURE_GROUPS)
    for g in groups:
        if g not in FEATURE_GROUPS:
            raise UsageError(f"unknown feature group {g!r}; choose from {', '.join(FEATURE_GROUPS)}")
    kinds = args.kinds.split(",") if args.kinds else list(LAYER_KINDS)
    for k in kinds:
        if k not in LAYER_KINDS:
            raise UsageError(f"unknown layer kind {k!r}")
    truth = [g.label for g in test_set]
    rows = []
    for group in ["none"] + groups:
        mask = (lambda gs: list(gs)) if group == "none" else (lambda gs, g=group: [mask_feature_group(x, g) for x in gs])
        tr, va, te = mask(train_set), mask(val_set), mask(test_set)
        row = {"excluded": group}
        for kind in kinds:
            best, _ = _fit(args, kind, tr, va)
            row[kind] = metrics_from_labels(predict(best, te), truth).f1
            log.info("ablate %s %s F1 %.4f", group, kind, row[kind])
        rows.append(row)
    out = _out_dir(args)
    _write_json(out / "ablation.json", {"kinds": kinds, "rows": rows})
    print("excluded".ljust(12) + "".join(k.rjust(9) for k in kinds))
    for row in rows:
        print(row["excluded"].ljust(12) + "".join(f"{row[k]:9.4f}" for k in kinds))
    return 0


def cmd_report_dominance(args) -> int:
    categories = set(args.categories.split(",")) if args.categories else None
    labels = [r for r in _read_jsonl(Path(args.labels)) if categories is None or r.get("category") in categories]
    report = dominance_report(labels, args.window)
    out = _out_dir(args) / "dominance.json"
    _write_json(out, report.to_json())
    print(f"{len(report.shares)} non-empty windows of {args.window} blocks -> {out}")
    return 0


def cmd_grad_check(args) -> int:
    from .gnn import init_model
    from .gnn.gradcheck import grad_check, random_feature_graph
    rng = np.random.default_rng(args.seed)
    kinds = args.kinds.split(",") if args.kinds else list(LAYER_KINDS)
    results = {}
    for kind in kinds:
        worst = 0.0
        for i in range(args.graphs):
            fg = random_feature_graph(rng, args.max_nodes)
            model = init_model(kind=kind, hidden=args.hidden, n_layers=args.layers, seed=args.seed + i, scheme="none")
            worst = max(worst, grad_check(model, fg, int(rng.integers(2)), eps=args.eps, seed=args.seed + i))
        results[kind] = worst
    ok = all(v < args.tolerance for v in results.values())
    out = _out_dir(args) / "gradcheck.json"
    _write_json(out, {"eps": args.eps, "tolerance": args.tolerance, "max_rel_error": results, "ok": ok})
    for kind, err in results.items():
        print(f"{kind}: max relative error {err:.3e} {'ok' if err < args.tolerance else 'FAIL'}")
    return 0 if ok else 1


# -- parser -----------------------------------------------------------------

def _sandwich_flags(p) -> None:
    p.add_argument("--front-mode", choices=FRONT_MODES, default="exists_negative")
    p.add_argument("--back-mode", choices=BACK_MODES, default="any_zero")
    p.add_argument("--require-victim", action="store_true")
    p.add_argument("--recipient-only", action="store_true")


def _model_flags(p) -> None:
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--scheme", choices=SCHEMES, default="log1p-counts")
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    p.add_argument("--weight-decay", type=float, default=0.0)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--momentum", type=float, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file; the table named after the subcommand supplies defaults")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="mevflow", description="Token-flow MEV detection toolkit.")
    parser.add_argument("--version", action="version", version=f"mevflow {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, parents=[common], help=help)
        p.set_defaults(func=func)
        return p

    p = add("gen", cmd_gen, "generate a synthetic corpus with planted MEV")
    p.add_argument("--blocks", type=int, default=100)
    p.add_argument("--start-block", type=int, default=1)
    p.add_argument("--benign-ratio", type=float, default=0.95)
    p.add_argument("--mev-per-block", type=int, default=2)
    p.add_argument("--mix", help="MEV category weights, e.g. S1=1,A1=2")
    p.add_argument("--benign-mix", help="benign category weights")
    p.add_argument("--counts", help="exact totals per category, e.g. A1=50,A2=50")
    p.add_argument("--benign-total", type=int, default=0, help="benign transactions to add with --counts")

    p = add("ingest", cmd_ingest, "validate a corpus file and write it back canonically")
    p.add_argument("corpus")
    p.add_argument("--kinds", help="address-kind sidecar to merge")

    p = add("fetch", cmd_fetch, "fetch blocks from a JSON-RPC node")
    p.add_argument("--blocks", type=_block_list, required=True, help="e.g. 100-105,110")
    p.add_argument("--rpc", help="endpoint URL (default: $MEVFLOW_RPC_URL)")
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--attempts", type=int, default=3)
    p.add_argument("--resolve-kinds", action="store_true", help="look up CA/EOA for senders and recipients")

    p = add("detect-sandwich", cmd_detect_sandwich, "pair front- and back-running transactions")
    p.add_argument("input", help="corpus file or directory")
    _sandwich_flags(p)

    p = add("detect-nft-arb", cmd_detect_nft_arb, "find NFT buy-and-resell arbitrage")
    p.add_argument("input")

    p = add("label", cmd_label, "label S1/S2 and A1-A5 with an exchange registry")
    p.add_argument("input")
    p.add_argument("--registry", help="registry JSON/TOML (default: beside the corpus, else bundled)")
    _sandwich_flags(p)

    p = add("dataset", cmd_dataset, "build train/val/test feature-graph datasets")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--registry")
    p.add_argument("--train-range", type=_block_range)
    p.add_argument("--test-range", type=_block_range)
    p.add_argument("--val-range", type=_block_range)
    p.add_argument("--min-transfers", type=int, default=2)

    p = add("train", cmd_train, "train a GNN classifier")
    p.add_argument("dataset", help="dataset directory")
    p.add_argument("--kind", choices=LAYER_KINDS, default="SAGE")
    _model_flags(p)

    p = add("infer", cmd_infer, "score feature graphs with a trained model")
    p.add_argument("dataset", help="dataset file or directory (test split)")
    p.add_argument("--model", required=True)

    p = add("eval", cmd_eval, "precision / recall / F1 of predictions against truth")
    p.add_argument("--pred")
    p.add_argument("--truth")
    p.add_argument("--universe", help="corpus whose transactions form the universe")
    p.add_argument("--categories", help="comma-separated categories to keep, e.g. S1,S2")

    p = add("ablate", cmd_ablate, "F1 with each feature group masked out")
    p.add_argument("dataset")
    p.add_argument("--group", action="append", help="feature group to mask (repeatable; default all)")
    p.add_argument("--kinds", help="comma-separated layer kinds (default GCN,SAGE,GAT)")
    _model_flags(p)

    p = add("report-dominance", cmd_report_dominance, "exchange-contract shares per block window")
    p.add_argument("labels", help="labels.jsonl")
    p.add_argument("--window", type=int, default=20_000)
    p.add_argument("--categories")

    p = add("grad-check", cmd_grad_check, "compare analytic and numeric gradients")
    p.add_argument("--kinds")
    p.add_argument("--graphs", type=int, default=20)
    p.add_argument("--max-nodes", type=int, default=10)
    p.add_argument("--hidden", type=int, default=8)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--tolerance", type=float, default=1e-3)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str], args) -> argparse.Namespace:
    """Re-parse with defaults taken from the subcommand's table in the config file."""
    try:
        with open(args.config, "rb") as fh:
            data = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from None
    table = data.get(args.command, {})
    if not isinstance(table, dict):
        raise UsageError(f"config: [{args.command}] must be a table")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions}
    defaults = {}
    for key, value in table.items():
        dest = key.replace("-", "_")
        if dest not in known or dest in ("config", "help"):
            raise UsageError(f"config: unknown key {key!r} in [{args.command}]")
        defaults[dest] = value
    sub.set_defaults(**defaults)
    for action in sub._actions:
        if action.dest in defaults:
            action.required = False
    return parser.parse_args(argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.config:
            args = _apply_config(parser, argv, args)
        return args.func(args)
    except UsageError as exc:
        print(f"mevflow {args.command}: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        return int(exc.code or 0)
    except (MevflowError, OSError, ValueError, KeyError) as exc:
        print(f"mevflow {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
