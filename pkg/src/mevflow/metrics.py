"""Confusion-matrix metrics and per-window contract dominance."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Hashable, Iterable, Mapping

from .errors import MetricsError


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def precision_recall_f1(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """Zero denominators give 0 rather than raising."""
    p = _ratio(tp, tp + fp)
    r = _ratio(tp, tp + fn)
    return p, r, _ratio(2 * p * r, p + r)


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def precision(self) -> float:
        return precision_recall_f1(self.tp, self.fp, self.fn)[0]

    @property
    def recall(self) -> float:
        return precision_recall_f1(self.tp, self.fp, self.fn)[1]

    @property
    def f1(self) -> float:
        return precision_recall_f1(self.tp, self.fp, self.fn)[2]

    @property
    def accuracy(self) -> float:
        return _ratio(self.tp + self.tn, self.tp + self.fp + self.fn + self.tn)

    def to_json(self) -> dict:
        out = asdict(self)
        out.update(precision=self.precision, recall=self.recall, f1=self.f1, accuracy=self.accuracy)
        return out


def evaluate(predicted: Iterable[Hashable], truth: Iterable[Hashable],
             universe: Iterable[Hashable]) -> Metrics:
    predicted, truth, universe = set(predicted), set(truth), set(universe)
    stray = predicted - universe
    if stray:
        raise MetricsError(f"{len(stray)} predictions outside the universe, e.g. {next(iter(stray))!r}")
    stray = truth - universe
    if stray:
        raise MetricsError(f"{len(stray)} truth items outside the universe, e.g. {next(iter(stray))!r}")
    tp = len(predicted & truth)
    fp = len(predicted - truth)
    fn = len(truth - predicted)
    return Metrics(tp, fp, fn, len(universe) - tp - fp - fn)


def metrics_from_labels(pred, truth) -> Metrics:
    """Metrics for parallel 0/1 sequences."""
    pred, truth = list(pred), list(truth)
    if len(pred) != len(truth):
        raise MetricsError(f"{len(pred)} predictions for {len(truth)} labels")
    tp = sum(1 for p, t in zip(pred, truth) if p and t)
    fp = sum(1 for p, t in zip(pred, truth) if p and not t)
    fn = sum(1 for p, t in zip(pred, truth) if not p and t)
    return Metrics(tp, fp, fn, len(pred) - tp - fp - fn)


@dataclass(frozen=True)
class DominanceReport:
    window: int
    shares: dict  # window start block -> {contract: share}

    def to_json(self) -> dict:
        return {
            "window": self.window,
            "windows": [
                {"start": start, "end": start + self.window - 1, "shares": dict(sorted(s.items()))}
                for start, s in sorted(self.shares.items())
            ],
        }


def dominance_report(labels: Iterable[Mapping], window_blocks: int) -> DominanceReport:
    """Share of exchange-contract uses per block window.

    Each label is a mapping with ``block`` and ``contracts``. Every listed
    contract use counts once, and counts are normalised within the window.
    Windows are aligned to multiples of ``window_blocks``; empty ones are
    left out.
    """
    if window_blocks <= 0:
        raise MetricsError("window size must be positive")
    counts: dict[int, dict] = {}
    for label in labels:
        contracts = label.get("contracts") or ()
        if not contracts:
            continue
        start = (label["block"] // window_blocks) * window_blocks
        bucket = counts.setdefault(start, {})
        for c in contracts:
            bucket[c] = bucket.get(c, 0) + 1
    shares = {}
    for start, bucket in counts.items():
        total = sum(bucket.values())
        shares[start] = {c: n / total for c, n in bucket.items()}
    return DominanceReport(window_blocks, shares)
