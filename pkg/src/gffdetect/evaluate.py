"""Classification metrics and the ablation harness."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import LengthMismatch, SingleClass
from .gff import GffConfig
from .ingest import VideoObservations
from .net.model import ModelConfig
from .net.train import TrainConfig, extract_features, fit, model_config_for
from .net.model import video_scores
from .tracker import TrackerConfig

log = logging.getLogger(__name__)

REPORT_COLUMNS = ("variant", "f_measure", "accuracy", "roc_auc", "tp", "fp", "tn", "fn")

# Desk-scale recipe for the synthetic multi-face benchmark: 20 epochs instead
# of 100 need a larger step, and max aggregation trains reliably from scratch
# where the fc aggregator often stalls at 200 training videos.
BENCHMARK_TRAIN = dict(lr=0.01, epochs=20)
BENCHMARK_MODEL = dict(agg_mode="max")


def _arrays(preds, labels):
    p = np.asarray(preds, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1).astype(int)
    if p.shape != y.shape:
        raise LengthMismatch(f"{p.size} predictions vs {y.size} labels")
    if p.size == 0:
        raise LengthMismatch("need at least one prediction")
    return p, y


def confusion(preds, labels, threshold: float = 0.5) -> tuple[int, int, int, int]:
    """(tp, fp, tn, fn); a score at or above ``threshold`` is a positive call."""
    p, y = _arrays(preds, labels)
    hit = p >= threshold
    tp = int(np.sum(hit & (y == 1)))
    fp = int(np.sum(hit & (y == 0)))
    tn = int(np.sum(~hit & (y == 0)))
    fn = int(np.sum(~hit & (y == 1)))
    return tp, fp, tn, fn


def f_measure(preds, labels, threshold: float = 0.5) -> float:
    """F1 at ``threshold``; 0 when precision + recall is 0."""
    tp, fp, _, fn = confusion(preds, labels, threshold)
    # 2PR/(P+R) reduces to 2tp/(2tp+fp+fn)
    return 2 * tp / (2 * tp + fp + fn) if tp else 0.0


def accuracy(preds, labels, threshold: float = 0.5) -> float:
    tp, _, tn, _ = confusion(preds, labels, threshold)
    return (tp + tn) / len(labels)


def roc_auc(preds, labels) -> float:
    """Mann-Whitney AUC from average ranks; tied pairs count one half."""
    p, y = _arrays(preds, labels)
    n_pos = int(np.sum(y == 1))
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("roc_auc needs both classes")
    order = np.argsort(p, kind="mergesort")
    sorted_p = p[order]
    ranks = np.empty(p.size)
    start = 0
    while start < p.size:
        end = start
        while end + 1 < p.size and sorted_p[end + 1] == sorted_p[start]:
            end += 1
        ranks[order[start:end + 1]] = (start + end) / 2.0 + 1.0
        start = end + 1
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass(frozen=True)
class MetricsReport:
    f_measure: float
    accuracy: float
    roc_auc: float
    threshold: float
    n: int
    confusion: tuple[int, int, int, int]

    @classmethod
    def compute(cls, preds, labels, threshold: float = 0.5) -> "MetricsReport":
        p, y = _arrays(preds, labels)
        try:
            auc = roc_auc(p, y)
        except SingleClass:
            auc = float("nan")
        return cls(f_measure(p, y, threshold), accuracy(p, y, threshold), auc, threshold, int(y.size),
                   confusion(p, y, threshold))


@dataclass(frozen=True)
class Variant:
    name: str
    use_geometry: bool = True
    num_layers: int = 2
    kernel_sizes: tuple[int, ...] = (1, 2, 3, 4, 6, 8)


VARIANTS = {
    "gff": Variant("gff"),
    "fakeness_only": Variant("fakeness_only", use_geometry=False),
    "modified_cnnblock": Variant("modified_cnnblock", num_layers=1, kernel_sizes=(1, 2, 3, 4)),
}


def split_indices(n: int, seed: int, test_fraction: float = 0.2) -> tuple[np.ndarray, np.ndarray]:
    perm = np.random.default_rng(seed).permutation(n)
    n_test = int(round(n * test_fraction))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def kfold_indices(n: int, folds: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    perm = np.random.default_rng(seed).permutation(n)
    chunks = np.array_split(perm, folds)
    return [(np.sort(np.concatenate(chunks[:i] + chunks[i + 1:])), np.sort(chunks[i])) for i in range(folds)]


def _variant_configs(variant: Variant, gff_cfg: GffConfig, model_overrides: dict) -> tuple[GffConfig, ModelConfig]:
    g = replace(gff_cfg, use_geometry=variant.use_geometry)
    overrides = dict(model_overrides)
    overrides.update(num_layers=variant.num_layers, kernel_sizes=variant.kernel_sizes)
    return g, model_config_for(g, **overrides)


def _run_variant(args) -> tuple[str, MetricsReport]:
    variant, features, labels, splits, model_cfg, train_cfg, threshold = args
    preds = np.zeros(len(labels))
    covered = np.zeros(len(labels), dtype=bool)
    for train_idx, test_idx in splits:
        params, _ = fit([features[i] for i in train_idx], [labels[i] for i in train_idx], model_cfg, train_cfg)
        for i in test_idx:
            preds[i], _ = video_scores(features[i], params, model_cfg)
        covered[test_idx] = True
    report = MetricsReport.compute(preds[covered], np.asarray(labels)[covered], threshold)
    log.info("%s: F=%.4f acc=%.4f auc=%.4f", variant.name, report.f_measure, report.accuracy, report.roc_auc)
    return variant.name, report


def ablation_run(
    dataset: Sequence[tuple[VideoObservations, int]],
    variants: Sequence[Variant | str] = ("gff", "fakeness_only", "modified_cnnblock"),
    train_cfg: TrainConfig | None = None,
    gff_cfg: GffConfig | None = None,
    tracker_cfg: TrackerConfig | None = None,
    split_seed: int | None = None,
    folds: int | None = None,
    threshold: float = 0.5,
    model_overrides: dict | None = None,
    jobs: int = 1,
) -> list[tuple[str, MetricsReport]]:
    """Train and test every variant on the same split; one report row per variant.

    Default split is a seeded 80:20 hold-out; ``folds`` switches to k-fold
    cross-validation with predictions pooled over the folds.
    """
    train_cfg = train_cfg or TrainConfig()
    tracker_cfg = tracker_cfg or TrackerConfig()
    videos = [v for v, _ in dataset]
    labels = [int(y) for _, y in dataset]
    gff_cfg = gff_cfg or GffConfig(fakeness_channels=videos[0].fakeness_channels if videos else 1)
    split_seed = train_cfg.seed if split_seed is None else split_seed
    splits = kfold_indices(len(videos), folds, split_seed) if folds else [split_indices(len(videos), split_seed)]

    feature_cache: dict = {}
    tasks = []
    for v in variants:
        variant = VARIANTS[v] if isinstance(v, str) else v
        g, mcfg = _variant_configs(variant, gff_cfg, model_overrides or {})
        if g not in feature_cache:
            feature_cache[g] = extract_features(videos, g, tracker_cfg, jobs)
        tasks.append((variant, feature_cache[g], labels, splits, mcfg, train_cfg, threshold))

    if jobs > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_variant, tasks))
    return [_run_variant(t) for t in tasks]


def report_csv(rows: Sequence[tuple[str, MetricsReport]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for name, r in rows:
        writer.writerow([name, repr(r.f_measure), repr(r.accuracy), repr(r.roc_auc), *r.confusion])
    return buf.getvalue()


def report_table(rows: Sequence[tuple[str, MetricsReport]]) -> str:
    lines = [f"{'variant':<20} {'F-measure':>9} {'accuracy':>9} {'ROC-AUC':>9}   tp   fp   tn   fn"]
    for name, r in rows:
        tp, fp, tn, fn = r.confusion
        lines.append(f"{name:<20} {r.f_measure:>9.4f} {r.accuracy:>9.4f} {r.roc_auc:>9.4f} {tp:>4} {fp:>4} {tn:>4} {fn:>4}")
    return "\n".join(lines)
