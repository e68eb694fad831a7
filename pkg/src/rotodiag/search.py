"""Grid search with file-aware CV, leaderboards, and greedy feature selection.

Every configuration is scored by k-fold cross-validation on the training
split only: per fold the scaler is refit, augmentation is rerun on the fold's
training side, and the model is retrained, so no fold ever sees generated
rows or rows sharing a source file with its training side.
"""

from __future__ import annotations

import csv
import itertools
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .augment import oversample
from .config import PipelineConfig
from .dataset import FeatureDataset, fit_scaler, scale_dataset, stratified_group_kfold
from .errors import PipelineError
from .gbm import predict, train_gbm
from .metrics import confusion, evaluate

logger = logging.getLogger(__name__)

MEAN_METRIC_FIELDS = ["accuracy", "precision_macro", "recall_macro",
                      "f1_macro", "fbeta_macro"]


@dataclass
class SweepAxis:
    path: str
    values: list

    def __post_init__(self):
        if not self.values:
            raise ValueError(f"axis {self.path!r} has no values")


@dataclass
class LeaderboardEntry:
    config_hash: str
    values: dict
    mean_metrics: dict | None
    fold_metrics: list[dict]
    wall_time_s: float
    error: str | None = None


@dataclass
class Leaderboard:
    metric: str
    entries: list[LeaderboardEntry] = field(default_factory=list)

    def sort(self):
        self.entries.sort(key=lambda e: (-(e.mean_metrics or {}).get(self.metric, -np.inf)
                                         if e.error is None else np.inf,))

    def best(self) -> LeaderboardEntry:
        return self.entries[0]

    def write_csv(self, path):
        axis_names = sorted({k for e in self.entries for k in e.values})
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["config_hash"] + axis_names + MEAN_METRIC_FIELDS
                            + ["wall_time_s", "error"])
            for e in self.entries:
                row = [e.config_hash]
                row += [e.values.get(a, "") for a in axis_names]
                row += [(e.mean_metrics or {}).get(m, "") for m in MEAN_METRIC_FIELDS]
                row += [f"{e.wall_time_s:.3f}", e.error or ""]
                writer.writerow(row)


@dataclass
class WrapperTrace:
    steps: list[tuple[int, float]] = field(default_factory=list)

    def selected(self) -> list[int]:
        return [i for i, _ in self.steps]

    def metrics(self) -> list[float]:
        return [m for _, m in self.steps]

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "feature_index", "metric"])
            for step, (idx, m) in enumerate(self.steps):
                writer.writerow([step, idx, repr(m)])


def _fold_pairs(ds: FeatureDataset, k: int, seed: int):
    folds = stratified_group_kfold(ds, k, seed)
    all_rows = np.arange(len(ds))
    pairs = []
    for i, val_idx in enumerate(folds):
        train_idx = np.setdiff1d(all_rows, val_idx)
        pairs.append((train_idx, val_idx))
    return pairs


def evaluate_config_cv(cfg: PipelineConfig, ds: FeatureDataset,
                       k: int | None = None, seed: int | None = None,
                       feature_indices=None, fold_pairs=None):
    """CV-mean metrics for one configuration on an (unscaled) training dataset.

    Returns (mean_metrics, fold_metrics): dicts keyed by the metric fields.
    """
    k = cfg.cv_folds if k is None else k
    seed = cfg.split.seed if seed is None else seed
    if fold_pairs is None:
        fold_pairs = _fold_pairs(ds, k, seed)
    subset = feature_indices if feature_indices is not None else cfg.feature_subset
    fold_metrics = []
    for train_idx, val_idx in fold_pairs:
        tr = ds.subset(train_idx)
        va = ds.subset(val_idx)
        original_rows = np.flatnonzero(va.origins == "original")
        va = va.subset(original_rows)
        scaler = fit_scaler(tr, cfg.scaler)
        tr_s = scale_dataset(scaler, tr)
        va_s = scale_dataset(scaler, va)
        if cfg.augment is not None:
            tr_s = oversample(tr_s, cfg.augment)
        X_tr, X_va = tr_s.features, va_s.features
        if subset is not None:
            cols = np.asarray(subset, dtype=int)
            X_tr, X_va = X_tr[:, cols], X_va[:, cols]
        model = train_gbm(X_tr, tr_s.class_ids, cfg.gbm, n_classes=ds.n_classes)
        y_pred = predict(model, X_va)
        report = evaluate(confusion(va_s.class_ids, y_pred, ds.n_classes), cfg.beta)
        fold_metrics.append({f: getattr(report, f) for f in MEAN_METRIC_FIELDS})
    mean_metrics = {f: float(np.mean([m[f] for m in fold_metrics]))
                    for f in MEAN_METRIC_FIELDS}
    return mean_metrics, fold_metrics


def _apply_axis_values(base: PipelineConfig, paths, combo) -> PipelineConfig:
    cfg = base
    for path, value in zip(paths, combo):
        cfg = cfg.with_value(path, value)
    return cfg


def grid_search(axes: list[SweepAxis], base: PipelineConfig, ds: FeatureDataset,
                k: int, metric: str = "fbeta_macro", seed: int = 0,
                workers: int = 1, dataset_builder=None) -> Leaderboard:
    """Score the Cartesian product of the axes; failures are recorded, not fatal.

    dataset_builder, when given, maps a config to a freshly built
    FeatureDataset (used when an axis touches a stage upstream of the feature
    matrix); otherwise every config is evaluated on ds.
    """
    if metric not in MEAN_METRIC_FIELDS:
        raise ValueError(f"unknown selection metric {metric!r}")
    paths = [a.path for a in axes]
    combos = list(itertools.product(*[a.values for a in axes]))

    def run_one(combo):
        started = time.perf_counter()
        cfg = _apply_axis_values(base, paths, combo)
        values = dict(zip(paths, combo))
        try:
            data = dataset_builder(cfg) if dataset_builder is not None else ds
            mean_metrics, fold_metrics = evaluate_config_cv(cfg, data, k=k, seed=seed)
            return LeaderboardEntry(cfg.config_hash(), values, mean_metrics,
                                    fold_metrics, time.perf_counter() - started)
        except (PipelineError, ValueError) as exc:
            logger.warning("config %s failed: %s", values, exc)
            return LeaderboardEntry(cfg.config_hash(), values, None, [],
                                    time.perf_counter() - started, error=str(exc))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(run_one, combos))
    else:
        entries = [run_one(c) for c in combos]
    board = Leaderboard(metric=metric, entries=entries)
    board.sort()
    return board


def greedy_wrapper(ds: FeatureDataset, cfg: PipelineConfig, candidates,
                   metric: str = "fbeta_macro", epsilon: float = 0.0,
                   max_features: int | None = None, k: int | None = None,
                   seed: int | None = None) -> WrapperTrace:
    """Forward selection: add the best remaining candidate while it improves.

    A candidate is accepted only when its CV metric beats the incumbent by
    more than epsilon (strictly positive improvement by default, ties on the
    metric go to the lowest feature index). Candidates whose training fails
    (e.g. all-constant columns) score -inf and are never selected.
    """
    if metric not in MEAN_METRIC_FIELDS:
        raise ValueError(f"unknown selection metric {metric!r}")
    k = cfg.cv_folds if k is None else k
    seed = cfg.split.seed if seed is None else seed
    fold_pairs = _fold_pairs(ds, k, seed)
    remaining = list(dict.fromkeys(int(c) for c in candidates))
    if not remaining:
        raise ValueError("candidate list is empty")
    trace = WrapperTrace()
    selected: list[int] = []
    best = 0.0
    while remaining and (max_features is None or len(selected) < max_features):
        step_best = -np.inf
        step_feat = None
        for cand in remaining:
            try:
                mean_metrics, _ = evaluate_config_cv(
                    cfg, ds, k=k, seed=seed,
                    feature_indices=selected + [cand], fold_pairs=fold_pairs)
                score = mean_metrics[metric]
            except (PipelineError, ValueError):
                score = -np.inf
            if score > step_best:
                step_best = score
                step_feat = cand
        if step_feat is None or not step_best > best + epsilon:
            break
        selected.append(step_feat)
        remaining.remove(step_feat)
        trace.steps.append((step_feat, float(step_best)))
        best = step_best
        logger.info("wrapper step %d: feature %d -> %s=%.4f",
                    len(selected), step_feat, metric, step_best)
    return trace
