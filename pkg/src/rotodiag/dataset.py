"""Feature dataset assembly, file-aware splits, and train-fitted scalers.

Splits are decided at the source-file level so frames of one recording never
straddle train/test or CV-fold boundaries.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ClassTooSmall, EmptyFile, InvalidK
from .features import CSV_FEATURE_COLUMNS, N_FEATURES, FileFeatureSet

logger = logging.getLogger(__name__)

SCALER_METHODS = ("minmax", "robust", "standard")


@dataclass
class SampleRecord:
    """One feature row with its provenance."""

    features: np.ndarray
    source_file: str
    class_label: str
    class_id: int
    origin: str


@dataclass
class FeatureDataset:
    """Columnar store of sample records with a fixed 144-feature layout."""

    features: np.ndarray          # (n_rows, 144)
    source_files: np.ndarray      # (n_rows,) str
    class_labels: np.ndarray      # (n_rows,) str
    class_ids: np.ndarray         # (n_rows,) int
    origins: np.ndarray           # (n_rows,) "original" | "generated"
    n_classes: int = 42
    feature_names: list[str] = field(default_factory=lambda: list(CSV_FEATURE_COLUMNS))

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.source_files = np.asarray(self.source_files, dtype=object)
        self.class_labels = np.asarray(self.class_labels, dtype=object)
        self.class_ids = np.asarray(self.class_ids, dtype=np.int64)
        self.origins = np.asarray(self.origins, dtype=object)
        n = self.features.shape[0]
        if self.features.ndim != 2 or self.features.shape[1] != N_FEATURES:
            raise ValueError(f"feature matrix must be (n, {N_FEATURES})")
        for arr, name in [(self.source_files, "source_files"),
                          (self.class_labels, "class_labels"),
                          (self.class_ids, "class_ids"),
                          (self.origins, "origins")]:
            if arr.shape != (n,):
                raise ValueError(f"{name} must have one entry per row")
        if n and not np.all(np.isfinite(self.features)):
            raise ValueError("feature matrix contains non-finite values")
        if n and (self.class_ids.min() < 0 or self.class_ids.max() >= self.n_classes):
            raise ValueError("class ids out of range")
        self._check_file_labels()

    def _check_file_labels(self):
        seen: dict[str, int] = {}
        for f, c in zip(self.source_files, self.class_ids):
            prev = seen.setdefault(f, int(c))
            if prev != c:
                raise ValueError(f"source file {f!r} appears with class ids {prev} and {c}")

    def __len__(self) -> int:
        return self.features.shape[0]

    def record(self, i: int) -> SampleRecord:
        return SampleRecord(self.features[i], str(self.source_files[i]),
                            str(self.class_labels[i]), int(self.class_ids[i]),
                            str(self.origins[i]))

    def subset(self, indices) -> "FeatureDataset":
        indices = np.asarray(indices)
        return FeatureDataset(self.features[indices], self.source_files[indices],
                              self.class_labels[indices], self.class_ids[indices],
                              self.origins[indices], self.n_classes,
                              list(self.feature_names))

    def files(self) -> list[str]:
        return sorted(set(map(str, self.source_files)))

    def class_histogram(self) -> np.ndarray:
        return np.bincount(self.class_ids, minlength=self.n_classes)

    def with_features(self, matrix: np.ndarray) -> "FeatureDataset":
        """Same rows and provenance, replaced feature matrix (e.g. scaled)."""
        return FeatureDataset(matrix, self.source_files, self.class_labels,
                              self.class_ids, self.origins, self.n_classes,
                              list(self.feature_names))


def from_feature_sets(sets: list[FileFeatureSet], n_classes: int = 42) -> FeatureDataset:
    if not sets:
        raise EmptyFile("no feature sets to assemble")
    features = np.vstack([s.vectors for s in sets])
    source_files, labels, ids, origins = [], [], [], []
    for s in sets:
        source_files += [s.source_file] * len(s.vectors)
        labels += [s.class_label] * len(s.vectors)
        ids += [s.class_id] * len(s.vectors)
        origins += [s.origin] * len(s.vectors)
    return FeatureDataset(features, np.array(source_files, dtype=object),
                          np.array(labels, dtype=object), np.array(ids),
                          np.array(origins, dtype=object), n_classes)


def concat(parts: list[FeatureDataset]) -> FeatureDataset:
    base = parts[0]
    return FeatureDataset(np.vstack([p.features for p in parts]),
                          np.concatenate([p.source_files for p in parts]),
                          np.concatenate([p.class_labels for p in parts]),
                          np.concatenate([p.class_ids for p in parts]),
                          np.concatenate([p.origins for p in parts]),
                          base.n_classes, list(base.feature_names))


def _files_by_class(ds: FeatureDataset, original_only: bool = True):
    per_class: dict[int, list[str]] = {}
    seen = set()
    for f, c, origin in zip(ds.source_files, ds.class_ids, ds.origins):
        if original_only and origin != "original":
            continue
        if f in seen:
            continue
        seen.add(f)
        per_class.setdefault(int(c), []).append(str(f))
    for files in per_class.values():
        files.sort()
    return per_class


def holdout_split(ds: FeatureDataset, test_fraction: float, seed: int):
    """Per-class file-level holdout: round(fraction * files) of each class
    (at least 1, never all) go to test; generated rows always stay in train.
    Returns (train, test) datasets."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    per_class = _files_by_class(ds)
    for c, files in sorted(per_class.items()):
        if len(files) < 2:
            raise ClassTooSmall(f"class {c} has {len(files)} file(s); need at least 2")
    rng = np.random.default_rng(seed)
    test_files = set()
    for c in sorted(per_class):
        files = per_class[c]
        n_test = int(test_fraction * len(files) + 0.5)
        n_test = min(max(1, n_test), len(files) - 1)
        order = rng.permutation(len(files))
        test_files.update(files[i] for i in order[:n_test])
    in_test = np.array([str(f) in test_files and o == "original"
                        for f, o in zip(ds.source_files, ds.origins)])
    return ds.subset(np.flatnonzero(~in_test)), ds.subset(np.flatnonzero(in_test))


def stratified_group_kfold(ds: FeatureDataset, k: int, seed: int) -> list[np.ndarray]:
    """Partition rows into k file-level folds, per-class file counts within 1.

    Returns k arrays of row indices. Classes with fewer than k files are
    flagged in the log but still dealt out.
    """
    if k < 2:
        raise InvalidK(f"k must be at least 2, got {k}")
    per_class = _files_by_class(ds, original_only=False)
    rng = np.random.default_rng(seed)
    fold_of_file: dict[str, int] = {}
    cursor = 0
    for c in sorted(per_class):
        files = per_class[c]
        if len(files) < k:
            logger.warning("class %d has %d files < k=%d; some folds will miss it",
                           c, len(files), k)
        for i in rng.permutation(len(files)):
            fold_of_file[files[i]] = cursor % k
            cursor += 1
    folds = [[] for _ in range(k)]
    for row, f in enumerate(ds.source_files):
        folds[fold_of_file[str(f)]].append(row)
    return [np.array(sorted(rows), dtype=np.int64) for rows in folds]


@dataclass
class ScalerParams:
    """Frozen per-feature affine transform: (x - center) / scale."""

    method: str
    center: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        if self.method not in SCALER_METHODS:
            raise ValueError(f"unknown scaler method {self.method!r}")
        self.center = np.asarray(self.center, dtype=np.float64)
        self.scale = np.asarray(self.scale, dtype=np.float64)


def fit_scaler(train: FeatureDataset, method: str) -> ScalerParams:
    """Fit on training rows only; zero denominators are replaced by 1."""
    X = train.features
    if X.shape[0] == 0:
        raise ValueError("cannot fit a scaler on an empty dataset")
    if method == "minmax":
        center = X.min(axis=0)
        scale = X.max(axis=0) - center
    elif method == "robust":
        center = np.median(X, axis=0)
        scale = np.percentile(X, 75, axis=0) - np.percentile(X, 25, axis=0)
    elif method == "standard":
        center = X.mean(axis=0)
        scale = X.std(axis=0)  # population statistics
    else:
        raise ValueError(f"unknown scaler method {method!r}")
    scale = np.where(scale == 0.0, 1.0, scale)
    return ScalerParams(method=method, center=center, scale=scale)


def apply_scaler(params: ScalerParams, X: np.ndarray) -> np.ndarray:
    """Apply frozen params to any rows; values outside [0,1] are NOT clipped."""
    return (np.asarray(X, dtype=np.float64) - params.center) / params.scale


def unapply_scaler(params: ScalerParams, X: np.ndarray) -> np.ndarray:
    return np.asarray(X, dtype=np.float64) * params.scale + params.center


def scale_dataset(params: ScalerParams, ds: FeatureDataset) -> FeatureDataset:
    return ds.with_features(apply_scaler(params, ds.features))


META_COLUMNS = ["source_file", "class_label", "class_id", "origin"]


def write_feature_csv(path, ds: FeatureDataset) -> None:
    """Feature CSV: f000..f143, source_file, class_label, class_id, origin."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_FEATURE_COLUMNS + META_COLUMNS)
        for i in range(len(ds)):
            row = [repr(float(v)) for v in ds.features[i]]
            row += [str(ds.source_files[i]), str(ds.class_labels[i]),
                    int(ds.class_ids[i]), str(ds.origins[i])]
            writer.writerow(row)


def read_feature_csv(path, n_classes: int | None = None) -> FeatureDataset:
    feats, files, labels, ids, origins = [], [], [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyFile(str(path))
        if header[:N_FEATURES] != CSV_FEATURE_COLUMNS:
            raise ValueError(f"{path}: unexpected feature CSV header")
        for row in reader:
            feats.append([float(v) for v in row[:N_FEATURES]])
            files.append(row[N_FEATURES])
            labels.append(row[N_FEATURES + 1])
            ids.append(int(row[N_FEATURES + 2]))
            origins.append(row[N_FEATURES + 3])
    if not feats:
        raise EmptyFile(str(path))
    inferred = max(ids) + 1 if n_classes is None else n_classes
    return FeatureDataset(np.array(feats), np.array(files, dtype=object),
                          np.array(labels, dtype=object), np.array(ids),
                          np.array(origins, dtype=object), max(inferred, 1))


def write_split_manifest(path, train: FeatureDataset, test: FeatureDataset) -> None:
    """Audit CSV of (source_file, split) pairs."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source_file", "split"])
        for name, part in [("train", train), ("test", test)]:
            for f in part.files():
                writer.writerow([f, name])
