"""Minority-class oversampling in scaled feature space.

Plain SMOTE interpolates between a class member and one of its k nearest
same-class neighbors. The borderline variants restrict the interpolation
sources to "danger" points whose m-neighborhood (over all classes) is at
least half out-of-class but not entirely so; variant 2 may also step toward
an out-of-class neighbor, but only half way.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dataset import FeatureDataset, concat
from .errors import TooFewRows

logger = logging.getLogger(__name__)

AUGMENT_METHODS = ("smote", "borderline1", "borderline2")


@dataclass
class AugmentConfig:
    method: str = "borderline1"
    target_per_class: int = 616
    k_neighbors: int = 10
    m_neighbors: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.method not in AUGMENT_METHODS:
            raise ValueError(f"unknown augmentation method {self.method!r}")
        if self.target_per_class < 1 or self.k_neighbors < 1 or self.m_neighbors < 1:
            raise ValueError("target_per_class, k_neighbors, m_neighbors must be >= 1")


def _pairwise_sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * (A @ B.T)
    return np.maximum(sq, 0.0)


def _knn_indices(points: np.ndarray, pool: np.ndarray, k: int,
                 exclude_self_offset: int | None = None) -> np.ndarray:
    """Exact k nearest pool rows per point (Euclidean); stable order on ties."""
    d = _pairwise_sq_dists(points, pool)
    if exclude_self_offset is not None:
        for i in range(points.shape[0]):
            d[i, exclude_self_offset + i] = np.inf
    return np.argsort(d, axis=1, kind="stable")[:, :k]


def _interpolate(rng, base: np.ndarray, other: np.ndarray, u_max: float) -> np.ndarray:
    u = rng.uniform(0.0, u_max)
    return base + u * (other - base)


def oversample(train: FeatureDataset, cfg: AugmentConfig) -> FeatureDataset:
    """Raise every under-target class to exactly target_per_class rows.

    Classes already at or above the target are untouched. Generated rows get
    origin="generated" and a synthetic source_file tag. Deterministic: the
    random stream is split per class from the master seed.
    """
    X = train.features
    y = train.class_ids
    generated: list[FeatureDataset] = []
    for class_id in sorted(set(int(c) for c in y)):
        members = np.flatnonzero(y == class_id)
        deficit = cfg.target_per_class - members.size
        if deficit <= 0:
            continue
        if members.size <= cfg.k_neighbors:
            raise TooFewRows(
                f"class {class_id} has {members.size} rows; needs more than "
                f"k_neighbors={cfg.k_neighbors} to oversample")
        rng = np.random.default_rng([cfg.seed, class_id])
        if cfg.method == "smote":
            new_rows = _smote_rows(X, members, deficit, cfg.k_neighbors, rng)
        else:
            variant = 1 if cfg.method == "borderline1" else 2
            new_rows = _borderline_rows(X, y, class_id, members, deficit,
                                        cfg.k_neighbors, cfg.m_neighbors,
                                        variant, rng)
        label = str(train.class_labels[members[0]])
        tags = np.array([f"generated/{class_id}/{i:05d}" for i in range(deficit)],
                        dtype=object)
        generated.append(FeatureDataset(
            new_rows, tags,
            np.array([label] * deficit, dtype=object),
            np.full(deficit, class_id),
            np.array(["generated"] * deficit, dtype=object),
            train.n_classes, list(train.feature_names)))
    if not generated:
        return train
    return concat([train] + generated)


def _smote_rows(X, members, deficit, k, rng) -> np.ndarray:
    Xc = X[members]
    nn = _knn_indices(Xc, Xc, k, exclude_self_offset=0)
    out = np.empty((deficit, X.shape[1]))
    for i in range(deficit):
        a = int(rng.integers(members.size))
        b = int(nn[a, rng.integers(k)])
        out[i] = _interpolate(rng, Xc[a], Xc[b], 1.0)
    return out


def _danger_members(X, y, class_id, members, m) -> np.ndarray:
    """Members whose m-NN over all rows hold >= m/2 but < m out-of-class rows."""
    d = _pairwise_sq_dists(X[members], X)
    for i, row in enumerate(members):
        d[i, row] = np.inf
    nn = np.argsort(d, axis=1, kind="stable")[:, :m]
    out_of_class = (y[nn] != class_id).sum(axis=1)
    keep = (out_of_class * 2 >= m) & (out_of_class < m)
    return members[keep]


def _borderline_rows(X, y, class_id, members, deficit, k, m, variant, rng) -> np.ndarray:
    danger = _danger_members(X, y, class_id, members, m)
    if danger.size == 0:
        logger.info("class %d: empty danger set, falling back to plain SMOTE", class_id)
        return _smote_rows(X, members, deficit, k, rng)
    Xc = X[members]
    Xd = X[danger]
    # a danger point is its own zero-distance neighbor inside Xc; mask it out
    local_of = {int(row): i for i, row in enumerate(members)}
    sq = _pairwise_sq_dists(Xd, Xc)
    sq[np.arange(danger.size), [local_of[int(r)] for r in danger]] = np.inf
    same_nn = np.argsort(sq, axis=1, kind="stable")[:, :k]

    outside = np.flatnonzero(y != class_id)
    out_nn = None
    if variant == 2 and outside.size:
        n_out = min(m, outside.size)
        out_nn = outside[_knn_indices(Xd, X[outside], n_out)]

    out = np.empty((deficit, X.shape[1]))
    for i in range(deficit):
        a = int(rng.integers(danger.size))
        toward_enemy = variant == 2 and out_nn is not None and rng.random() < 0.5
        if toward_enemy:
            b = int(out_nn[a, rng.integers(out_nn.shape[1])])
            out[i] = _interpolate(rng, Xd[a], X[b], 0.5)
        else:
            b = int(same_nn[a, rng.integers(k)])
            out[i] = _interpolate(rng, Xd[a], Xc[b], 1.0)
    return out
