"""Second-order gradient-boosted trees with a softmax multiclass objective.

Exact greedy split finding over sorted unique feature values; one regression
tree per class per boosting round. Row subsampling happens once per round,
feature subsampling per tree and again per depth level. Split search and
forest traversal run on the kernels backend (numba or numpy, see _kernels).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from . import _kernels
from .errors import DegenerateInput

MODEL_FORMAT = "rotodiag-gbm"
MODEL_VERSION = 1


def split_gain(g_left: float, h_left: float, g_right: float, h_right: float,
               reg_lambda: float, gamma: float) -> float:
    """Gain of one candidate split under the second-order objective."""
    total_g = g_left + g_right
    total_h = h_left + h_right
    return 0.5 * (g_left * g_left / (h_left + reg_lambda)
                  + g_right * g_right / (h_right + reg_lambda)
                  - total_g * total_g / (total_h + reg_lambda)) - gamma


@dataclass
class GbmParams:
    n_rounds: int = 6
    max_depth: int = 8
    learning_rate: float = 0.3
    subsample: float = 0.9
    colsample_bytree: float = 0.2
    colsample_bylevel: float = 0.9
    reg_lambda: float = 1.0
    gamma: float = 0.0
    min_child_hessian: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_rounds < 1 or self.max_depth < 1:
            raise ValueError("n_rounds and max_depth must be positive")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in (0, 1]")
        for name in ("subsample", "colsample_bytree", "colsample_bylevel"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1]")
        if self.reg_lambda < 0 or self.gamma < 0 or self.min_child_hessian < 0:
            raise ValueError("reg_lambda, gamma, min_child_hessian must be >= 0")


@dataclass
class Tree:
    """Flat node arrays; feature == -1 marks a leaf. Indices are tree-local."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    weight: np.ndarray
    default_left: np.ndarray  # reserved for missing-value routing, never exercised

    @staticmethod
    def from_lists(feature, threshold, left, right, weight, default_left) -> "Tree":
        return Tree(np.asarray(feature, dtype=np.int32),
                    np.asarray(threshold, dtype=np.float64),
                    np.asarray(left, dtype=np.int32),
                    np.asarray(right, dtype=np.int32),
                    np.asarray(weight, dtype=np.float64),
                    np.asarray(default_left, dtype=np.bool_))

    def max_node_depth(self) -> int:
        depth = np.zeros(self.feature.size, dtype=int)
        for i in range(self.feature.size):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
        return int(depth.max()) if depth.size else 0


@dataclass
class GbmModel:
    params: GbmParams
    n_classes: int
    n_features: int
    trees: list[list[Tree]]  # [round][class]
    importance_weight: np.ndarray = field(default_factory=lambda: np.zeros(0))
    importance_gain: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def truncated(self, n_rounds: int) -> "GbmModel":
        """View of the model using the first n_rounds boosting rounds."""
        return GbmModel(self.params, self.n_classes, self.n_features,
                        self.trees[:n_rounds], self.importance_weight,
                        self.importance_gain)

    def _flatten(self):
        feature, threshold, left, right, weight = [], [], [], [], []
        tree_offset = [0]
        tree_class = []
        for per_class in self.trees:
            for c, tree in enumerate(per_class):
                feature.append(tree.feature)
                threshold.append(tree.threshold)
                left.append(tree.left)
                right.append(tree.right)
                weight.append(tree.weight)
                tree_offset.append(tree_offset[-1] + tree.feature.size)
                tree_class.append(c)
        if not tree_class:
            return (np.zeros(0, np.int32), np.zeros(0), np.zeros(0, np.int32),
                    np.zeros(0, np.int32), np.zeros(0),
                    np.zeros(1, np.int64), np.zeros(0, np.int64))
        return (np.concatenate(feature), np.concatenate(threshold),
                np.concatenate(left), np.concatenate(right),
                np.concatenate(weight),
                np.asarray(tree_offset, dtype=np.int64),
                np.asarray(tree_class, dtype=np.int64))


def _softmax(margins: np.ndarray) -> np.ndarray:
    z = margins - margins.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _sample_count(n: int, fraction: float) -> int:
    return max(1, int(n * fraction + 0.5))


def _build_tree(X, rows, g, h, params, level_features, importance_w, importance_g):
    """Grow one regression tree depth-first; returns the Tree."""
    feature, threshold, left, right, weight, default_left = [], [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        weight.append(0.0)
        default_left.append(True)
        return len(feature) - 1

    def grow(node, node_rows, depth):
        g_sum = float(g[node_rows].sum())
        h_sum = float(h[node_rows].sum())
        if (depth < params.max_depth and node_rows.size >= 2
                and h_sum >= params.min_child_hessian):
            feats = level_features[depth]
            sub = np.ascontiguousarray(X[np.ix_(node_rows, feats)])
            gain, local_j, thr = _kernels.best_split(
                sub, g[node_rows], h[node_rows], params.reg_lambda, params.gamma)
            if local_j >= 0 and gain > 0.0:
                feat = int(feats[local_j])
                go_left = X[node_rows, feat] < thr
                feature[node] = feat
                threshold[node] = thr
                importance_w[feat] += 1
                importance_g[feat] += gain
                left[node] = new_node()
                right[node] = new_node()
                grow(left[node], node_rows[go_left], depth + 1)
                grow(right[node], node_rows[~go_left], depth + 1)
                return
        weight[node] = -g_sum / (h_sum + params.reg_lambda) * params.learning_rate

    grow(new_node(), rows, 0)
    return Tree.from_lists(feature, threshold, left, right, weight, default_left)


def train_gbm(X: np.ndarray, y: np.ndarray, params: GbmParams,
              n_classes: int | None = None) -> GbmModel:
    """Fit the boosted forest; deterministic for a given (data, params, seed)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    n, n_features = X.shape
    present = np.unique(y)
    if present.size < 2:
        raise DegenerateInput("training data holds fewer than two classes")
    if n > 1 and bool(np.all(X == X[0])):
        raise DegenerateInput("all training rows are identical")
    C = int(n_classes) if n_classes is not None else int(y.max()) + 1

    n_tree_feats = _sample_count(n_features, params.colsample_bytree)
    n_level_feats = _sample_count(n_tree_feats, params.colsample_bylevel)

    importance_w = np.zeros(n_features)
    importance_g = np.zeros(n_features)
    margins = np.zeros((n, C))
    onehot = np.zeros((n, C))
    onehot[np.arange(n), y] = 1.0

    rounds: list[list[Tree]] = []
    for r in range(params.n_rounds):
        proba = _softmax(margins)
        if params.subsample < 1.0:
            rng_round = np.random.default_rng([params.seed, r])
            rows = np.sort(rng_round.choice(n, size=_sample_count(n, params.subsample),
                                            replace=False)).astype(np.int64)
        else:
            rows = np.arange(n, dtype=np.int64)
        per_class: list[Tree] = []
        for c in range(C):
            g = proba[:, c] - onehot[:, c]
            h = proba[:, c] * (1.0 - proba[:, c])
            rng_tree = np.random.default_rng([params.seed, r, c])
            tree_feats = np.sort(rng_tree.permutation(n_features)[:n_tree_feats])
            level_features = [
                np.sort(rng_tree.permutation(tree_feats)[:n_level_feats])
                for _ in range(params.max_depth)
            ]
            tree = _build_tree(X, rows, g, h, params, level_features,
                               importance_w, importance_g)
            per_class.append(tree)
        rounds.append(per_class)
        model_round = GbmModel(params, C, n_features, [per_class])
        margins += _raw_margins(model_round, X)

    return GbmModel(params, C, n_features, rounds, importance_w, importance_g)


def _raw_margins(model: GbmModel, X: np.ndarray) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    margins = np.zeros((X.shape[0], model.n_classes))
    flat = model._flatten()
    if flat[6].size:
        _kernels.predict_margins(X, *flat, margins)
    return margins


def predict_proba(model: GbmModel, X: np.ndarray) -> np.ndarray:
    """Softmax class probabilities, one row per input row."""
    X = np.atleast_2d(X)
    return _softmax(_raw_margins(model, X))


def predict(model: GbmModel, X: np.ndarray) -> np.ndarray:
    """Argmax class ids (lowest id wins ties)."""
    return np.argmax(predict_proba(model, X), axis=1)


def multiclass_log_loss(model: GbmModel, X: np.ndarray, y: np.ndarray) -> float:
    p = predict_proba(model, X)
    return float(-np.mean(np.log(np.maximum(p[np.arange(len(y)), y], 1e-300))))


def feature_importance(model: GbmModel, kind: str = "weight") -> np.ndarray:
    """Per-feature fractions summing to 1: split counts or summed split gains."""
    if kind == "weight":
        tallies = model.importance_weight
    elif kind == "gain":
        tallies = model.importance_gain
    else:
        raise ValueError(f"unknown importance kind {kind!r}")
    total = tallies.sum()
    return tallies / total if total > 0 else np.zeros_like(tallies)


# --- serialization ---------------------------------------------------------

def model_to_json(model: GbmModel) -> str:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "params": asdict(model.params),
        "n_classes": model.n_classes,
        "n_features": model.n_features,
        "importance_weight": model.importance_weight.tolist(),
        "importance_gain": model.importance_gain.tolist(),
        "trees": [[{
            "feature": t.feature.tolist(),
            "threshold": t.threshold.tolist(),
            "left": t.left.tolist(),
            "right": t.right.tolist(),
            "weight": t.weight.tolist(),
            "default_left": t.default_left.tolist(),
        } for t in per_class] for per_class in model.trees],
    }
    return json.dumps(doc)


def model_from_json(text: str) -> GbmModel:
    doc = json.loads(text)
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError("not a serialized gbm model")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {doc.get('version')}")
    trees = [[Tree.from_lists(t["feature"], t["threshold"], t["left"], t["right"],
                              t["weight"], t["default_left"])
              for t in per_class] for per_class in doc["trees"]]
    return GbmModel(GbmParams(**doc["params"]), doc["n_classes"], doc["n_features"],
                    trees, np.asarray(doc["importance_weight"], dtype=np.float64),
                    np.asarray(doc["importance_gain"], dtype=np.float64))
