"""Hot numeric kernels for boosted-tree training and prediction.

Two interchangeable backends compute bit-identical results:

* ``numba``: @njit loops (default when numba imports cleanly)
* ``numpy``: vectorized fallback, no compilation step

Select with ``ROTODIAG_BACKEND=numpy`` or ``ROTODIAG_BACKEND=numba``.
Both use stable mergesort ordering and strictly sequential prefix sums, so
the trained forest does not depend on the backend.
"""

import os

import numpy as np

_NEG_INF = -np.inf


# ---------------------------------------------------------------------------
# numpy backend

def best_split_numpy(X, g, h, lam, gamma):
    """Exact greedy split search over a node's gathered submatrix.

    X is (n_rows, n_feats) with g/h the per-row gradient/hessian. Returns
    (gain, local_feature_index, threshold); gain is -inf when no candidate
    exists (fewer than two distinct values in every column). Thresholds are
    midpoints between consecutive distinct sorted values; ties on gain keep
    the lowest feature index, then the lowest threshold.
    """
    n, n_feats = X.shape
    best_gain = _NEG_INF
    best_feat = -1
    best_thr = 0.0
    if n < 2:
        return best_gain, best_feat, best_thr
    for j in range(n_feats):
        col = X[:, j]
        order = np.argsort(col, kind="mergesort")
        vs = col[order]
        cut = vs[1:] != vs[:-1]
        if not cut.any():
            continue
        gs = np.add.accumulate(g[order])
        hs = np.add.accumulate(h[order])
        gt = gs[-1]
        ht = hs[-1]
        parent = gt * gt / (ht + lam)
        gl = gs[:-1][cut]
        hl = hs[:-1][cut]
        gr = gt - gl
        hr = ht - hl
        gains = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent) - gamma
        k = int(np.argmax(gains))
        if gains[k] > best_gain:
            best_gain = float(gains[k])
            best_feat = j
            mids = 0.5 * (vs[:-1] + vs[1:])
            best_thr = float(mids[cut][k])
    return best_gain, best_feat, best_thr


def predict_margins_numpy(X, feature, threshold, left, right, weight,
                          tree_offset, tree_class, margins):
    """Route every row of X through every tree, adding leaf weights to margins."""
    n = X.shape[0]
    rows = np.arange(n)
    for t in range(tree_class.shape[0]):
        base = tree_offset[t]
        cur = np.zeros(n, dtype=np.int64)
        active = feature[base + cur] >= 0
        while active.any():
            node = base + cur[active]
            go_left = X[rows[active], feature[node]] < threshold[node]
            cur[active] = np.where(go_left, left[node], right[node])
            active = feature[base + cur] >= 0
        margins[:, tree_class[t]] += weight[base + cur]


# ---------------------------------------------------------------------------
# numba backend

try:
    from numba import njit

    _HAVE_NUMBA = True

    @njit(cache=True)
    def best_split_numba(X, g, h, lam, gamma):
        n, n_feats = X.shape
        best_gain = _NEG_INF
        best_feat = -1
        best_thr = 0.0
        if n < 2:
            return best_gain, best_feat, best_thr
        for j in range(n_feats):
            col = X[:, j].copy()
            order = np.argsort(col, kind="mergesort")
            gt = 0.0
            ht = 0.0
            for i in range(n):
                gt += g[order[i]]
                ht += h[order[i]]
            parent = gt * gt / (ht + lam)
            gl = 0.0
            hl = 0.0
            for i in range(n - 1):
                r = order[i]
                gl += g[r]
                hl += h[r]
                nxt = col[order[i + 1]]
                if nxt != col[r]:
                    gr = gt - gl
                    hr = ht - hl
                    gain = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent) - gamma
                    if gain > best_gain:
                        best_gain = gain
                        best_feat = j
                        best_thr = 0.5 * (col[r] + nxt)
        return best_gain, best_feat, best_thr

    @njit(cache=True)
    def predict_margins_numba(X, feature, threshold, left, right, weight,
                              tree_offset, tree_class, margins):
        n = X.shape[0]
        for t in range(tree_class.shape[0]):
            base = tree_offset[t]
            c = tree_class[t]
            for i in range(n):
                node = 0
                while feature[base + node] >= 0:
                    if X[i, feature[base + node]] < threshold[base + node]:
                        node = left[base + node]
                    else:
                        node = right[base + node]
                margins[i, c] += weight[base + node]

except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False
    best_split_numba = None
    predict_margins_numba = None


def _resolve_backend() -> str:
    choice = os.environ.get("ROTODIAG_BACKEND", "").strip().lower()
    if choice == "numpy":
        return "numpy"
    if choice == "numba":
        if not _HAVE_NUMBA:
            raise ImportError("ROTODIAG_BACKEND=numba but numba is not installed")
        return "numba"
    if choice:
        raise ValueError(f"unknown ROTODIAG_BACKEND {choice!r} (use 'numba' or 'numpy')")
    return "numba" if _HAVE_NUMBA else "numpy"


BACKEND = _resolve_backend()

if BACKEND == "numba":
    best_split = best_split_numba
    predict_margins = predict_margins_numba
else:
    best_split = best_split_numpy
    predict_margins = predict_margins_numpy
