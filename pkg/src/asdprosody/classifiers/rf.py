"""Random forest of Gini CART trees on bootstrap samples."""

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

RF_TREES = 100


def tree_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream per tree, so serial and parallel training agree."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def _gini_split(x, y_pos):
    """Best threshold on one feature; returns (impurity, threshold) or None.

    Impurity is the size-weighted Gini of the two children.
    """
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ps = y_pos[order]
    n = xs.size
    cut = np.flatnonzero(xs[1:] > xs[:-1])  # split after position cut
    if cut.size == 0:
        return None
    cum = np.cumsum(ps)
    nl = cut + 1.0
    nr = n - nl
    pl = cum[cut]
    pr = cum[-1] - pl
    gl = 1.0 - (pl / nl) ** 2 - ((nl - pl) / nl) ** 2
    gr = 1.0 - (pr / nr) ** 2 - ((nr - pr) / nr) ** 2
    imp = (nl * gl + nr * gr) / n
    b = int(np.argmin(imp))
    lo, hi = xs[cut[b]], xs[cut[b] + 1]
    thr = 0.5 * (lo + hi)
    if not lo <= thr < hi:
        thr = lo
    return float(imp[b]), float(thr)


def build_tree(X, y_pos, max_features: int, rng: np.random.Generator, min_leaf: int = 1):
    """Grow an unpruned tree; nodes are stored in flat lists.

    Internal nodes send ``x[feature] <= threshold`` to the left child.
    Leaves store the fraction of positive training rows.
    """
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    d = X.shape[1]
    root = new_node()
    stack = [(root, np.arange(X.shape[0]))]
    while stack:
        node, idx = stack.pop()
        yp = y_pos[idx]
        frac = float(yp.mean())
        value[node] = frac
        if frac in (0.0, 1.0) or idx.size < 2 * min_leaf:
            continue
        perm = rng.permutation(d)
        best = None
        # draw features until max_features were tried and one of them splits
        for tried, f in enumerate(perm, start=1):
            res = _gini_split(X[idx, f], yp)
            if res is not None and (best is None or res[0] < best[0]):
                best = (res[0], res[1], int(f))
            if tried >= max_features and best is not None:
                break
        if best is None:
            continue
        imp, thr, f = best
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        if li.size < min_leaf or ri.size < min_leaf:
            continue
        feature[node] = f
        threshold[node] = thr
        left[node] = new_node()
        right[node] = new_node()
        stack.append((right[node], ri))
        stack.append((left[node], li))
    return {"feature": feature, "threshold": threshold, "left": left, "right": right, "value": value}


def tree_leaf_values(tree, X):
    feature = tree["feature"]
    threshold = tree["threshold"]
    left = tree["left"]
    right = tree["right"]
    value = tree["value"]
    out = np.empty(X.shape[0])
    for r in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            node = left[node] if X[r, feature[node]] <= threshold[node] else right[node]
        out[r] = value[node]
    return out


def _fit_one(X, y_pos, seed, index, max_features, min_leaf):
    rng = tree_rng(seed, index)
    boot = rng.integers(0, X.shape[0], X.shape[0])
    return build_tree(X[boot], y_pos[boot], max_features, rng, min_leaf)


def fit_rf(X, y, hyper, seed=0, jobs=1):
    n_trees = int(hyper.get("n_trees", RF_TREES))
    d = X.shape[1]
    max_features = int(hyper.get("max_features", max(1, int(math.sqrt(d)))))
    min_leaf = int(hyper.get("min_leaf", 1))
    y_pos = (y > 0).astype(np.float64)
    args = [(X, y_pos, seed, i, max_features, min_leaf) for i in range(n_trees)]
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            trees = list(pool.map(lambda a: _fit_one(*a), args))
    else:
        trees = [_fit_one(*a) for a in args]
    return {"trees": trees, "max_features": max_features, "min_leaf": min_leaf}


def score_rf(params, X):
    """Fraction of trees voting for the positive class (a leaf tie votes positive)."""
    votes = np.zeros(X.shape[0])
    for tree in params["trees"]:
        votes += tree_leaf_values(tree, X) >= 0.5
    return votes / len(params["trees"])
