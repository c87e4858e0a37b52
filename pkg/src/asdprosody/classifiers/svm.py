"""Soft-margin SVM solved in the dual by sequential minimal optimisation.

Working pairs are chosen as the maximal violating pair: i maximises
-y_i grad_i over the "up" set and j minimises it over the "low" set.
Training stops once that gap drops below ``tol``.
"""

import logging

import numpy as np

log = logging.getLogger(__name__)

SVM_C = 1.0
SVM_TOL = 1e-3
SVM_MAX_ITER = 100000


def kernel_matrix(A, B, kernel: str, gamma: float):
    if kernel == "linear":
        return A @ B.T
    if kernel == "rbf":
        sq = (np.sum(A ** 2, axis=1)[:, None] + np.sum(B ** 2, axis=1)[None, :] - 2.0 * A @ B.T)
        return np.exp(-gamma * np.maximum(sq, 0.0))
    raise ValueError(f"unknown kernel {kernel!r}")


def smo(K, y, C, tol=SVM_TOL, max_iter=SVM_MAX_ITER):
    """Minimise 0.5 a'Qa - sum a subject to 0 <= a <= C, y'a = 0, with Q = yy' * K.

    Returns (alpha, bias, iterations, gap).
    """
    n = y.size
    Q = (y[:, None] * y[None, :]) * K
    alpha = np.zeros(n)
    grad = -np.ones(n)
    tau = 1e-12
    it = 0
    gap = np.inf
    while it < max_iter:
        yg = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            gap = 0.0
            break
        i = int(np.flatnonzero(up)[np.argmax(yg[up])])
        j = int(np.flatnonzero(low)[np.argmin(yg[low])])
        gap = yg[i] - yg[j]
        if gap < tol:
            break
        it += 1
        # move along y_i d_i = -y_j d_j, i.e. a_i += y_i t, a_j -= y_j t
        quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
        t = gap / max(quad, tau)
        # clip t so both multipliers stay inside the box
        t_max_i = C - alpha[i] if y[i] > 0 else alpha[i]
        t_max_j = alpha[j] if y[j] > 0 else C - alpha[j]
        t = min(t, t_max_i, t_max_j)
        di = y[i] * t
        dj = -y[j] * t
        alpha[i] += di
        alpha[j] += dj
        # snap to the bounds to avoid round-off drift
        for k in (i, j):
            if alpha[k] < 1e-14 * C:
                alpha[k] = 0.0
            elif alpha[k] > C * (1.0 - 1e-14):
                alpha[k] = C
        grad += Q[:, i] * di + Q[:, j] * dj
    else:
        log.warning("SMO stopped after %d iterations with gap %.3g", it, gap)

    yg = -y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        bias = float(np.mean(yg[free]))
    else:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        hi = yg[up].max() if up.any() else yg.max()
        lo = yg[low].min() if low.any() else yg.min()
        bias = float(0.5 * (hi + lo))
    return alpha, bias, it, float(gap)


def kkt_residuals(alpha, y, C) -> dict:
    """Feasibility residuals of the dual constraints."""
    return {
        "lower": float(max(0.0, -alpha.min())),
        "upper": float(max(0.0, (alpha - C).max())),
        "equality": float(abs(np.dot(alpha, y))),
    }


def fit_svm(X, y, hyper, rng=None):
    C = float(hyper.get("C", SVM_C))
    kernel = hyper.get("kernel", "linear")
    gamma = float(hyper.get("gamma", 1.0 / X.shape[1]))
    tol = float(hyper.get("tol", SVM_TOL))
    K = kernel_matrix(X, X, kernel, gamma)
    alpha, bias, it, gap = smo(K, y, C, tol, int(hyper.get("max_iter", SVM_MAX_ITER)))
    sv = alpha > 0
    params = {
        "kernel": kernel,
        "gamma": gamma,
        "C": C,
        "support_vectors": X[sv],
        "dual_coef": (alpha * y)[sv],
        "alpha": alpha[sv],
        "sv_labels": y[sv],
        "bias": bias,
        "iterations": it,
        "gap": gap,
    }
    if kernel == "linear":
        params["w"] = X[sv].T @ (alpha * y)[sv]
    return params


def score_svm(params, X):
    """Signed margin f(x) = sum_i a_i y_i K(x_i, x) + b; positive means the positive class."""
    sv = np.asarray(params["support_vectors"], dtype=np.float64).reshape(-1, X.shape[1])
    coef = np.asarray(params["dual_coef"], dtype=np.float64)
    K = kernel_matrix(X, sv, params["kernel"], float(params["gamma"]))
    return K @ coef + float(params["bias"])
