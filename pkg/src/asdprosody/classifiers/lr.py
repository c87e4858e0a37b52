"""L2-regularised logistic regression trained by gradient descent."""

import numpy as np
from scipy.special import expit

LR_C = 1.0
LR_TOL = 1e-6
LR_MAX_ITER = 10000


def objective(w, b, X, y, C):
    """0.5 ||w||^2 + C * sum log(1 + exp(-y (X w + b))); the bias is not penalised."""
    z = y * (X @ w + b)
    return 0.5 * float(w @ w) + C * float(np.sum(np.logaddexp(0.0, -z)))


def gradient(w, b, X, y, C):
    z = y * (X @ w + b)
    g = -C * y * expit(-z)
    return w + X.T @ g, float(np.sum(g))


def fit_lr(X, y, hyper, rng=None):
    C = float(hyper.get("C", LR_C))
    tol = float(hyper.get("tol", LR_TOL))
    max_iter = int(hyper.get("max_iter", LR_MAX_ITER))
    n, d = X.shape
    Xa = np.hstack([X, np.ones((n, 1))])
    # Lipschitz constant of the gradient: 1 + C/4 * ||[X 1]||_2^2
    L = 1.0 + 0.25 * C * float(np.linalg.norm(Xa, 2) ** 2)
    step = 1.0 / L
    w = np.zeros(d)
    b = 0.0
    it = 0
    gnorm = np.inf
    for it in range(1, max_iter + 1):
        gw, gb = gradient(w, b, X, y, C)
        gnorm = float(np.sqrt(gw @ gw + gb * gb))
        if gnorm < tol:
            break
        w = w - step * gw
        b = b - step * gb
    return {"w": w, "b": b, "iterations": it, "grad_norm": gnorm, "C": C}


def score_lr(params, X):
    """Probability of the positive class."""
    return expit(X @ np.asarray(params["w"]) + float(params["b"]))
