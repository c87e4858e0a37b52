"""Gaussian naive Bayes."""

import numpy as np
from scipy.special import expit

VAR_FLOOR = 1e-9


def fit_nb(X, y, hyper, rng=None):
    floor = float(hyper.get("var_floor", VAR_FLOOR))
    params = {}
    for key, sign in (("pos", 1.0), ("neg", -1.0)):
        rows = X[y == sign]
        params[f"{key}_prior"] = rows.shape[0] / X.shape[0]
        params[f"{key}_mean"] = rows.mean(axis=0)
        params[f"{key}_var"] = np.maximum(rows.var(axis=0), floor)
    return params


def _log_joint(X, prior, mean, var):
    mean = np.asarray(mean)
    var = np.asarray(var)
    return (np.log(prior)
            - 0.5 * np.sum(np.log(2.0 * np.pi * var))
            - 0.5 * np.sum((X - mean) ** 2 / var, axis=1))


def score_nb(params, X):
    """Posterior probability of the positive class."""
    lp = _log_joint(X, params["pos_prior"], params["pos_mean"], params["pos_var"])
    ln = _log_joint(X, params["neg_prior"], params["neg_mean"], params["neg_var"])
    return expit(lp - ln)
