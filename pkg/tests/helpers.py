"""Shared Monte Carlo helpers for the test suite."""

import numpy as np


def se_mean(x):
    x = np.asarray(x, dtype=float)
    return x.std(ddof=1) / np.sqrt(x.shape[0])


def se_var(x):
    """Standard error of the sample variance via the empirical fourth moment."""
    x = np.asarray(x, dtype=float)
    d = x - x.mean()
    m4 = np.mean(d**4)
    s2 = d.var(ddof=1)
    return np.sqrt(max(m4 - s2 * s2, 0.0) / x.shape[0])


def se_prob(p_hat, n):
    return np.sqrt(max(p_hat * (1.0 - p_hat), 1e-12) / n)


def batch_estimates(values, n_batches, stat):
    """Apply `stat` to equal batches of rows; returns (mean, se of the mean)."""
    values = np.asarray(values)
    splits = np.array_split(values, n_batches)
    ests = np.array([stat(s) for s in splits])
    return ests.mean(), ests.std(ddof=1) / np.sqrt(n_batches)


def assert_within_se(actual, expected, se, n_se, label=""):
    err = abs(actual - expected)
    assert err <= n_se * se, (
        f"{label}: |{actual} - {expected}| = {err} > {n_se} * {se}"
    )
