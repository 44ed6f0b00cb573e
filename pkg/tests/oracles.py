"""Independent reference computations shared by the test modules."""

import math

import numpy as np

from orey.kernels import gram


def diff_operator(m):
    """``(m-1) x m`` matrix taking ``X_{1..m}`` to second differences (``X_0 = 0``)."""
    D = np.zeros((m - 1, m + 1))
    for k in range(1, m):
        D[k - 1, k - 1 : k + 2] = (1.0, -2.0, 1.0)
    return D[:, 1:]


def joint_cov(model, n):
    """Covariance blocks of (coarse diffs, fine diffs) from the Gram matrix by plain linear algebra."""
    t = np.arange(1, 2 * n + 1) * (model.horizon / (2 * n))
    G = gram(model, t)
    fine = diff_operator(2 * n)
    coarse = diff_operator(n) @ np.eye(2 * n)[1::2]
    return coarse @ G @ coarse.T, fine @ G @ fine.T, coarse @ G @ fine.T


def perfect_matchings(items):
    if not items:
        yield []
        return
    a = items[0]
    for i in range(1, len(items)):
        rest = items[1:i] + items[i + 1 :]
        for m in perfect_matchings(rest):
            yield [(a, items[i])] + m


def wick_fourth(S, idx):
    """``E Y_a Y_b Y_c Y_d`` for a centred Gaussian vector with covariance ``S``."""
    return sum(math.prod(S[a, b] for a, b in m) for m in perfect_matchings(list(idx)))


def brute_var_v(d):
    """``Var sum Y_k^2`` from fourth moments summed over every index pair."""
    K = len(d)
    second = sum(wick_fourth(d, (i, i, j, j)) for i in range(K) for j in range(K))
    return second - np.trace(d) ** 2


def brute_cov_v(d1, d2, c):
    K1, K2 = c.shape
    joint = np.block([[d1, c], [c.T, d2]])
    cross = sum(wick_fourth(joint, (i, i, K1 + j, K1 + j)) for i in range(K1) for j in range(K2))
    return cross - np.trace(d1) * np.trace(d2)


def var_se(x):
    """Sample variance of ``x`` and its standard error from the fourth central moment."""
    c = x - x.mean()
    m2, m4 = np.mean(c**2), np.mean(c**4)
    return float(x.var(ddof=1)), float(math.sqrt((m4 - m2**2) / len(x)))


def cov_se(x, y):
    """Sample covariance and its standard error."""
    p = (x - x.mean()) * (y - y.mean())
    return float(np.cov(x, y, ddof=1)[0, 1]), float(p.std(ddof=1) / math.sqrt(len(p)))
