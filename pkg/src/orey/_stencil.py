"""Stable evaluation of finite-difference stencils applied to ``|x|**p``.

The correlation functions of second-order increments are weighted sums
``sum_i w_i |x + a_i|**p`` whose weights annihilate low powers of ``a``.
For large ``|x|`` the direct sum loses almost every significant digit, so
beyond ``4 * max|a|`` the binomial series in ``a / x`` is used instead.
"""

import numpy as np
from scipy.special import binom

_SERIES_ORDER = 64


def abspow(x, p):
    """``|x|**p`` computed as ``exp(p log|x|)`` with ``0**p = 0``."""
    x = np.abs(np.asarray(x, dtype=float))
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(p * np.log(x[pos]))
    return out


def power_stencil(x, offsets, weights, p):
    """Return ``sum_i weights[i] * |x + offsets[i]|**p`` elementwise in ``x``."""
    offsets = np.asarray(offsets, dtype=float)
    weights = np.asarray(weights, dtype=float)
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.empty_like(x)

    reach = np.max(np.abs(offsets))
    far = np.abs(x) >= 4.0 * max(reach, 1.0)
    near = ~far
    if near.any():
        xn = x[near]
        out[near] = sum(w * abspow(xn + a, p) for a, w in zip(offsets, weights))
    if far.any():
        xf = x[far]
        ks = np.arange(_SERIES_ORDER + 1)
        sign = np.where(xf > 0, 1.0, -1.0)
        mag = np.abs(xf)
        # |x + a|^p = |x|^p (1 + sign*a/|x|)^p
        moments = (weights[:, None] * offsets[:, None] ** ks).sum(axis=0)
        coef = binom(p, ks) * moments
        keep = coef != 0.0
        ks, coef = ks[keep], coef[keep]
        r = sign / mag
        # Horner in r over the dense coefficient vector
        dense = np.zeros(ks[-1] + 1 if ks.size else 1)
        dense[ks] = coef
        acc = np.full_like(r, dense[-1])
        for c in dense[-2::-1]:
            acc = acc * r + c
        out[far] = mag**p * acc
    return out[0] if scalar else out
