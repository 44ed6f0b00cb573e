"""Second-order increments, quadratic variations and their exact moments.

Notation: for a path observed at ``kT/m`` (``m = n`` or ``2n``) the second
difference is ``X_{(k+1)T/m} - 2 X_{kT/m} + X_{(k-1)T/m}``, ``k = 1..m-1``.
``d`` holds the covariances of the normalized differences at one level and
``c`` the cross covariances between level ``n`` and level ``2n``.

Coefficient matrices are assembled from the covariance kernel in row
blocks, so aggregates (row sums, Frobenius norms, traces) never require the
full matrix in memory.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .kernels import CovarianceModel, cov, orey_metadata

_BLOCK_ELEMS = 1 << 21
_STENCIL = np.array([1.0, -2.0, 1.0])


class NormalizationMode(enum.Enum):
    EXACT_VARIANCE = "exact"
    OREY = "orey"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        table = {"exact": cls.EXACT_VARIANCE, "exact_variance": cls.EXACT_VARIANCE, "orey": cls.OREY}
        try:
            return table[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown normalization mode {value!r}") from None


def second_differences(values):
    """Raw second differences of a sequence (length ``len(values) - 2``)."""
    v = np.asarray(values, dtype=float)
    return v[2:] - 2.0 * v[1:-1] + v[:-2]


def vstat(diffs):
    """Sum of squares of (normalized) second differences."""
    diffs = np.asarray(diffs, dtype=float)
    if diffs.size == 0:
        raise ValueError("vstat needs at least one difference")
    return float(np.dot(diffs, diffs))


def orey_scale(model: CovarianceModel, m: int):
    """``kappa * sqrt(4 - 2^(2 gamma)) * (T/m)^gamma``."""
    gamma, kappa = orey_metadata(model)
    return kappa * np.sqrt(4.0 - 2.0 ** (2 * gamma)) * (model.horizon / m) ** gamma


def _times(model, m):
    return np.arange(m + 1) * (model.horizon / m)


def raw_variances(model: CovarianceModel, m: int):
    """``E (Delta^2_{m,k} X)^2`` for ``k = 1..m-1``."""
    t = _times(model, m)
    pts = np.stack([t[:-2], t[1:-1], t[2:]])
    out = np.zeros(m - 1)
    for a in range(3):
        for b in range(3):
            out += _STENCIL[a] * _STENCIL[b] * cov(model, pts[a], pts[b])
    return out


def _scales(model, m, mode):
    if mode is NormalizationMode.OREY:
        return np.full(m - 1, orey_scale(model, m))
    return np.sqrt(raw_variances(model, m))


def second_diffs(path, level: int, mode=None, model: CovarianceModel = None):
    """Normalized second differences of a ``2n``-step path at level ``i*n``.

    ``path`` is a GridPath (or array) with ``2n + 1`` points; level 1 uses
    every second point. ``mode=None`` returns raw differences.
    """
    values = np.asarray(getattr(path, "values", path), dtype=float)
    if level not in (1, 2):
        raise ValueError("level multiplier must be 1 or 2")
    if (len(values) - 1) % 2:
        raise ValueError("path must have 2n + 1 points")
    v = values if level == 2 else values[::2]
    diffs = second_differences(v)
    if mode is None:
        return diffs
    mode = NormalizationMode.parse(mode)
    if model is None:
        raise ValueError("normalized differences need the covariance model")
    # plain arrays are taken to live on the model's horizon
    if hasattr(path, "values") and model.horizon != path.T:
        model = model.with_horizon(path.T)
    return diffs / _scales(model, len(v) - 1, mode)


# ---------------------------------------------------------------------------
# coefficient blocks
# ---------------------------------------------------------------------------

def _rows_per_block(width):
    return max(1, _BLOCK_ELEMS // max(width, 1))


def _stencil_rows(g):
    return g[2:] - 2.0 * g[1:-1] + g[:-2]


def _stencil_cols(g):
    return g[:, 2:] - 2.0 * g[:, 1:-1] + g[:, :-2]


def d_blocks(model: CovarianceModel, m: int, mode, rows=None):
    """Yield ``(k0, block)`` with ``block[r, j] = d_{k0 + r, j + 1}`` at level ``m``.

    Row indices ``k`` are 1-based as in the formulas.
    """
    mode = NormalizationMode.parse(mode)
    t = _times(model, m)
    scale = _scales(model, m, mode)
    step = rows or _rows_per_block(m + 1)
    for k0 in range(1, m, step):
        k1 = min(k0 + step, m)
        g = cov(model, t[k0 - 1 : k1 + 1, None], t[None, :])
        block = _stencil_cols(_stencil_rows(g))
        yield k0, block / (scale[k0 - 1 : k1 - 1, None] * scale[None, :])


def c_blocks(model: CovarianceModel, n: int, mode, rows=None):
    """Yield ``(j0, block)`` with ``block[r, k] = c_{j0 + r, k + 1}``."""
    mode = NormalizationMode.parse(mode)
    t2 = _times(model, 2 * n)
    s1 = _scales(model, n, mode)
    s2 = _scales(model, 2 * n, mode)
    step = rows or _rows_per_block(2 * n + 1)
    for j0 in range(1, n, step):
        j1 = min(j0 + step, n)
        pts = t2[2 * j0 - 2 : 2 * j1 + 1 : 2]
        g = cov(model, pts[:, None], t2[None, :])
        block = _stencil_cols(_stencil_rows(g))
        yield j0, block / (s1[j0 - 1 : j1 - 1, None] * s2[None, :])


def d_matrix(model, m, mode):
    return np.concatenate([b for _, b in d_blocks(model, m, mode)], axis=0)


def c_matrix(model, n, mode):
    return np.concatenate([b for _, b in c_blocks(model, n, mode)], axis=0)


@dataclass
class CoefficientSet:
    """Dense ``d`` at levels ``n`` and ``2n`` plus the cross matrix ``c``."""

    n: int
    mode: NormalizationMode
    d_n: np.ndarray
    d_2n: np.ndarray
    c: np.ndarray

    def d(self, level):
        return self.d_n if level == 1 else self.d_2n

    def expected_v(self, level):
        return float(np.trace(self.d(level)))

    def var_v(self, level):
        return isserlis_var(self.d(level))

    def cov_v(self):
        return isserlis_cov(self.c)


def coefficients(model: CovarianceModel, n: int, mode="orey") -> CoefficientSet:
    if n < 4:
        raise ValueError("n must be >= 4")
    mode = NormalizationMode.parse(mode)
    return CoefficientSet(n, mode, d_matrix(model, n, mode), d_matrix(model, 2 * n, mode), c_matrix(model, n, mode))


def isserlis_var(d):
    """Exact ``Var sum_k Y_k^2`` for a Gaussian vector with covariance ``d``."""
    d = np.asarray(d, dtype=float)
    upper = np.triu(d, 1)
    return float(2.0 * np.sum(np.diag(d) ** 2) + 4.0 * np.sum(upper**2))


def isserlis_cov(c):
    """Exact ``cov(V_n, V_2n)`` from the cross coefficients."""
    c = np.asarray(c, dtype=float)
    return float(2.0 * np.sum(c**2))


@dataclass
class CoefficientAggregates:
    """Streamed summaries of a coefficient set; all entries exact."""

    n: int
    mode: NormalizationMode
    row_sum_max_n: float
    row_sum_max_2n: float
    expected_v_n: float
    expected_v_2n: float
    var_v_n: float
    var_v_2n: float
    cov_v: float

    def scaled_cov(self, i, j):
        n = self.n
        if (i, j) == (1, 1):
            return self.var_v_n / n
        if (i, j) == (2, 2):
            return self.var_v_2n / (4 * n)
        if {i, j} == {1, 2}:
            return self.cov_v / (2 * n)
        raise ValueError("i, j must be in {1, 2}")

    def scaled_cov_matrix(self):
        return np.array([[self.scaled_cov(i, j) for j in (1, 2)] for i in (1, 2)])


def _level_summary(model, m, mode):
    row_max = 0.0
    trace = 0.0
    var = 0.0
    for k0, block in d_blocks(model, m, mode):
        row_max = max(row_max, float(np.abs(block).sum(axis=1).max()))
        r = np.arange(block.shape[0])
        diag = block[r, k0 - 1 + r]
        trace += float(diag.sum())
        # 2 sum d_kk^2 + 4 sum_{k<l} d_kl^2, accumulated by rows of the upper triangle
        upper = np.triu(block, k0)
        var += 2.0 * float(np.sum(diag**2)) + 4.0 * float(np.sum(upper**2))
    return row_max, trace, var


def aggregates(model: CovarianceModel, n: int, mode="orey") -> CoefficientAggregates:
    mode = NormalizationMode.parse(mode)
    rn, en, vn = _level_summary(model, n, mode)
    r2, e2, v2 = _level_summary(model, 2 * n, mode)
    cv = sum(2.0 * float(np.sum(b**2)) for _, b in c_blocks(model, n, mode))
    return CoefficientAggregates(n, mode, rn, r2, en, e2, vn, v2, cv)


def scaled_cov(model: CovarianceModel, n: int, ij=(1, 1), mode="orey"):
    """``n cov((in)^-1 V_in, (jn)^-1 V_jn)`` computed exactly."""
    i, j = ij
    return aggregates(model, n, mode).scaled_cov(i, j)
