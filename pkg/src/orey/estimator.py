"""Orey index estimation from one trajectory observed on ``2n + 1`` grid points.

    gamma_hat = 1/2 - ln(V_2n / V_n) / (2 ln 2)

where ``V_m`` is the sum of squared raw second differences at level ``m``
and the level-``n`` differences use every second observation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.stats import norm

from .asymptotics import sigma_gamma_sq
from .errors import DegenerateInputError
from .kernels import CovarianceModel, orey_metadata
from .quadvar import second_differences

LN2 = math.log(2.0)
# sigma_gamma is not evaluated this close to the ends of (0, 1)
CI_GAMMA_RANGE = (0.01, 0.99)


@dataclass
class EstimateResult:
    gamma_hat: float
    n: int
    v_n: float
    v_2n: float
    ci_level: Optional[float] = None
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None
    sigma_used: Optional[float] = None

    def to_dict(self):
        return asdict(self)


def _path_values(path):
    return np.asarray(getattr(path, "values", path), dtype=float)


def _is_degenerate(v, diffs, values):
    # second differences at rounding level of the data count as zero
    noise = 64.0 * np.finfo(float).eps * max(float(np.max(np.abs(values))), np.finfo(float).tiny)
    return v <= diffs.size * noise**2


def gamma_hat(path, ci: Optional[float] = None) -> EstimateResult:
    """Estimate the Orey index; optionally attach a plug-in confidence interval."""
    values = _path_values(path)
    steps = len(values) - 1
    if steps % 2 or steps < 8:
        raise ValueError(f"need 2n + 1 points with n >= 4, got {len(values)}")
    fine = second_differences(values)
    coarse = second_differences(values[::2])
    v_2n = float(np.dot(fine, fine))
    v_n = float(np.dot(coarse, coarse))
    if _is_degenerate(v_n, coarse, values) or _is_degenerate(v_2n, fine, values):
        raise DegenerateInputError("quadratic variation vanishes (affine or constant path)")
    g = 0.5 - math.log(v_2n / v_n) / (2.0 * LN2)
    result = EstimateResult(gamma_hat=g, n=steps // 2, v_n=v_n, v_2n=v_2n)
    if ci is not None:
        bounds = confidence_interval(result, ci)
        if bounds is not None:
            result.ci_level = float(ci)
            result.ci_low, result.ci_high = bounds
    return result


def confidence_interval(result: EstimateResult, level: float, sigma: Optional[float] = None):
    """``gamma_hat +- z sigma / (2 ln2 sqrt n)`` with ``sigma`` plugged in at ``gamma_hat``.

    Returns ``None`` (with a warning) when ``gamma_hat`` is too close to the
    boundary for the asymptotic variance to be evaluated.
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"confidence level must lie in (0, 1), got {level}")
    if sigma is None:
        lo, hi = CI_GAMMA_RANGE
        if not lo < result.gamma_hat < hi:
            warnings.warn(
                f"gamma_hat={result.gamma_hat:.4f} outside {CI_GAMMA_RANGE}; confidence interval omitted",
                stacklevel=2,
            )
            return None
        sigma = math.sqrt(sigma_gamma_sq(result.gamma_hat))
    result.sigma_used = float(sigma)
    half = float(norm.ppf(0.5 * (1.0 + level))) * sigma / (2.0 * LN2 * math.sqrt(result.n))
    return result.gamma_hat - half, result.gamma_hat + half


def scaled_qv(path, model: CovarianceModel):
    """``(m/T)^(2 gamma - 1) * sum_k (Delta^2_{m,k} X)^2`` on the path's own grid.

    Converges a.s. to :func:`scaled_qv_limit`.
    """
    gamma, _ = orey_metadata(model)
    values = _path_values(path)
    m = len(values) - 1
    T = float(path.T) if hasattr(path, "values") else model.horizon
    d = second_differences(values)
    return (m / T) ** (2.0 * gamma - 1.0) * float(np.dot(d, d))


def scaled_qv_limit(model: CovarianceModel, T=None):
    gamma, kappa = orey_metadata(model)
    T = model.horizon if T is None else T
    return kappa**2 * (4.0 - 2.0 ** (2.0 * gamma)) * T
