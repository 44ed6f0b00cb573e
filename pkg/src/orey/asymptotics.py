"""Limiting covariance of the pair of quadratic variations for fBm.

``Sigma11 = 2 (1 + 2 (4 - 2^{2g})^-2 sum_{j>=1} rho_hat(j)^2)``,
``Sigma22 = Sigma11 / 2`` and
``Sigma12 = 2^{-2g} (4 - 2^{2g})^-2 sum_{j in Z} rho_tilde(j)^2``.

Series are cut at a depth ``J`` chosen from the decay bounds
``|rho_hat(j)| <= 9 (4 - 2^{2g}) j^{2g-4}`` (``j >= 3``) and
``|rho_tilde(j)| <= 26 (4 - 2^{2g}) |j|^{2g-4}`` (``|j| >= 4``), so the
reported ``tail_bound`` is a certified bound on the truncation error.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ._stencil import power_stencil
from .errors import DomainError, TruncationError

MAX_TERMS = 10**7

_HAT_OFFSETS = (0, -2, 2, -1, 1)
_HAT_WEIGHTS = (-3.0, -0.5, -0.5, 2.0, 2.0)
_TILDE_OFFSETS = (1, 2, 3, -1, 0, -3, -2)
_TILDE_WEIGHTS = (0.5, 1.0, -0.5, 0.5, -2.0, -0.5, 1.0)


def _check_gamma(gamma):
    if not 0.0 < gamma < 1.0:
        raise DomainError(f"gamma must lie in (0, 1), got {gamma}")


def rho_hat(gamma, j):
    """Covariance of unit-step second differences of fBm at lag ``j``."""
    _check_gamma(gamma)
    return power_stencil(j, _HAT_OFFSETS, _HAT_WEIGHTS, 2.0 * gamma)


def rho_tilde(gamma, j):
    """Cross covariance between the coarse and fine second differences at offset ``j``."""
    _check_gamma(gamma)
    return power_stencil(j, _TILDE_OFFSETS, _TILDE_WEIGHTS, 2.0 * gamma)


@dataclass(frozen=True)
class AsymptoticCovariance:
    gamma: float
    Sigma11: float
    Sigma12: float
    Sigma22: float
    sigma_gamma_sq: float
    truncation_J: int
    tail_bound: float

    def matrix(self):
        return np.array([[self.Sigma11, self.Sigma12], [self.Sigma12, self.Sigma22]])

    def to_dict(self):
        return asdict(self)


def _tail_sum_bound(gamma, J):
    """Upper bound on ``sum_{j > J} j^{4g-8}`` (integral from ``J - 1``)."""
    e = 7.0 - 4.0 * gamma
    return (J - 1.0) ** (-e) / e


def truncation_depth(gamma, tol):
    """Smallest ``J`` whose certified truncation error is below ``tol``."""
    # error in Sigma11 <= 4 * 81 * tail; in Sigma12 <= 2^{-2g} * 676 * 2 * tail
    coef = max(4.0 * 81.0, 2.0 ** (-2 * gamma) * 676.0 * 2.0)
    e = 7.0 - 4.0 * gamma
    J = max(4, math.ceil(1.0 + (coef / (tol * e)) ** (1.0 / e)))
    if J > MAX_TERMS:
        raise TruncationError(f"tolerance {tol} needs J={J} > {MAX_TERMS} terms at gamma={gamma}")
    return J, coef * _tail_sum_bound(gamma, J)


def sigma_matrix(gamma, tol=1e-12) -> AsymptoticCovariance:
    _check_gamma(gamma)
    if not tol > 0:
        raise DomainError("tol must be positive")
    J, bound = truncation_depth(gamma, tol)
    a = 4.0 - 2.0 ** (2 * gamma)
    j = np.arange(1, J + 1, dtype=float)
    hat = rho_hat(gamma, j)
    # ascending |j|, positive and negative offsets paired
    t0 = rho_tilde(gamma, 0.0)
    tp = rho_tilde(gamma, j)
    tn = rho_tilde(gamma, -j)
    s_hat = float(np.sum(hat**2))
    s_tilde = float(t0**2 + np.sum(tp**2 + tn**2))
    s11 = 2.0 * (1.0 + 2.0 * s_hat / a**2)
    s12 = s_tilde / (2.0 ** (2 * gamma) * a**2)
    s22 = 0.5 * s11
    return AsymptoticCovariance(
        gamma=float(gamma),
        Sigma11=s11,
        Sigma12=s12,
        Sigma22=s22,
        sigma_gamma_sq=1.5 * s11 - 2.0 * s12,
        truncation_J=int(J),
        tail_bound=float(bound),
    )


def sigma_gamma_sq(gamma, tol=1e-12):
    """Asymptotic variance of ``2 ln2 sqrt(n) (gamma_hat - gamma)``."""
    return sigma_matrix(gamma, tol).sigma_gamma_sq
