"""Covariance functions of fBm, subfractional and bifractional Brownian motion.

All built-in processes start at zero. A model carries its horizon ``T`` and
the pair ``(gamma, kappa)``: the Orey index and the constant for which
``E(X_{t+h} - X_t)^2 / (kappa^2 h^(2 gamma)) -> 1`` as ``h -> 0``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._stencil import abspow
from .errors import DomainError, MissingMetadataError, NumericalConsistencyError


class ProcessKind(enum.Enum):
    FBM = "fbm"
    SFBM = "sfbm"
    BIFBM = "bifbm"
    CUSTOM = "custom"


@dataclass(frozen=True)
class CovarianceModel:
    """A named zero-mean Gaussian process on ``[0, T]``.

    Use the ``fbm``, ``sfbm``, ``bifbm`` and ``custom`` constructors rather
    than instantiating directly.
    """

    kind: ProcessKind
    params: tuple = ()
    horizon: float = 1.0
    orey_gamma: Optional[float] = None
    kappa: Optional[float] = None
    custom_cov: Optional[Callable] = field(default=None, compare=False, repr=False)

    @classmethod
    def fbm(cls, gamma, horizon=1.0):
        _check_unit("gamma", gamma)
        return cls(ProcessKind.FBM, (("gamma", float(gamma)),), _horizon(horizon), float(gamma), 1.0)

    @classmethod
    def sfbm(cls, H, horizon=1.0):
        _check_unit("H", H)
        return cls(ProcessKind.SFBM, (("H", float(H)),), _horizon(horizon), float(H), 1.0)

    @classmethod
    def bifbm(cls, H, K, horizon=1.0):
        _check_unit("H", H)
        if not 0.0 < K <= 1.0:
            raise DomainError(f"K must lie in (0, 1], got {K}")
        return cls(
            ProcessKind.BIFBM,
            (("H", float(H)), ("K", float(K))),
            _horizon(horizon),
            float(H) * float(K),
            2.0 ** ((1.0 - K) / 2.0),
        )

    @classmethod
    def custom(cls, cov, horizon=1.0, orey_gamma=None, kappa=None, name="custom"):
        """Wrap a user covariance ``cov(s, t)``.

        The Orey metadata is never inferred; pass it explicitly if the
        normalized (OREY mode) quantities are needed.
        """
        if orey_gamma is not None:
            _check_unit("orey_gamma", orey_gamma)
        if kappa is not None and not kappa > 0:
            raise DomainError(f"kappa must be positive, got {kappa}")
        return cls(ProcessKind.CUSTOM, (("name", name),), _horizon(horizon), orey_gamma, kappa, cov)

    @property
    def p(self):
        return dict(self.params)

    def with_horizon(self, horizon):
        return CovarianceModel(
            self.kind, self.params, _horizon(horizon), self.orey_gamma, self.kappa, self.custom_cov
        )

    def spec(self):
        """Inverse of :func:`parse_model` for built-ins."""
        if self.kind is ProcessKind.CUSTOM:
            return f"custom:{self.p['name']}"
        body = ",".join(f"{k}={v!r}" for k, v in self.params)
        return f"{self.kind.value}:{body}"

    def cov(self, s, t):
        return cov(self, s, t)


def _check_unit(name, value):
    if not 0.0 < value < 1.0:
        raise DomainError(f"{name} must lie in (0, 1), got {value}")


def _horizon(T):
    T = float(T)
    if not T > 0:
        raise DomainError(f"horizon must be positive, got {T}")
    return T


def fbm_cov(s, t, gamma):
    """``E B_s B_t`` for fBm with Hurst index ``gamma`` (any real ``s, t``)."""
    p = 2.0 * gamma
    return 0.5 * (abspow(s, p) + abspow(t, p) - abspow(np.subtract(t, s), p))


def sfbm_cov(s, t, H):
    p = 2.0 * H
    return abspow(s, p) + abspow(t, p) - 0.5 * (abspow(np.add(s, t), p) + abspow(np.subtract(s, t), p))


def bifbm_cov(s, t, H, K):
    q = 2.0 * H
    base = abspow(s, q) + abspow(t, q)
    out = 2.0**-K * (abspow(base, K) - abspow(np.subtract(t, s), q * K))
    # (t^{2H})^K and t^{2HK} differ in the last bit; X_0 = 0 must hold exactly
    return np.where((np.asarray(s) == 0) | (np.asarray(t) == 0), 0.0, out)


def cov(model: CovarianceModel, s, t):
    """Covariance ``E X_s X_t`` on ``[0, T]^2``; broadcasts over arrays."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    slack = 1e-12 * model.horizon
    for name, x in (("s", s), ("t", t)):
        if np.any(x < -slack) or np.any(x > model.horizon + slack) or np.any(np.isnan(x)):
            raise DomainError(f"{name} outside [0, {model.horizon}]")
    par = model.p
    if model.kind is ProcessKind.FBM:
        out = fbm_cov(s, t, par["gamma"])
    elif model.kind is ProcessKind.SFBM:
        out = sfbm_cov(s, t, par["H"])
    elif model.kind is ProcessKind.BIFBM:
        out = bifbm_cov(s, t, par["H"], par["K"])
    else:
        s, t = np.broadcast_arrays(s, t)
        try:
            out = np.asarray(model.custom_cov(s, t), dtype=float)
            if out.shape != s.shape:
                raise ValueError
        except (TypeError, ValueError):
            out = np.vectorize(model.custom_cov, otypes=[float])(s, t)
    return out[()] if np.ndim(out) == 0 else out


def incremental_variance(model: CovarianceModel, s, t):
    """``E (X_t - X_s)^2`` for ``s <= t``."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s > t):
        raise DomainError("incremental_variance requires s <= t")
    v = cov(model, t, t) - 2.0 * cov(model, s, t) + cov(model, s, s)
    if np.any(v < -1e-12):
        raise NumericalConsistencyError(f"negative incremental variance {np.min(v)}")
    return np.maximum(v, 0.0)


def orey_metadata(model: CovarianceModel):
    """Return ``(gamma, kappa)``; raises for custom models lacking them."""
    if model.orey_gamma is None or model.kappa is None:
        raise MissingMetadataError(
            f"model {model.spec()} has no Orey metadata; supply orey_gamma and kappa"
        )
    return model.orey_gamma, model.kappa


def parse_model(spec: str, horizon=1.0) -> CovarianceModel:
    """Parse ``"fbm:gamma=0.7"``, ``"sfbm:H=0.7"`` or ``"bifbm:H=0.6,K=0.5"``."""
    try:
        kind, _, body = spec.strip().partition(":")
        kw = {}
        for item in filter(None, body.split(",")):
            key, _, val = item.partition("=")
            kw[key.strip()] = float(val)
        kind = kind.strip().lower()
        if kind == "fbm":
            (gamma,) = [kw.pop(k) for k in ("gamma",)]
        elif kind == "sfbm":
            (H,) = [kw.pop(k) for k in ("H",)]
        elif kind == "bifbm":
            H, K = [kw.pop(k) for k in ("H", "K")]
        else:
            raise KeyError(kind)
        if kw:
            raise KeyError(next(iter(kw)))
    except (KeyError, ValueError) as exc:
        raise DomainError(f"unknown or malformed model spec {spec!r}") from exc
    if kind == "fbm":
        return CovarianceModel.fbm(gamma, horizon)
    if kind == "sfbm":
        return CovarianceModel.sfbm(H, horizon)
    return CovarianceModel.bifbm(H, K, horizon)


def gram(model: CovarianceModel, times):
    """Covariance matrix of ``X`` at ``times``, exactly symmetrized."""
    times = np.asarray(times, dtype=float)
    g = cov(model, times[:, None], times[None, :])
    return 0.5 * (g + g.T)

