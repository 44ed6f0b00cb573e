"""Seeded Monte Carlo validation of the bivariate CLT and of the estimator CLT."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .asymptotics import sigma_gamma_sq, sigma_matrix
from .conditions import Verdict
from .estimator import CI_GAMMA_RANGE, LN2
from .kernels import CovarianceModel, orey_metadata
from .pathgen import PathGenerator, simulate_many
from .quadvar import aggregates, orey_scale

KS_PASS = 0.01
KS_FAIL = 0.001
MIN_REPS_FOR_VERDICT = 100
COV_REL_TOL = 0.15


class Statistic(enum.Enum):
    BIVARIATE_V = "bivariate_v"
    GAMMA_HAT = "gamma_hat"


@dataclass
class McConfig:
    model: CovarianceModel
    n: int = 1024
    M: int = 500
    seed: int = 0
    statistic: Statistic = Statistic.BIVARIATE_V
    threads: int = 1
    generator: Optional[PathGenerator] = None
    ci_level: float = 0.95
    keep_samples: bool = False


@dataclass
class McReport:
    statistic: Statistic
    model: str
    n: int
    M: int
    seed: int
    generator: str
    mean: np.ndarray
    mean_se: np.ndarray
    cov: np.ndarray
    target: np.ndarray
    rel_errors: np.ndarray
    frobenius_rel_error: float
    ks_stat: np.ndarray
    ks_pvalue: np.ndarray
    verdicts: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    samples: Optional[np.ndarray] = None

    def to_dict(self):
        return {
            "statistic": self.statistic.value,
            "model": self.model,
            "n": self.n,
            "M": self.M,
            "seed": self.seed,
            "generator": self.generator,
            "mean": self.mean.tolist(),
            "mean_se": self.mean_se.tolist(),
            "cov": self.cov.tolist(),
            "target": self.target.tolist(),
            "rel_errors": self.rel_errors.tolist(),
            "frobenius_rel_error": self.frobenius_rel_error,
            "ks_stat": self.ks_stat.tolist(),
            "ks_pvalue": self.ks_pvalue.tolist(),
            "verdicts": {k: v.value for k, v in self.verdicts.items()},
            "extra": self.extra,
        }

    def write_samples(self, file):
        if self.samples is None:
            raise ValueError("report was produced without keep_samples")
        cols = ["v_n", "v_2n"] if self.statistic is Statistic.BIVARIATE_V else ["gamma_hat", "z"]
        with open(file, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["replication", *cols])
            for r, row in enumerate(self.samples):
                w.writerow([r, *(f"{x:.17g}" for x in row)])


def ks_verdict(pvalue, M):
    if M < MIN_REPS_FOR_VERDICT:
        return Verdict.INCONCLUSIVE
    if pvalue > KS_PASS:
        return Verdict.PASS
    if pvalue > KS_FAIL:
        return Verdict.INCONCLUSIVE
    return Verdict.FAIL


def ks_normality(x):
    """KS distance of the empirically standardized sample to N(0, 1), asymptotic p-value."""
    x = np.asarray(x, dtype=float)
    z = (x - x.mean()) / x.std(ddof=1)
    res = stats.kstest(z, "norm", method="asymp")
    return float(res.statistic), float(res.pvalue)


def _raw_vstats(paths):
    """``(V_n, V_2n)`` of raw second differences for each row of a ``2n``-step array."""
    fine = paths[:, 2:] - 2.0 * paths[:, 1:-1] + paths[:, :-2]
    coarse_pts = paths[:, ::2]
    coarse = coarse_pts[:, 2:] - 2.0 * coarse_pts[:, 1:-1] + coarse_pts[:, :-2]
    return np.einsum("ij,ij->i", coarse, coarse), np.einsum("ij,ij->i", fine, fine)


def _simulate(config):
    orey_metadata(config.model)
    paths, gen = simulate_many(
        config.model, 2 * config.n, config.seed, config.M, generator=config.generator, threads=config.threads
    )
    return paths, gen


def _summarize(config, gen, samples, target, extra):
    M = config.M
    mean = samples.mean(axis=0)
    mean_se = samples.std(axis=0, ddof=1) / math.sqrt(M)
    emp = np.atleast_2d(np.cov(samples, rowvar=False, ddof=1))
    rel = np.abs(emp - target) / np.abs(target)
    frob = float(np.linalg.norm(emp - target) / np.linalg.norm(target))
    ks = [ks_normality(samples[:, i]) for i in range(samples.shape[1])]
    report = McReport(
        statistic=config.statistic,
        model=config.model.spec(),
        n=config.n,
        M=M,
        seed=config.seed,
        generator=gen.value,
        mean=mean,
        mean_se=mean_se,
        cov=emp,
        target=target,
        rel_errors=rel,
        frobenius_rel_error=frob,
        ks_stat=np.array([k[0] for k in ks]),
        ks_pvalue=np.array([k[1] for k in ks]),
        extra=extra,
    )
    for i, (_, p) in enumerate(ks):
        report.verdicts[f"ks_{i}"] = ks_verdict(p, M)
    report.verdicts["covariance"] = Verdict.PASS if frob <= COV_REL_TOL else Verdict.FAIL
    return report


def run_bivariate(config: McConfig) -> McReport:
    """``sqrt(n) ((V_n - E V_n)/n, (V_2n - E V_2n)/(2n))`` with Orey normalization."""
    n = config.n
    gamma, _ = orey_metadata(config.model)
    paths, gen = _simulate(config)
    raw_n, raw_2n = _raw_vstats(paths)
    v_n = raw_n / orey_scale(config.model, n) ** 2
    v_2n = raw_2n / orey_scale(config.model, 2 * n) ** 2
    agg = aggregates(config.model, n, "orey")
    z = math.sqrt(n) * np.column_stack([(v_n - agg.expected_v_n) / n, (v_2n - agg.expected_v_2n) / (2 * n)])
    target = sigma_matrix(gamma).matrix()
    extra = {
        "expected_v": [agg.expected_v_n, agg.expected_v_2n],
        "exact_scaled_cov": agg.scaled_cov_matrix().tolist(),
    }
    report = _summarize(config, gen, z, target, extra)
    if config.keep_samples:
        report.samples = np.column_stack([v_n, v_2n])
    return report


def run_gamma_hat(config: McConfig) -> McReport:
    """Distribution of ``2 ln2 sqrt(n) (gamma_hat - gamma)`` and CI coverage."""
    n = config.n
    gamma, _ = orey_metadata(config.model)
    paths, gen = _simulate(config)
    raw_n, raw_2n = _raw_vstats(paths)
    g_hat = 0.5 - np.log(raw_2n / raw_n) / (2.0 * LN2)
    z = 2.0 * LN2 * math.sqrt(n) * (g_hat - gamma)
    target = np.array([[sigma_gamma_sq(gamma)]])

    zq = stats.norm.ppf(0.5 * (1.0 + config.ci_level))
    covered = 0
    usable = 0
    lo, hi = CI_GAMMA_RANGE
    for g in g_hat:
        if not lo < g < hi:
            continue
        usable += 1
        half = zq * math.sqrt(sigma_gamma_sq(float(g))) / (2.0 * LN2 * math.sqrt(n))
        covered += abs(g - gamma) <= half
    se = float(g_hat.std(ddof=1) / math.sqrt(config.M))
    extra = {
        "gamma": gamma,
        "gamma_hat_mean": float(g_hat.mean()),
        "gamma_hat_se": se,
        "bias_in_se": float((g_hat.mean() - gamma) / se),
        "ci_level": config.ci_level,
        "ci_coverage": float(covered / usable) if usable else None,
        "ci_usable": usable,
        "variance_rel_error": float(abs(z.var(ddof=1) - target[0, 0]) / target[0, 0]),
    }
    report = _summarize(config, gen, z[:, None], target, extra)
    if config.keep_samples:
        report.samples = np.column_stack([g_hat, z])
    return report


def run(config: McConfig) -> McReport:
    if config.statistic is Statistic.GAMMA_HAT:
        return run_gamma_hat(config)
    return run_bivariate(config)
