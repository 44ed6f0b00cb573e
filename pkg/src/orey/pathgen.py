"""Exact simulation of Gaussian trajectories on the uniform grid ``{kT/n}``.

Randomness: replication ``r`` of a run seeded with ``seed`` draws from a
Philox stream keyed by ``seed ^ r``; normals come from uniforms through the
inverse normal CDF. Paths therefore depend only on ``(model, n, seed, r)``,
never on how replications are spread over threads.
"""

from __future__ import annotations

import csv
import enum
import functools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import lapack
from scipy.special import ndtri

from .errors import EmbeddingError, PathFormatError, SimulationError
from .kernels import CovarianceModel, ProcessKind, fbm_cov, gram, sfbm_cov

log = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1
# replications per BLAS/FFT call; fixed so results never depend on threading
CHUNK = 32


class PathGenerator(enum.Enum):
    CHOLESKY = "cholesky"
    CIRCULANT_FBM = "circulant_fbm"
    SFBM_REFLECTION = "sfbm_reflection"
    IMPORTED = "imported"


@dataclass
class GridPath:
    """Trajectory ``values[k] = X_{kT/n}``, ``k = 0..n``."""

    T: float
    n: int
    values: np.ndarray
    seed: Optional[int] = None
    generator: PathGenerator = PathGenerator.IMPORTED

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.n + 1,):
            raise ValueError(f"expected {self.n + 1} values, got {self.values.shape}")
        if self.values[0] != 0.0:
            raise ValueError("values[0] must be exactly 0")

    @property
    def times(self):
        return np.arange(self.n + 1) * (self.T / self.n)

    def scaled(self, factor):
        return GridPath(self.T, self.n, self.values * factor, self.seed, self.generator)


def standard_normals(seed, index, size):
    """Standard normals for replication ``index`` of run ``seed``."""
    key = (int(seed) ^ int(index)) & _MASK64
    gen = np.random.Generator(np.random.Philox(key=key))
    bits = gen.integers(0, 1 << 53, size=size, dtype=np.uint64)
    return ndtri((bits.astype(float) + 0.5) * 2.0**-53)


def _check_n(n):
    if int(n) != n or n < 4:
        raise ValueError(f"grid count n must be an integer >= 4, got {n}")
    return int(n)


# ---------------------------------------------------------------------------
# Cholesky
# ---------------------------------------------------------------------------

def _factor_with_jitter(a):
    scale = float(np.max(np.diag(a)))
    factor, info = lapack.dpotrf(a, lower=1, clean=1)
    if info == 0:
        return factor
    for eps in (1e-14, 1e-13, 1e-12, 1e-11, 1e-10):
        factor, info = lapack.dpotrf(a + eps * scale * np.eye(len(a)), lower=1, clean=1)
        if info == 0:
            log.debug("Cholesky succeeded with jitter %g", eps)
            return factor
    raise SimulationError(
        f"Cholesky factorization failed at pivot {info} after jitter up to 1e-10", pivot=int(info)
    )


@functools.lru_cache(maxsize=8)
def _cached_factor(model, n):
    times = np.arange(1, n + 1) * (model.horizon / n)
    return _factor_with_jitter(gram(model, times))


def cholesky_factor(model: CovarianceModel, n: int):
    """Lower Cholesky factor of the Gram matrix at ``kT/n``, ``k = 1..n``."""
    n = _check_n(n)
    if model.kind is ProcessKind.CUSTOM:
        times = np.arange(1, n + 1) * (model.horizon / n)
        return _factor_with_jitter(gram(model, times))
    return _cached_factor(model, n)


def _cholesky_block(factor, n, seed, reps):
    # always a full CHUNK-wide product with replication r in column r % CHUNK,
    # so a path is bit-identical whether drawn alone or inside a batch
    cols = [r % CHUNK for r in reps]
    if len(set(cols)) != len(cols):
        raise ValueError("replications in one block must occupy distinct chunk columns")
    z = np.zeros((n, CHUNK))
    for r, c in zip(reps, cols):
        z[:, c] = standard_normals(seed, r, n)
    out = np.zeros((len(reps), n + 1))
    out[:, 1:] = (factor @ z)[:, cols].T
    return out


def simulate_cholesky(model: CovarianceModel, n: int, seed: int) -> GridPath:
    n = _check_n(n)
    factor = cholesky_factor(model, n)
    values = _cholesky_block(factor, n, seed, [0])[0]
    return GridPath(model.horizon, n, values, seed, PathGenerator.CHOLESKY)


# ---------------------------------------------------------------------------
# Circulant embedding (Davies-Harte) for fBm
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=16)
def _circulant_sqrt_eigs(gamma, n, step):
    lags = np.arange(n + 1, dtype=float)
    p = 2.0 * gamma
    r = 0.5 * (np.abs(lags + 1) ** p - 2 * lags**p + np.abs(lags - 1) ** p) * step**p
    return embedding_root(np.concatenate([r, r[-2:0:-1]]))


def embedding_root(row):
    """Square roots of the circulant eigenvalues of ``row``, scaled by ``1/len``."""
    eig = np.fft.fft(row).real
    if eig.min() < -1e-9 * eig.max():
        raise EmbeddingError(f"circulant embedding has negative eigenvalue {eig.min():.3e}")
    return np.sqrt(np.clip(eig, 0.0, None) / len(row))


def _fgn_block(gamma, n, step, seed, reps):
    """Fractional Gaussian noise, one row of ``n`` increments per replication."""
    root = _circulant_sqrt_eigs(float(gamma), int(n), float(step))
    m = len(root)
    z = np.stack([standard_normals(seed, r, 2 * m) for r in reps])
    w = np.fft.fft(root * (z[:, :m] + 1j * z[:, m:]), axis=1)
    return w.real[:, :n]


def _fbm_block(gamma, n, T, seed, reps):
    inc = _fgn_block(gamma, n, T / n, seed, reps)
    out = np.zeros((len(reps), n + 1))
    np.cumsum(inc, axis=1, out=out[:, 1:])
    return out


def simulate_fbm_circulant(gamma: float, n: int, T: float, seed: int) -> GridPath:
    n = _check_n(n)
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    values = _fbm_block(gamma, n, float(T), seed, [0])[0]
    return GridPath(float(T), n, values, seed, PathGenerator.CIRCULANT_FBM)


# ---------------------------------------------------------------------------
# sfBm as the symmetrization (B_t + B_{-t}) / sqrt(2) of a two-sided fBm
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=64)
def reflection_self_check(H, pairs=50, tol=1e-10):
    """Compare the covariance of ``(B_t + B_{-t})/sqrt 2`` with the sfBm kernel."""
    rng = np.random.default_rng(20240611)
    s, t = rng.uniform(0.0, 1.0, size=(2, pairs))
    reflected = 0.5 * (fbm_cov(s, t, H) + fbm_cov(s, -t, H) + fbm_cov(-s, t, H) + fbm_cov(-s, -t, H))
    return bool(np.max(np.abs(reflected - sfbm_cov(s, t, H))) < tol)


def _sfbm_block(H, n, T, seed, reps):
    # two-sided fBm on {-n..n} * T/n, anchored at the midpoint
    w = _fbm_block(H, 2 * n, 2.0 * T, seed, reps)
    mid = w[:, n : n + 1]
    right = w[:, n:] - mid
    left = w[:, n::-1] - mid
    out = (right + left) / math.sqrt(2.0)
    out[:, 0] = 0.0
    return out


def simulate_sfbm_reflection(H: float, n: int, T: float, seed: int) -> GridPath:
    n = _check_n(n)
    if not 0.0 < H < 1.0:
        raise ValueError(f"H must lie in (0, 1), got {H}")
    if not reflection_self_check(float(H)):
        log.warning("sfBm reflection self-check failed for H=%s; using Cholesky", H)
        return simulate_cholesky(CovarianceModel.sfbm(H, T), n, seed)
    values = _sfbm_block(H, n, float(T), seed, [0])[0]
    return GridPath(float(T), n, values, seed, PathGenerator.SFBM_REFLECTION)


# ---------------------------------------------------------------------------
# dispatch and batches
# ---------------------------------------------------------------------------

def default_generator(model: CovarianceModel) -> PathGenerator:
    if model.kind is ProcessKind.FBM:
        return PathGenerator.CIRCULANT_FBM
    if model.kind is ProcessKind.SFBM and reflection_self_check(model.p["H"]):
        return PathGenerator.SFBM_REFLECTION
    return PathGenerator.CHOLESKY


def _block_fn(model, n, generator):
    T = model.horizon
    if generator is PathGenerator.CHOLESKY:
        factor = cholesky_factor(model, n)
        return lambda seed, reps: _cholesky_block(factor, n, seed, reps)
    if generator is PathGenerator.CIRCULANT_FBM:
        if model.kind is not ProcessKind.FBM:
            raise ValueError("circulant generator only applies to fBm")
        return lambda seed, reps: _fbm_block(model.p["gamma"], n, T, seed, reps)
    if generator is PathGenerator.SFBM_REFLECTION:
        if model.kind is not ProcessKind.SFBM or not reflection_self_check(model.p["H"]):
            raise ValueError("reflection generator only applies to sfBm passing the self-check")
        return lambda seed, reps: _sfbm_block(model.p["H"], n, T, seed, reps)
    raise ValueError(f"cannot simulate with generator {generator}")


def simulate(model: CovarianceModel, n: int, seed: int, generator: Optional[PathGenerator] = None):
    """One path of ``model`` on ``n`` steps, using the fastest exact method by default."""
    n = _check_n(n)
    generator = generator or default_generator(model)
    values = _block_fn(model, n, generator)(seed, [0])[0]
    return GridPath(model.horizon, n, values, seed, generator)


def simulate_many(model, n, seed, reps, generator=None, threads=1):
    """Array of shape ``(reps, n + 1)``; row ``r`` is replication ``r`` of ``seed``.

    Output is bit-identical for any ``threads``.
    """
    n = _check_n(n)
    generator = generator or default_generator(model)
    block = _block_fn(model, n, generator)
    chunks = [list(range(a, min(a + CHUNK, reps))) for a in range(0, reps, CHUNK)]

    def run(idx):
        try:
            return block(seed, idx)
        except SimulationError as exc:
            exc.replication = idx[0]
            raise

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    return np.concatenate(parts, axis=0) if parts else np.zeros((0, n + 1)), generator


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def export_path(path: GridPath, file):
    """Write ``k,t,x`` rows with 17 significant digits."""
    close = isinstance(file, (str, bytes)) or hasattr(file, "__fspath__")
    fh = open(file, "w", newline="") if close else file
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "t", "x"])
        for k, (t, x) in enumerate(zip(path.times, path.values)):
            w.writerow([k, f"{t:.17g}", f"{x:.17g}"])
    finally:
        if close:
            fh.close()


def import_path(file) -> GridPath:
    close = isinstance(file, (str, bytes)) or hasattr(file, "__fspath__")
    fh = open(file, newline="") if close else file
    try:
        rows = list(csv.reader(fh))
    finally:
        if close:
            fh.close()
    if not rows or [c.strip() for c in rows[0]] != ["k", "t", "x"]:
        raise PathFormatError("missing header 'k,t,x'")
    body = [r for r in rows[1:] if r]
    try:
        k = np.array([int(r[0]) for r in body])
        t = np.array([float(r[1]) for r in body])
        x = np.array([float(r[2]) for r in body])
    except (ValueError, IndexError) as exc:
        raise PathFormatError(f"unparseable row: {exc}") from exc
    n = len(body) - 1
    if n < 1:
        raise PathFormatError("path needs at least two rows")
    if not np.array_equal(k, np.arange(n + 1)):
        raise PathFormatError("rows must be k = 0..n in order")
    if np.any(np.diff(t) <= 0):
        raise PathFormatError("t must be strictly increasing")
    if t[0] != 0.0:
        raise PathFormatError("t must start at 0")
    T = t[-1]
    if np.max(np.abs(t - k * (T / n))) > 1e-9 * T:
        raise PathFormatError("grid is not uniform")
    if x[0] != 0.0:
        raise PathFormatError("x at k=0 must be 0")
    return GridPath(float(T), n, x, None, PathGenerator.IMPORTED)
