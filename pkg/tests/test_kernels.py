import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orey.errors import DomainError, MissingMetadataError, NumericalConsistencyError
from orey.kernels import (
    CovarianceModel,
    ProcessKind,
    cov,
    gram,
    incremental_variance,
    orey_metadata,
    parse_model,
)

from conftest import BUILTINS

unit = st.floats(0.02, 0.98)


def test_fbm_unit_variance_at_one():
    assert cov(CovarianceModel.fbm(0.5), 1.0, 1.0) == 1.0


def test_sfbm_half_is_brownian(rng):
    m = CovarianceModel.sfbm(0.5)
    s, t = rng.uniform(0, 1, size=(2, 20))
    np.testing.assert_allclose(cov(m, s, t), np.minimum(s, t), atol=1e-14)
    grid = np.linspace(0, 1, 17)
    np.testing.assert_allclose(gram(m, grid), np.minimum.outer(grid, grid), atol=1e-14)


@pytest.mark.parametrize("model", BUILTINS, ids=lambda m: m.spec())
def test_starts_at_zero(model):
    t = np.linspace(0, model.horizon, 11)
    assert np.all(cov(model, 0.0, t) == 0.0)


@pytest.mark.parametrize("model", BUILTINS, ids=lambda m: m.spec())
def test_symmetric(model, rng):
    s, t = rng.uniform(0, model.horizon, size=(2, 1000))
    assert np.max(np.abs(cov(model, s, t) - cov(model, t, s))) < 1e-14


@pytest.mark.parametrize(
    "model",
    [CovarianceModel.fbm(g) for g in (0.1, 0.5, 0.9)]
    + [CovarianceModel.sfbm(h) for h in (0.1, 0.5, 0.9)]
    + [CovarianceModel.bifbm(h, k) for h in (0.3, 0.9) for k in (0.3, 1.0)],
    ids=lambda m: m.spec(),
)
def test_gram_psd(model):
    times = np.arange(1, 65) * (model.horizon / 64)
    eig = np.linalg.eigvalsh(gram(model, times))
    assert eig.min() >= -1e-10 * eig.max()


def test_out_of_range_rejected():
    m = CovarianceModel.fbm(0.5)
    with pytest.raises(DomainError):
        cov(m, -0.1, 0.5)
    with pytest.raises(DomainError):
        cov(m, 0.5, 1.5)


@given(gamma=unit, a=st.floats(0, 1), b=st.floats(0, 1))
def test_fbm_incremental_variance_power_law(gamma, a, b):
    s, t = min(a, b), max(a, b)
    v = incremental_variance(CovarianceModel.fbm(gamma), s, t)
    assert math.isclose(v, (t - s) ** (2 * gamma), rel_tol=1e-9, abs_tol=1e-12)


def test_sfbm_half_incremental_variance(rng):
    s = rng.uniform(0, 0.5, 10)
    t = s + rng.uniform(0, 0.5, 10)
    np.testing.assert_allclose(incremental_variance(CovarianceModel.sfbm(0.5), s, t), t - s, atol=1e-14)


@pytest.mark.parametrize("model", BUILTINS, ids=lambda m: m.spec())
def test_incremental_variance_zero_on_diagonal(model):
    t = np.linspace(0, model.horizon, 9)
    assert np.all(incremental_variance(model, t, t) == 0.0)


def test_incremental_variance_negative_is_reported():
    bad = CovarianceModel.custom(lambda s, t: -s * t, orey_gamma=0.5, kappa=1.0)
    with pytest.raises(NumericalConsistencyError):
        incremental_variance(bad, 0.2, 0.6)


def test_incremental_variance_order():
    with pytest.raises(DomainError):
        incremental_variance(CovarianceModel.fbm(0.5), 0.6, 0.2)


def test_orey_metadata():
    assert orey_metadata(CovarianceModel.sfbm(0.7)) == (0.7, 1.0)
    assert orey_metadata(CovarianceModel.fbm(0.3)) == (0.3, 1.0)
    g, k = orey_metadata(CovarianceModel.bifbm(0.6, 0.5))
    assert math.isclose(g, 0.3) and math.isclose(k, 2**0.25)


def test_custom_without_metadata():
    m = CovarianceModel.custom(lambda s, t: np.minimum(s, t))
    assert cov(m, 0.3, 0.4) == 0.3
    with pytest.raises(MissingMetadataError):
        orey_metadata(m)


def test_custom_scalar_callable_is_vectorized():
    m = CovarianceModel.custom(lambda s, t: min(s, t), orey_gamma=0.5, kappa=1.0)
    np.testing.assert_array_equal(cov(m, [0.1, 0.5], [0.3, 0.2]), [0.1, 0.2])


def test_bifbm_incremental_variance_normalization():
    m = CovarianceModel.bifbm(0.6, 0.5)
    g, k = orey_metadata(m)
    errs = []
    for j in range(4, 15):
        h = 2.0**-j
        errs.append(abs(incremental_variance(m, 0.5, 0.5 + h) / (k**2 * h ** (2 * g)) - 1))
    assert np.all(np.diff(errs) < 0)
    assert errs[-1] < 1e-3


@pytest.mark.parametrize("model", [CovarianceModel.sfbm(0.3), CovarianceModel.sfbm(0.7), CovarianceModel.bifbm(0.6, 0.5)],
                         ids=lambda m: m.spec())
def test_small_h_normalization_sup(model):
    g, k = orey_metadata(model)
    T = model.horizon
    t = np.linspace(0.1 * T, 0.9 * T, 81)
    sups = []
    for j in range(4, 15):
        h = T * 2.0**-j
        sups.append(np.max(np.abs(incremental_variance(model, t, t + h) / (k**2 * h ** (2 * g)) - 1)))
    assert np.all(np.diff(sups) < 0)


def test_parse_model_roundtrip():
    for spec in ("fbm:gamma=0.7", "sfbm:H=0.7", "bifbm:H=0.6,K=0.5"):
        m = parse_model(spec, horizon=2.0)
        assert m.horizon == 2.0
        assert parse_model(m.spec(), 2.0) == m
    assert parse_model("bifbm:H=0.6,K=0.5").kind is ProcessKind.BIFBM


@pytest.mark.parametrize(
    "spec", ["fbm", "fbm:H=0.7", "sfbm:H=x", "bifbm:H=0.6", "gbm:sigma=1", "fbm:gamma=0.7,K=1", "fbm:gamma=1.2"]
)
def test_parse_model_rejects(spec):
    with pytest.raises(DomainError):
        parse_model(spec)


def test_constructor_domains():
    with pytest.raises(DomainError):
        CovarianceModel.bifbm(0.5, 0.0)
    with pytest.raises(DomainError):
        CovarianceModel.sfbm(1.0)
    with pytest.raises(DomainError):
        CovarianceModel.fbm(0.5, horizon=0.0)
    assert CovarianceModel.bifbm(0.5, 1.0).kappa == 1.0


@settings(max_examples=50)
@given(H=unit, K=st.floats(0.05, 1.0), T=st.floats(0.1, 10.0))
def test_bifbm_k1_is_fbm_and_horizon_scaling(H, K, T):
    s, t = 0.3 * T, 0.8 * T
    if K == 1.0:
        assert math.isclose(cov(CovarianceModel.bifbm(H, 1.0, T), s, t), cov(CovarianceModel.fbm(H, T), s, t))
    m = CovarianceModel.bifbm(H, K, T)
    unit_m = CovarianceModel.bifbm(H, K)
    # self-similarity with index HK
    assert math.isclose(cov(m, s, t), T ** (2 * H * K) * cov(unit_m, 0.3, 0.8), rel_tol=1e-12)
