import math

import numpy as np
import pytest

from dfi.config import RegressorConfig
from dfi.errors import DataError
from dfi.oracles import LinearGaussianOracle, make_oracle, pair_covariance
from dfi.regression import ComposedRegressor, fit, predict, split_folds
from dfi.simulation import ModelSpec, generate
from dfi.transport import transport_from_covariance

FAST_FOREST = RegressorConfig(n_trees=50, seed=3)


def test_split_folds_sizes_and_partition():
    f = split_folds(4, 2, seed=0)
    assert sorted(len(f.indices(k)) for k in range(2)) == [2, 2]
    f = split_folds(5, 2, seed=0)
    assert sorted(len(f.indices(k)) for k in range(2)) == [2, 3]
    f = split_folds(103, 4, seed=9)
    allidx = np.concatenate([f.indices(k) for k in range(4)])
    np.testing.assert_array_equal(np.sort(allidx), np.arange(103))
    np.testing.assert_array_equal(np.sort(np.r_[f.indices(1), f.complement(1)]), np.arange(103))


def test_split_folds_deterministic_and_seeded():
    a, b, c = split_folds(50, 2, 1), split_folds(50, 2, 1), split_folds(50, 2, 2)
    np.testing.assert_array_equal(a.fold_of, b.fold_of)
    assert not np.array_equal(a.fold_of, c.fold_of)


def test_split_folds_too_small():
    with pytest.raises(DataError):
        split_folds(3, 2, 0)


def test_oracle_m1():
    r = fit(RegressorConfig(kind="oracle", oracle_fn="m1_mu"), np.zeros((3, 10)), np.zeros(3))
    e1 = np.zeros(10)
    e1[0] = 1.0
    assert predict(r, e1)[0] == 5.0
    x = np.random.default_rng(0).standard_normal((7, 10))
    np.testing.assert_array_equal(r.predict(x), 5.0 * x[:, 0])


def test_wrong_width_rejected():
    r = fit(RegressorConfig(kind="oracle", oracle_fn="m1_mu"), np.zeros((3, 10)), np.zeros(3))
    with pytest.raises(DataError):
        r.predict(np.zeros((2, 9)))


def test_fit_input_errors():
    with pytest.raises(DataError):
        fit(FAST_FOREST, np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(DataError):
        fit(FAST_FOREST, np.zeros((20, 2)), np.zeros(19))
    with pytest.raises(DataError):
        fit(FAST_FOREST, np.zeros((9, 2)), np.zeros(9))


def test_forest_fits_identity():
    x = np.random.default_rng(3).standard_normal((2000, 1))
    x = (x - x.mean()) / x.std(ddof=1)
    r = fit(RegressorConfig(seed=3), x, x[:, 0])
    assert math.sqrt(np.mean((r.predict(x) - x[:, 0]) ** 2)) < 0.05


def test_forest_deterministic_and_bounded(rng):
    x = rng.standard_normal((300, 4))
    y = x[:, 0] + np.sin(x[:, 1]) + 0.1 * rng.standard_normal(300)
    a = fit(FAST_FOREST, x, y)
    b = fit(FAST_FOREST, x, y)
    xt = rng.standard_normal((200, 4)) * 3
    pa = a.predict(xt)
    np.testing.assert_array_equal(pa, b.predict(xt))
    np.testing.assert_array_equal(pa, a.predict(xt))
    assert pa.min() >= y.min() and pa.max() <= y.max()
    assert not np.array_equal(pa, fit(FAST_FOREST.with_seed(4), x, y).predict(xt))


def test_forest_replaced_mean_matches_brute_force(rng):
    x = rng.standard_normal((120, 3))
    y = x[:, 0] * x[:, 1] + x[:, 2]
    r = fit(FAST_FOREST, x, y)
    vals = rng.standard_normal((120, 7))
    for j in range(3):
        fast = r.replaced_mean(x, j, vals)
        slow = r.replaced_predictions(x, j, vals).mean(axis=1)
        np.testing.assert_allclose(fast, slow, rtol=1e-12, atol=1e-12)


def test_forest_consistency_m1():
    ds = generate(ModelSpec("m1", 2000, 0.0, seed=4))
    r = fit(RegressorConfig(n_trees=100, seed=1), ds.x, ds.y)
    xt = generate(ModelSpec("m1", 1000, 0.0, seed=5)).x
    rmse = math.sqrt(np.mean((r.predict(xt) - 5 * xt[:, 0]) ** 2))
    assert rmse < 0.75 * ds.y.std()


def test_kernel_smoother_three_points():
    x = np.array([[0.0], [10.0], [10.1]])
    y = np.array([1.0, 2.0, 4.0])
    r = fit(RegressorConfig(kind="kernel_smoother", bandwidth=1.0), x, y)
    w = math.exp(-0.01 / 2)
    pred = r.predict(x)
    assert abs(pred[0] - 1.0) < 1e-12
    assert abs(pred[1] - (2 + 4 * w) / (1 + w)) < 1e-12
    assert abs(pred[2] - (2 * w + 4) / (1 + w)) < 1e-12


def test_kernel_smoother_far_query_is_finite():
    r = fit(RegressorConfig(kind="kernel_smoother", bandwidth=0.1), np.array([[0.0], [1.0]]), np.array([1.0, 3.0]))
    assert np.isfinite(r.predict(np.array([[1e4]]))).all()


def test_linear_gaussian_oracle_submodels():
    sigma = pair_covariance(3, [(0, 1)], 0.6)
    o = LinearGaussianOracle([5.0, 0.0, 0.0], sigma)
    x = np.array([[1.0, 2.0, 3.0]])
    # E[5 X1 | X2, X3] = 5 * 0.6 * X2
    assert o.submodel(0)(np.array([[2.0, 3.0]]))[0] == pytest.approx(6.0)
    assert o.conditional_mean(1)(np.array([[1.0, 3.0]]))[0] == pytest.approx(0.6)
    assert o.submodel(2)(np.array([[1.0, 2.0]]))[0] == pytest.approx(o(x)[0])


def test_named_oracles():
    x = np.array([[0.0, 0.0, 1.0, 0.0, 0.0], [0.0, 0.0, -1.0, 2.0, 3.0], [2.0, 3.0, 1.0, 5.0, 5.0]])
    np.testing.assert_allclose(make_oracle("m3_mu", 5)(x), [0.0, 6.0, 9.0])
    x2 = np.zeros((1, 10))
    assert make_oracle("m2_mu", 10)(x2)[0] == pytest.approx(10.0)
    with pytest.raises(ValueError):
        make_oracle("nope", 3)


def test_composed_regressor():
    sigma = np.array([[1.0, 0.8], [0.8, 1.0]])
    t = transport_from_covariance(sigma)
    mu = fit(RegressorConfig(kind="oracle", oracle_fn="m1_mu"), np.zeros((2, 2)), np.zeros(2))
    eta = ComposedRegressor(mu, t)
    z = np.array([[1.0, 0.0], [0.0, 1.0]])
    np.testing.assert_allclose(eta.predict(z), 5 * t.l[0])
