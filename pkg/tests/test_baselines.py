import numpy as np
import pytest

from dfi.baselines import cpi_importance, loco_importance
from dfi.config import RegressorConfig, RunConfig
from dfi.core import Dataset
from dfi.errors import SingularCovarianceError
from dfi.importance import run_dfi
from dfi.simulation import ModelSpec, generate, oracle_config

N = 5000
TOL = 3 * 25 * N**-0.5


def m1(rho, seed=0):
    spec = ModelSpec("m1", N, rho, seed)
    return spec, generate(spec), oracle_config(spec, RunConfig(seed=seed))


@pytest.mark.parametrize("rho,target", [(0.0, 25.0), (0.8, 9.0)])
def test_loco_oracle_m1(rho, target):
    _, ds, cfg = m1(rho)
    res = loco_importance(ds, cfg)
    assert res.method == "loco"
    assert abs(res.values()[0] - target) < TOL


def test_null_features_vanish_for_both_baselines():
    _, ds, cfg = m1(0.4, seed=3)
    bound = 5 * N**-0.5 * ds.y.var(ddof=1)
    for fn in (loco_importance, cpi_importance):
        vals = fn(ds, cfg).values()
        assert np.abs(vals[2:]).max() <= bound


def test_loco_equals_cpi_under_oracle():
    _, ds, cfg = m1(0.4, seed=1)
    loco = loco_importance(ds, cfg).values()
    cpi = cpi_importance(ds, cfg).values()
    assert abs(loco[0] - cpi[0]) <= TOL
    assert abs(loco[0] - 25 * (1 - 0.16)) < TOL


def test_cpi_matches_dfi_for_independent_features():
    spec, ds, cfg = m1(0.0, seed=2)
    cpi = cpi_importance(ds, cfg).values()
    dfi = np.array([e.estimate for e in run_dfi(ds, cfg, sigma=np.eye(10)).attributed])
    assert abs(cpi[0] - dfi[0]) <= TOL


def test_influence_values_centered():
    _, ds, cfg = m1(0.4, seed=4)
    for fn in (loco_importance, cpi_importance):
        for e in fn(ds, cfg).estimates:
            assert abs(e.influence_values.mean()) <= 1e-10 * max(1.0, abs(e.estimate))


def test_duplicate_columns_hide_importance():
    rng = np.random.default_rng(5)
    n = 600
    u, v = rng.standard_normal(n), rng.standard_normal(n)
    y = 2 * u + rng.standard_normal(n)
    ds = Dataset(["u", "u_copy", "v"], np.c_[u, u, v], y)
    cfg = RunConfig(regressor=RegressorConfig(n_trees=100), m_resamples=10, seed=5)
    for fn in (loco_importance, cpi_importance):
        vals = fn(ds, cfg).values()
        assert np.abs(vals[:2]).max() < 0.1 * y.var()
    with pytest.raises(SingularCovarianceError):
        run_dfi(ds, cfg)


def test_deterministic():
    _, ds, cfg = m1(0.4, seed=6)
    a, b = cpi_importance(ds, cfg).values(), cpi_importance(ds, cfg).values()
    np.testing.assert_array_equal(a, b)
