"""Raw-feature LOCO and CPI baselines, cross-fitted like the DFI estimators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig, derive_seed
from .core import Dataset, ImportanceEstimate
from .importance import InferenceSettings, draw_replacements, infer, pool_folds
from .regression import FittedRegressor, OracleRegressor, fit, split_folds


@dataclass(frozen=True)
class BaselineResult:
    method: str
    estimates: tuple[ImportanceEstimate, ...]

    def values(self) -> np.ndarray:
        return np.array([e.estimate for e in self.estimates])


def _submodel(config, mu: FittedRegressor, x_minus, y, j, seed) -> FittedRegressor:
    if isinstance(mu, OracleRegressor):
        return OracleRegressor(mu.oracle.submodel(j), len(y))
    return fit(config.regressor.with_seed(seed), x_minus, y)


def _conditional_mean(config, mu, x_minus, x_j, j, seed) -> FittedRegressor:
    if isinstance(mu, OracleRegressor):
        return OracleRegressor(mu.oracle.conditional_mean(j), len(x_j))
    return fit(config.regressor.with_seed(seed), x_minus, x_j)


def _finish(method, kernels, ds, config):
    settings = InferenceSettings(config.alpha, config.inflate_near_null)
    out = []
    for j, name in enumerate(ds.feature_names):
        phi, infl = pool_folds(kernels[j], ds.n)
        out.append(infer(phi, infl, settings, name))
    return BaselineResult(method, tuple(out))


def loco_importance(ds: Dataset, config: RunConfig = RunConfig()) -> BaselineResult:
    """Leave-one-covariate-out: ``mean[(y - mu_-j(x_-j))^2 - (y - mu(x))^2]`` with refitted submodels."""
    folds = split_folds(ds.n, config.n_folds, config.seed)
    kernels = [[] for _ in range(ds.d)]
    for f in range(config.n_folds):
        ev, nu = folds.indices(f), folds.complement(f)
        mu = fit(config.regressor.with_seed(derive_seed(config.seed, f, 1)), ds.x[nu], ds.y[nu])
        y = ds.y[ev]
        pred = mu.predict(ds.x[ev])
        resid = y - pred
        for j in range(ds.d):
            if ds.d == 1:
                sub_pred = np.full(len(ev), ds.y[nu].mean())
            else:
                x_nu = np.delete(ds.x[nu], j, axis=1)
                sub = _submodel(config, mu, x_nu, ds.y[nu], j, derive_seed(config.seed, f, 2, j))
                sub_pred = sub.predict(np.delete(ds.x[ev], j, axis=1))
            delta = pred - sub_pred
            # same value as the loss gap, written in its influence-function form
            kernels[j].append((ev, 2.0 * resid * delta + delta**2))
    return _finish("loco", kernels, ds, config)


def cpi_importance(ds: Dataset, config: RunConfig = RunConfig()) -> BaselineResult:
    """Conditional permutation importance with residual-bootstrap resampling.

    The replacement for ``x_j`` is ``nu_j(x_-j) + (w_j - nu_j(w_-j))`` for a
    row ``w`` drawn from the evaluation fold, where ``nu_j`` regresses
    ``x_j`` on the other features; ``m`` draws per row are averaged.
    """
    folds = split_folds(ds.n, config.n_folds, config.seed)
    kernels = [[] for _ in range(ds.d)]
    m = config.m_resamples
    for f in range(config.n_folds):
        ev, nu = folds.indices(f), folds.complement(f)
        mu = fit(config.regressor.with_seed(derive_seed(config.seed, f, 1)), ds.x[nu], ds.y[nu])
        x_ev, y = ds.x[ev], ds.y[ev]
        pred = mu.predict(x_ev)
        resid = y - pred
        for j in range(ds.d):
            if ds.d == 1:
                cond_ev = np.full(len(ev), ds.x[nu, 0].mean())
            else:
                nu_j = _conditional_mean(
                    config, mu, np.delete(ds.x[nu], j, axis=1), ds.x[nu, j], j, derive_seed(config.seed, f, 3, j)
                )
                cond_ev = nu_j.predict(np.delete(x_ev, j, axis=1))
            eps_pool = x_ev[:, j] - cond_ev
            draws = draw_replacements(eps_pool, len(ev), m, derive_seed(config.seed, f, 4, j))
            values = cond_ev[:, None] + draws
            preds = mu.replaced_predictions(x_ev, j, values)
            delta = pred[:, None] - preds
            kernels[j].append((ev, 0.5 * np.mean(2.0 * resid[:, None] * delta + delta**2, axis=1)))
    return _finish("cpi", kernels, ds, config)
