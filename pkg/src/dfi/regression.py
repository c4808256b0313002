"""Nuisance regressions and the cross-fitting fold splitter."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _forest
from .config import RegressorConfig
from .errors import DataError
from .oracles import Oracle, make_oracle

__all__ = [
    "FoldAssignment",
    "FittedRegressor",
    "ForestRegressor",
    "KernelSmoother",
    "OracleRegressor",
    "ComposedRegressor",
    "split_folds",
    "fit",
    "predict",
]


@dataclass(frozen=True)
class FoldAssignment:
    fold_of: np.ndarray
    k: int

    def indices(self, f: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == f)

    def complement(self, f: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != f)


def split_folds(n: int, k: int, seed: int) -> FoldAssignment:
    """Random partition of ``range(n)`` into ``k`` folds whose sizes differ by at most one."""
    if k < 2:
        raise ValueError("need at least 2 folds")
    if n < 2 * k:
        raise DataError(f"cannot split {n} rows into {k} folds of at least 2 rows")
    perm = np.random.default_rng(seed).permutation(n)
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[perm] = np.arange(n) % k
    fold_of.flags.writeable = False
    return FoldAssignment(fold_of, k)


class FittedRegressor:
    """Trained predictor; subclasses implement :meth:`_predict`."""

    d_in: int
    training_n: int

    def _check(self, x_rows):
        x = np.asarray(x_rows, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.d_in:
            raise DataError(f"expected rows of width {self.d_in}, got shape {x.shape}")
        return x

    def predict(self, x_rows) -> np.ndarray:
        return self._predict(self._check(x_rows))

    def _predict(self, x):
        raise NotImplementedError

    def replaced_predictions(self, x_rows, j, values) -> np.ndarray:
        """Predictions at row ``i`` with column ``j`` set to each of ``values[i, :]``.

        Returns an array shaped like ``values``.
        """
        x = np.asarray(x_rows, dtype=np.float64)
        values = np.asarray(values, dtype=np.float64)
        n, m = values.shape
        out = np.empty((n, m))
        step = max(1, 200_000 // max(1, m * x.shape[1]))
        for s in range(0, n, step):
            blk = np.repeat(x[s : s + step], m, axis=0)
            blk[:, j] = values[s : s + step].ravel()
            out[s : s + step] = self.predict(blk).reshape(-1, m)
        return out

    def replaced_mean(self, x_rows, j, values) -> np.ndarray:
        """Row-wise mean of :meth:`replaced_predictions`."""
        return self.replaced_predictions(x_rows, j, values).mean(axis=1)


class ForestRegressor(FittedRegressor):
    def __init__(self, arrays, d_in, training_n, n_trees):
        self._arrays = arrays
        self.d_in = d_in
        self.training_n = training_n
        self.n_trees = n_trees

    @property
    def n_nodes(self) -> int:
        return self._arrays[0].shape[0]

    def _predict(self, x):
        return _forest.predict_forest(self._arrays, x)

    def replaced_mean(self, x_rows, j, values) -> np.ndarray:
        x = self._check(x_rows)
        return _forest.replaced_mean_forest(self._arrays, x, j, values)


class KernelSmoother(FittedRegressor):
    """Nadaraya-Watson regression with an isotropic Gaussian kernel."""

    chunk = 2048

    def __init__(self, x, y, bandwidth):
        self._x = np.array(x, dtype=np.float64)
        self._y = np.array(y, dtype=np.float64)
        self._sq = np.einsum("ij,ij->i", self._x, self._x)
        self.bandwidth = float(bandwidth)
        self.d_in = self._x.shape[1]
        self.training_n = self._x.shape[0]

    def _predict(self, x):
        out = np.empty(x.shape[0])
        h2 = 2.0 * self.bandwidth**2
        for s in range(0, x.shape[0], self.chunk):
            xb = x[s : s + self.chunk]
            d2 = np.einsum("ij,ij->i", xb, xb)[:, None] - 2.0 * xb @ self._x.T + self._sq[None, :]
            logw = -np.maximum(d2, 0.0) / h2
            logw -= logw.max(axis=1, keepdims=True)
            w = np.exp(logw)
            out[s : s + self.chunk] = w @ self._y / w.sum(axis=1)
        return out


class OracleRegressor(FittedRegressor):
    """Wraps a known regression function; training data are ignored."""

    def __init__(self, oracle, training_n=0):
        if not isinstance(oracle, Oracle):
            raise TypeError("expected an Oracle")
        self.oracle = oracle
        self.d_in = oracle.d
        self.training_n = training_n

    def _predict(self, x):
        return self.oracle(x)


class ComposedRegressor(FittedRegressor):
    """Latent-space regressor ``eta(z) = mu(L z)`` built from a raw-space ``mu``."""

    def __init__(self, mu, transport):
        if mu.d_in != transport.d:
            raise DataError("regressor and transport dimensions differ")
        self.mu = mu
        self.transport = transport
        self.d_in = mu.d_in
        self.training_n = mu.training_n

    def _predict(self, z):
        return self.mu.predict(z @ self.transport.l.T)


def fit(config: RegressorConfig, x, y) -> FittedRegressor:
    """Train the regressor described by ``config`` on ``(x, y)``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0 or x.shape[1] == 0:
        raise DataError(f"training matrix must be non-empty 2-d, got shape {x.shape}")
    if y.shape != (x.shape[0],):
        raise DataError(f"{x.shape[0]} rows but {y.shape} responses")
    n, d = x.shape
    if config.kind == "oracle":
        return OracleRegressor(make_oracle(config.oracle_fn, d, config.oracle_params), n)
    if config.kind == "kernel_smoother":
        return KernelSmoother(x, y, config.bandwidth)
    if n < 2 * config.min_leaf:
        raise DataError(f"forest needs at least {2 * config.min_leaf} rows, got {n}")
    mtry = max(1, min(d, math.ceil(config.max_features * d - 1e-12)))
    arrays = _forest.grow_forest(x, y, config.n_trees, mtry, config.min_leaf, config.seed)
    return ForestRegressor(arrays, d, n, config.n_trees)


def predict(r: FittedRegressor, x_rows) -> np.ndarray:
    return r.predict(x_rows)
