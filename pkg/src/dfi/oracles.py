"""Closed-form regression functions for the simulation models.

An oracle knows the true ``mu(x) = E[Y | X = x]``.  The linear Gaussian
oracle also knows the design covariance, which gives exact submodels
``E[Y | X_{-j}]`` for LOCO and conditional means ``E[X_j | X_{-j}]``
for the CPI residual sampler.
"""

from __future__ import annotations

import numpy as np


class Oracle:
    """Known regression function of ``d`` inputs."""

    def __init__(self, fn, d, name="custom"):
        self.fn = fn
        self.d = int(d)
        self.name = name

    def __call__(self, x):
        return np.asarray(self.fn(np.asarray(x, dtype=np.float64)), dtype=np.float64)

    def submodel(self, j):
        raise NotImplementedError(f"oracle {self.name!r} has no closed-form submodel E[Y | X_-j]")

    def conditional_mean(self, j):
        raise NotImplementedError(f"oracle {self.name!r} has no closed-form E[X_j | X_-j]")


class LinearGaussianOracle(Oracle):
    """``mu(x) = beta^T x`` with ``X ~ N(0, sigma)``."""

    def __init__(self, beta, sigma, name="linear"):
        self.beta = np.asarray(beta, dtype=np.float64)
        self.sigma = np.asarray(sigma, dtype=np.float64)
        super().__init__(lambda x: x @ self.beta, len(self.beta), name)

    def _coef(self, j):
        rest = np.delete(np.arange(self.d), j)
        s_rr = self.sigma[np.ix_(rest, rest)]
        s_rj = self.sigma[rest, j]
        return np.linalg.solve(s_rr, s_rj) if rest.size else np.zeros(0)

    def conditional_mean(self, j):
        c = self._coef(j)
        return Oracle(lambda xr: xr @ c, self.d - 1, f"{self.name}:E[X{j + 1}|rest]")

    def submodel(self, j):
        coef = np.delete(self.beta, j) + self.beta[j] * self._coef(j)
        return Oracle(lambda xr: xr @ coef, self.d - 1, f"{self.name}:-{j + 1}")


def pair_covariance(d, pairs, rho):
    """Unit-diagonal covariance with ``rho`` on the given (0-based) index pairs."""
    s = np.eye(d)
    for a, b in pairs:
        s[a, b] = s[b, a] = rho
    return s


def _m2(x):
    return 5.0 * np.cos(x[:, 0]) + 5.0 * np.cos(x[:, 1])


def _m3(x):
    return 1.5 * x[:, 0] * x[:, 1] * (x[:, 2] > 0) + x[:, 3] * x[:, 4] * (x[:, 2] < 0)


def make_oracle(name, d, params=None) -> Oracle:
    """Look up a named oracle for inputs of width ``d``."""
    params = dict(params or {})
    rho = float(params.get("rho", 0.0))
    if name in ("m1_mu", "m4_mu"):
        beta = np.zeros(d)
        beta[0] = 5.0
        if name == "m4_mu":
            return Oracle(lambda x: 5.0 * x[:, 0], d, name)
        sigma = pair_covariance(d, [(0, 1)] if d > 1 else [], rho)
        return LinearGaussianOracle(beta, sigma, name)
    if name == "m2_mu":
        return Oracle(_m2, d, name)
    if name == "m3_mu":
        return Oracle(_m3, d, name)
    raise ValueError(f"unknown oracle function {name!r}")
