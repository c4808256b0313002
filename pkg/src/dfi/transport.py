"""Linear disentangling maps.

Both maps are written as ``X = L Z`` and ``Z = L^{-1} X``.  The
Bures-Wasserstein map takes ``L`` as the symmetric square root of the
covariance; the triangular map is its Gaussian Knothe-Rosenblatt
counterpart, the lower Cholesky factor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .core import Dataset
from .errors import DataError, SingularCovarianceError

EPS_REL = 1e-10


@dataclass(frozen=True)
class CovarianceEstimate:
    sigma: np.ndarray
    n_used: int


@dataclass(frozen=True)
class LinearTransport:
    l: np.ndarray
    l_inv: np.ndarray
    kind: str
    condition_number: float

    @property
    def d(self) -> int:
        return self.l.shape[0]

    def forward(self, x_rows) -> np.ndarray:
        return forward(self, x_rows)

    def inverse(self, z_rows) -> np.ndarray:
        return inverse(self, z_rows)


@dataclass(frozen=True)
class AttributionWeights:
    """``w[j, l] = (dX_l / dZ_j)^2 = L[l, j]^2``.

    Rows index latent coordinates, columns raw features, so that
    ``attributed[l] = sum_j w[j, l] * latent[j]``.
    """

    w: np.ndarray

    @property
    def latent_totals(self) -> np.ndarray:
        """Row sums ``(L^T L)_jj``; equal to ``diag(Sigma)`` for the BW map."""
        return self.w.sum(axis=1)


def _as_matrix(data) -> np.ndarray:
    x = data.x if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    if x.ndim != 2:
        raise DataError("expected a 2-d array of rows")
    return x


def estimate_covariance(data) -> CovarianceEstimate:
    """Sample covariance with the ``n - 1`` denominator, exactly symmetrized."""
    x = _as_matrix(data)
    n = x.shape[0]
    if n < 2:
        raise DataError("covariance estimation needs at least 2 rows")
    xc = x - x.mean(axis=0)
    s = xc.T @ xc / (n - 1)
    return CovarianceEstimate(0.5 * (s + s.T), n)


def _check_spectrum(sigma, eps):
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise DataError(f"covariance must be square, got shape {sigma.shape}")
    if not np.allclose(sigma, sigma.T, rtol=0, atol=1e-12 * max(1.0, np.abs(sigma).max())):
        raise DataError("covariance must be symmetric")
    sigma = 0.5 * (sigma + sigma.T)
    evals, evecs = np.linalg.eigh(sigma)
    lam_max = max(evals[-1], 0.0)
    floor = EPS_REL * lam_max if eps is None else float(eps)
    if evals[0] <= floor or lam_max == 0.0:
        v = np.abs(evecs[:, 0])
        involved = tuple(int(i) for i in np.flatnonzero(v > 0.1 * v.max()))
        raise SingularCovarianceError(evals[0], floor, involved)
    return sigma, evals, evecs


def sqrt_psd(sigma, eps=None) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric square root and inverse square root via eigendecomposition.

    ``eps`` is the eigenvalue floor; it defaults to ``1e-10 * lambda_max``.
    Raises :class:`SingularCovarianceError` (with the indices of the
    dependent block) if the smallest eigenvalue does not clear it.
    """
    _, evals, evecs = _check_spectrum(sigma, eps)
    root = np.sqrt(evals)
    l = (evecs * root) @ evecs.T
    l_inv = (evecs / root) @ evecs.T
    return 0.5 * (l + l.T), 0.5 * (l_inv + l_inv.T)


def transport_from_covariance(sigma, kind="bures_wasserstein", eps=None) -> LinearTransport:
    """Build a transport from a known (or already estimated) covariance."""
    sigma, evals, _ = _check_spectrum(sigma, eps)
    cond = float(evals[-1] / evals[0])
    if kind == "bures_wasserstein":
        l, l_inv = sqrt_psd(sigma, eps)
    elif kind == "triangular":
        l = np.linalg.cholesky(sigma)
        l_inv = solve_triangular(l, np.eye(l.shape[0]), lower=True)
    else:
        raise ValueError(f"unknown transport kind {kind!r}")
    return LinearTransport(l, l_inv, kind, cond)


def _fit(ds, kind, eps):
    cov = estimate_covariance(ds)
    try:
        return transport_from_covariance(cov.sigma, kind, eps)
    except SingularCovarianceError as exc:
        if isinstance(ds, Dataset):
            names = [ds.feature_names[i] for i in exc.features]
            raise SingularCovarianceError(exc.eigenvalue, exc.eps, names) from None
        raise


def fit_bw_transport(ds, eps=None) -> LinearTransport:
    """Whitening map ``Z = Sigma^{-1/2} X`` from the sample covariance."""
    return _fit(ds, "bures_wasserstein", eps)


def fit_triangular_transport(ds, eps=None) -> LinearTransport:
    """Triangular map with ``L`` the lower Cholesky factor of the sample covariance."""
    return _fit(ds, "triangular", eps)


def fit_transport(ds, kind="bures_wasserstein", eps=None) -> LinearTransport:
    return _fit(ds, kind, eps)


def _rows(t, a):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2 or a.shape[1] != t.d:
        raise DataError(f"expected rows of width {t.d}, got shape {a.shape}")
    return a


def forward(t: LinearTransport, x_rows) -> np.ndarray:
    """Map raw rows to latent rows: ``z = x @ L^{-T}``."""
    return _rows(t, x_rows) @ t.l_inv.T


def inverse(t: LinearTransport, z_rows) -> np.ndarray:
    return _rows(t, z_rows) @ t.l.T


def attribution_weights(t: LinearTransport) -> AttributionWeights:
    return AttributionWeights(np.square(t.l).T.copy())
