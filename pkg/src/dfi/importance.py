"""Latent and attributed importance estimators with influence-function inference."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .config import RunConfig, derive_seed
from .core import Dataset, ImportanceEstimate, ImportanceReport, StandardizationInfo
from .errors import DataError
from .regression import ComposedRegressor, FittedRegressor, fit, split_folds
from .transport import (
    AttributionWeights,
    LinearTransport,
    attribution_weights,
    fit_transport,
    forward,
    transport_from_covariance,
)


@dataclass(frozen=True)
class LatentImportanceResult:
    j: int
    phi_hat: float
    influence_values: np.ndarray
    m_used: int


@dataclass(frozen=True)
class AttributedImportanceResult:
    l: int
    phi_hat: float
    influence_values: np.ndarray


@dataclass(frozen=True)
class InferenceSettings:
    """Level and near-null handling for Wald-type inference.

    With ``inflate_near_null`` the variance of the estimate is increased by
    ``n^{-1/2} / z_{1-alpha}`` before building the interval and the z-score.
    The rule needs ``z_{1-alpha} > 0``, so it is skipped for ``alpha >= 0.5``.
    """

    alpha: float = 0.1
    inflate_near_null: bool = True
    n: int | None = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")


def draw_replacements(column, n_rows, m, seed) -> np.ndarray:
    """``(n_rows, m)`` values drawn uniformly with replacement from ``column``."""
    column = np.asarray(column, dtype=np.float64)
    rng = np.random.default_rng(seed)
    return column[rng.integers(0, column.shape[0], size=(n_rows, m))]


def latent_importance(
    eta_hat: FittedRegressor,
    z_eval,
    y_eval,
    j: int,
    m: int = 50,
    seed: int = 0,
    *,
    estimator: str = "loco",
    exhaustive: bool = False,
) -> LatentImportanceResult:
    """Importance of latent coordinate ``j`` on one evaluation fold.

    Every row gets ``m`` replacement values for coordinate ``j`` drawn from
    the fold's own column.  The LOCO-type estimator averages the ``m``
    predictions into a submodel prediction ``eta_bar`` and returns
    ``mean[(y - eta_bar)^2 - (y - eta)^2]``; the CPI-type estimator
    averages half the loss gap over the draws.  With ``exhaustive`` the
    whole column is used for every row instead of random draws.

    Influence values use the expanded form ``2 r D + D^2 - phi`` with
    ``r = y - eta`` and ``D = eta - eta_bar``; they average to zero
    because that form equals the loss gap identically.
    """
    z = np.asarray(z_eval, dtype=np.float64)
    y = np.asarray(y_eval, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] == 0:
        raise DataError("evaluation fold is empty")
    if y.shape != (z.shape[0],):
        raise DataError("evaluation rows and responses are misaligned")
    if not 0 <= j < z.shape[1]:
        raise DataError(f"latent index {j} out of range for d={z.shape[1]}")
    n = z.shape[0]
    if exhaustive:
        values = np.broadcast_to(z[:, j], (n, n))
    else:
        if m < 1:
            raise ValueError("m must be >= 1")
        values = draw_replacements(z[:, j], n, m, seed)
    m_used = values.shape[1]

    base = eta_hat.predict(z)
    resid = y - base
    if estimator == "loco":
        eta_bar = eta_hat.replaced_mean(z, j, values)
        delta = base - eta_bar
        phi = float(np.mean((y - eta_bar) ** 2 - resid**2))
        infl = 2.0 * resid * delta + delta**2 - phi
    elif estimator == "cpi":
        preds = eta_hat.replaced_predictions(z, j, values)
        delta = base[:, None] - preds
        phi = float(0.5 * np.mean(np.mean((y[:, None] - preds) ** 2, axis=1) - resid**2))
        infl = 0.5 * np.mean(2.0 * resid[:, None] * delta + delta**2, axis=1) - phi
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    return LatentImportanceResult(j, phi, infl, m_used)


def attribute(latents: Sequence[LatentImportanceResult], weights) -> list[AttributedImportanceResult]:
    """Push latent importances to raw features: ``phi_X[l] = sum_j w[j, l] phi_Z[j]``."""
    w = weights.w if isinstance(weights, AttributionWeights) else np.asarray(weights, dtype=np.float64)
    d = len(latents)
    if w.shape != (d, d):
        raise DataError(f"weights of shape {w.shape} for {d} latent coordinates")
    sizes = {np.asarray(r.influence_values).shape for r in latents}
    if len(sizes) != 1:
        raise DataError("latent results come from evaluation folds of different sizes")
    phi_z = np.array([r.phi_hat for r in latents])
    order = np.argsort([r.j for r in latents])
    phi_z = phi_z[order]
    kern = np.stack([np.asarray(latents[i].influence_values) + latents[i].phi_hat for i in order])
    phi_x = w.T @ phi_z
    infl_x = w.T @ kern - phi_x[:, None]
    return [AttributedImportanceResult(l, float(phi_x[l]), infl_x[l]) for l in range(d)]


def infer(estimate: float, influence_values, settings: InferenceSettings, name: str = "") -> ImportanceEstimate:
    """Standard error, interval, z-score and one-sided p-value for ``H0: phi <= 0``."""
    infl = np.asarray(influence_values, dtype=np.float64)
    n = infl.shape[0] if settings.n is None else settings.n
    if infl.shape[0] < 2:
        raise DataError("inference needs at least 2 influence values")
    se = math.sqrt(float(np.var(infl, ddof=1)) / infl.shape[0])
    var_used = se * se
    if settings.inflate_near_null and settings.alpha < 0.5:
        var_used += n**-0.5 / float(ndtri(1.0 - settings.alpha))
    se_used = math.sqrt(var_used)
    half = float(ndtri(1.0 - settings.alpha / 2.0)) * se_used
    if se_used == 0.0:
        if estimate == 0.0:
            z, p = 0.0, 1.0
        else:
            z = math.copysign(math.inf, estimate)
            p = 0.0 if estimate > 0 else 1.0
    else:
        z = estimate / se_used
        p = float(ndtr(-z))
    return ImportanceEstimate(
        name=name,
        estimate=float(estimate),
        std_error=se,
        ci_low=float(estimate) - half,
        ci_high=float(estimate) + half,
        z_score=z,
        p_value=min(1.0, max(0.0, p)),
        influence_values=infl,
    )


def group_importance(
    attributed: Sequence, groups: Mapping[str, Sequence[int]], settings: InferenceSettings
) -> list[tuple[str, ImportanceEstimate]]:
    """Sum member attributions (estimates and influence values) per group."""
    d = len(attributed)
    out = []
    for name, members in groups.items():
        members = list(members)
        if not members:
            raise DataError(f"group {name!r} is empty")
        for l in members:
            if not 0 <= l < d:
                raise DataError(f"group {name!r}: feature index {l} out of range")
        est = math.fsum(_phi(attributed[l]) for l in members)
        infl = np.sum([np.asarray(attributed[l].influence_values) for l in members], axis=0)
        out.append((name, infer(est, infl, settings, name)))
    return out


def _phi(r):
    return r.estimate if isinstance(r, ImportanceEstimate) else r.phi_hat


def pool_folds(kernels: Sequence[tuple[np.ndarray, np.ndarray]], n: int) -> tuple[float, np.ndarray]:
    """Combine per-fold uncentered kernels into one estimate and influence vector.

    ``kernels`` holds ``(row_indices, kernel_values)`` pairs whose row
    indices partition ``range(n)``.  The estimate is the mean kernel over
    all rows; influence values are the kernels recentred at it, stored in
    original row order.
    """
    k = np.empty(n)
    seen = np.zeros(n, dtype=bool)
    for rows, vals in kernels:
        k[rows] = vals
        seen[rows] = True
    if not seen.all():
        raise DataError("evaluation folds do not cover every row")
    phi = float(np.mean(k))
    return phi, k - phi


def fit_eta(config: RunConfig, transport: LinearTransport, x_nuis, z_nuis, y_nuis, seed) -> FittedRegressor:
    """Latent-space regressor: fitted directly on ``(Z, Y)`` or composed ``mu o T^{-1}``."""
    reg = config.regressor.with_seed(seed)
    if reg.kind == "oracle" or config.eta_mode == "compose":
        return ComposedRegressor(fit(reg, x_nuis, y_nuis), transport)
    return fit(reg, z_nuis, y_nuis)


def run_dfi(
    ds: Dataset,
    config: RunConfig = RunConfig(),
    *,
    sigma=None,
    groups: Mapping[str, Sequence[int]] | None = None,
    standardization: StandardizationInfo | None = None,
    verbose: bool = False,
) -> ImportanceReport:
    """Cross-fitted disentangled feature importance.

    For each fold the transport and the latent regressor are fit on the
    remaining rows and the estimators are evaluated on the fold.  Passing
    ``sigma`` fixes the transport to the one built from that (known)
    covariance instead of estimating it per fold.
    """
    n, d = ds.n, ds.d
    folds = split_folds(n, config.n_folds, config.seed)
    fixed = transport_from_covariance(sigma, config.transport_kind) if sigma is not None else None

    latent_kernels = [[] for _ in range(d)]
    w_bar = np.zeros((d, d))
    fold_diag = []
    for f in range(config.n_folds):
        ev, nu = folds.indices(f), folds.complement(f)
        x_nu, x_ev = ds.x[nu], ds.x[ev]
        # fitting through a Dataset lets singularity errors name the dependent features
        t = fixed if fixed is not None else fit_transport(ds.subset(nu), config.transport_kind)
        z_nu, z_ev = forward(t, x_nu), forward(t, x_ev)
        fold_seed = derive_seed(config.seed, f)
        eta = fit_eta(config, t, x_nu, z_nu, ds.y[nu], derive_seed(config.seed, f, 1))
        for j in range(d):
            r = latent_importance(
                eta, z_ev, ds.y[ev], j, config.m_resamples, fold_seed + j, estimator=config.latent_estimator
            )
            latent_kernels[j].append((ev, r.influence_values + r.phi_hat))
        w = attribution_weights(t).w
        w_bar += (len(ev) / n) * w
        fold_diag.append(
            {
                "fold": f,
                "n_eval": int(len(ev)),
                "condition_number": t.condition_number,
                "whitening_max_dev": float(np.abs(np.cov(z_nu, rowvar=False).reshape(d, d) - np.eye(d)).max()),
            }
        )
        if verbose:
            fold_diag[-1]["l"] = t.l.tolist()
            fold_diag[-1]["l_inv"] = t.l_inv.tolist()

    latents = []
    for j in range(d):
        phi, infl = pool_folds(latent_kernels[j], n)
        latents.append(LatentImportanceResult(j, phi, infl, config.m_resamples))
    attributed = attribute(latents, w_bar)

    settings = InferenceSettings(config.alpha, config.inflate_near_null)
    names = ds.feature_names
    latent_est = [infer(r.phi_hat, r.influence_values, settings, f"Z{j + 1}") for j, r in enumerate(latents)]
    attr_est = [infer(r.phi_hat, r.influence_values, settings, names[r.l]) for r in attributed]
    group_est = group_importance(attr_est, groups, settings) if groups else []

    extras = {"folds": fold_diag}
    if verbose:
        extras["weights"] = w_bar.tolist()
    return ImportanceReport(
        latent=latent_est,
        attributed=attr_est,
        groups=group_est,
        total_latent=math.fsum(r.phi_hat for r in latents),
        total_attributed=math.fsum(r.phi_hat for r in attributed),
        config=config,
        sigma_diag=w_bar.sum(axis=1),
        standardization=standardization,
        extras=extras,
    )


def with_oracle(config: RunConfig, name: str, **params) -> RunConfig:
    """Copy of ``config`` whose regressor is the named closed-form oracle."""
    reg = replace(config.regressor, kind="oracle", oracle_fn=name, oracle_params=dict(params))
    return replace(config, regressor=reg)
