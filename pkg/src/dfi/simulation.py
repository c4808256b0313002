"""Simulation models, their closed-form importances, and replication studies."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import cpi_importance, loco_importance
from .config import RunConfig
from .core import Dataset
from .importance import run_dfi, with_oracle
from .oracles import make_oracle, pair_covariance
from .transport import sqrt_psd, transport_from_covariance

MODELS = ("m1", "m2", "m3", "m4")
DIMS = {"m1": 10, "m2": 10, "m3": 5, "m4": 10}


@dataclass(frozen=True)
class ModelSpec:
    model: str
    n: int
    rho: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")
        if self.model == "m4" and self.rho != 0.0:
            raise ValueError("rho does not apply to model m4")
        if self.n < 10:
            raise ValueError("n must be >= 10")

    @property
    def d(self) -> int:
        return DIMS[self.model]

    def covariance(self) -> np.ndarray | None:
        """Design covariance for the Gaussian models (``None`` for m4)."""
        if self.model in ("m1", "m2"):
            return pair_covariance(10, [(0, 1)], self.rho)
        if self.model == "m3":
            return pair_covariance(5, [(0, 1), (3, 4)], self.rho)
        return None


@dataclass(frozen=True)
class TheoreticalValues:
    phi_z: np.ndarray | None
    phi_x: np.ndarray | None
    total_signal_variance: float | None


def generate(spec: ModelSpec) -> Dataset:
    """Draw ``spec.n`` rows from the model; bit-identical for equal specs."""
    rng = np.random.default_rng(spec.seed)
    n, d = spec.n, spec.d
    names = [f"X{i + 1}" for i in range(d)]
    if spec.model == "m4":
        x = rng.standard_normal((n, d))
        x[:, 1] = 3.0 * x[:, 0] ** 2 + rng.standard_normal(n)
        y = 5.0 * x[:, 0] + rng.standard_normal(n)
        return Dataset(names, x, y)
    chol = transport_from_covariance(spec.covariance(), "triangular").l
    x = rng.standard_normal((n, d)) @ chol.T
    mu = make_oracle(f"{spec.model}_mu", d)(x)
    noise_sd = math.sqrt(0.4) if spec.model == "m3" else 1.0
    return Dataset(names, x, mu + noise_sd * rng.standard_normal(n))


def m2_total_signal_variance(rho: float) -> float:
    """``V[5 cos X1 + 5 cos X2]`` for a standard bivariate normal pair with correlation ``rho``."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    e = math.exp(-1.0)
    return 25.0 + 25.0 * e**2 - 100.0 * e + 50.0 * e * math.cosh(rho)


def theoretical_values(spec: ModelSpec) -> TheoreticalValues:
    """Population importances for m1-m3 (m2: total signal variance only)."""
    rho = spec.rho
    if spec.model == "m1":
        root, _ = sqrt_psd(spec.covariance())
        beta = np.zeros(10)
        beta[0] = 5.0
        phi_z = (root @ beta) ** 2
        phi_x = np.square(root).T @ phi_z
        return TheoreticalValues(phi_z, phi_x, 25.0)
    if spec.model == "m2":
        return TheoreticalValues(None, None, m2_total_signal_variance(rho))
    if spec.model == "m3":
        r2 = rho * rho
        pair12 = 9.0 / 16.0 * (r2 + 2.0)
        switch = (14.0 * r2 + 13.0) / 16.0
        # E[V(eta2 | Z5)] = (rho^2 / 2 + 1) / 2 for eta2 = rho/2 (Z4^2 + Z5^2) + Z4 Z5
        pair45 = (r2 + 2.0) / 4.0
        phi = np.array([pair12, pair12, switch, pair45, pair45])
        # V[mu(X)] = (2.25 + 1)(1 + 2 rho^2) / 2 - (1.25 rho)^2
        total = 1.625 * (1.0 + 2.0 * r2) - 1.5625 * r2
        return TheoreticalValues(phi, phi.copy(), total)
    raise ValueError("theoretical values not available for model m4")


@dataclass
class StudyResult:
    """Per-replicate attributed estimates plus summaries."""

    spec: ModelSpec
    config: RunConfig
    feature_names: tuple[str, ...]
    estimates: np.ndarray  # (reps, d)
    std_errors: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    latent: np.ndarray
    totals: np.ndarray
    theoretical: TheoreticalValues | None
    null_features: tuple[int, ...] = ()
    baselines: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def reps(self) -> int:
        return self.estimates.shape[0]

    @property
    def mean(self) -> np.ndarray:
        return self.estimates.mean(axis=0)

    @property
    def sd(self) -> np.ndarray:
        return self.estimates.std(axis=0, ddof=1) if self.reps > 1 else np.zeros(self.estimates.shape[1])

    @property
    def covered(self) -> np.ndarray | None:
        if self.theoretical is None or self.theoretical.phi_x is None:
            return None
        truth = self.theoretical.phi_x[None, :]
        return (self.ci_low <= truth) & (truth <= self.ci_high)

    @property
    def coverage(self) -> np.ndarray | None:
        cov = self.covered
        return None if cov is None else cov.mean(axis=0)

    @property
    def null_coverage(self) -> float | None:
        cov = self.coverage
        if cov is None or not self.null_features:
            return None
        return float(cov[list(self.null_features)].mean())

    def summary(self) -> dict:
        cov = self.coverage
        truth = None if self.theoretical is None else self.theoretical.phi_x
        feats = []
        for l, name in enumerate(self.feature_names):
            feats.append(
                {
                    "name": name,
                    "mean": float(self.mean[l]),
                    "sd": float(self.sd[l]),
                    "latent_mean": float(self.latent[:, l].mean()),
                    "theoretical": None if truth is None else float(truth[l]),
                    "coverage": None if cov is None else float(cov[l]),
                }
            )
        out = {
            "kind": "study",
            "model": self.spec.model,
            "rho": self.spec.rho,
            "n": self.spec.n,
            "reps": self.reps,
            "seed": self.spec.seed,
            "config": self.config.to_dict(),
            "features": feats,
            "total": {
                "mean": float(self.totals.mean()),
                "sd": float(self.totals.std(ddof=1)) if self.reps > 1 else 0.0,
                "theoretical": None if self.theoretical is None else self.theoretical.total_signal_variance,
            },
            "null_features": [self.feature_names[i] for i in self.null_features],
            "null_coverage": self.null_coverage,
        }
        if self.baselines:
            out["baselines"] = {
                k: {"mean": v.mean(axis=0).tolist(), "sd": v.std(axis=0, ddof=1).tolist() if self.reps > 1 else None}
                for k, v in self.baselines.items()
            }
        return out

    def write(self, out_dir) -> None:
        """``replicates.csv`` (one row per replicate and feature) and ``summary.json``."""
        import os

        os.makedirs(out_dir, exist_ok=True)
        cov = self.covered
        with open(os.path.join(out_dir, "replicates.csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["replicate", "feature", "estimate", "se", "ci_lo", "ci_hi", "covered"])
            for r in range(self.reps):
                for l, name in enumerate(self.feature_names):
                    w.writerow(
                        [
                            r,
                            name,
                            repr(float(self.estimates[r, l])),
                            repr(float(self.std_errors[r, l])),
                            repr(float(self.ci_low[r, l])),
                            repr(float(self.ci_high[r, l])),
                            "" if cov is None else int(cov[r, l]),
                        ]
                    )
        with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
            json.dump(self.summary(), fh, indent=1)
            fh.write("\n")


def oracle_config(spec: ModelSpec, config: RunConfig) -> RunConfig:
    return with_oracle(config, f"{spec.model}_mu", rho=spec.rho)


def replication_study(
    spec: ModelSpec,
    run_config: RunConfig = RunConfig(),
    reps: int = 1,
    *,
    exact_sigma: bool = False,
    baselines: tuple[str, ...] = (),
    null_features: tuple[int, ...] | None = None,
) -> StudyResult:
    """Run ``reps`` generate-then-analyze cycles; replicate ``r`` uses seeds ``seed + r``."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    try:
        truth = theoretical_values(spec)
    except ValueError:
        truth = None
    d = spec.d
    est, se, lo, hi, lat = (np.empty((reps, d)) for _ in range(5))
    tot = np.empty(reps)
    base = {b: np.empty((reps, d)) for b in baselines}
    sigma = spec.covariance() if exact_sigma else None
    names = None
    for r in range(reps):
        ds = generate(replace(spec, seed=spec.seed + r))
        names = ds.feature_names
        cfg = replace(run_config, seed=run_config.seed + r)
        rep = run_dfi(ds, cfg, sigma=sigma)
        est[r] = [e.estimate for e in rep.attributed]
        se[r] = [e.std_error for e in rep.attributed]
        lo[r] = [e.ci_low for e in rep.attributed]
        hi[r] = [e.ci_high for e in rep.attributed]
        lat[r] = [e.estimate for e in rep.latent]
        tot[r] = rep.total_attributed
        for b in baselines:
            fn = {"loco": loco_importance, "cpi": cpi_importance}[b]
            base[b][r] = fn(ds, cfg).values()
    if null_features is None:
        null_features = () if truth is None or truth.phi_x is None else tuple(np.flatnonzero(truth.phi_x == 0.0))
    return StudyResult(spec, run_config, names, est, se, lo, hi, lat, tot, truth, tuple(int(i) for i in null_features), base)


def coverage_study(
    spec: ModelSpec,
    run_config: RunConfig = RunConfig(),
    reps: int = 200,
    alpha: float | None = None,
    *,
    null_features: tuple[int, ...] | None = None,
) -> StudyResult:
    """Fraction of replicates whose ``1 - alpha`` interval covers the true importance."""
    if alpha is not None:
        run_config = replace(run_config, alpha=alpha)
    res = replication_study(spec, run_config, reps, null_features=null_features)
    if res.coverage is None:
        raise ValueError(f"coverage needs per-feature theoretical values; model {spec.model} has none")
    return res
