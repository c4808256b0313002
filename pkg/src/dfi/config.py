"""Run and regressor configuration."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Any

import numpy as np

REGRESSOR_KINDS = ("random_forest", "kernel_smoother", "oracle")
TRANSPORT_KINDS = ("bures_wasserstein", "triangular")
LATENT_ESTIMATORS = ("loco", "cpi")
ETA_MODES = ("direct", "compose")


@dataclass(frozen=True)
class RegressorConfig:
    """Settings for the nuisance regressions.

    ``oracle_fn`` names a closed-form regression function from
    :mod:`dfi.oracles`; ``oracle_params`` carries its parameters
    (e.g. ``{"rho": 0.8}``) so that submodels can be derived.
    """

    kind: str = "random_forest"
    n_trees: int = 500
    min_leaf: int = 5
    max_features: float = 1.0 / 3.0
    bandwidth: float | None = None
    oracle_fn: str | None = None
    oracle_params: dict[str, float] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in REGRESSOR_KINDS:
            raise ValueError(f"unknown regressor kind {self.kind!r}; expected one of {REGRESSOR_KINDS}")
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if not 0.0 < self.max_features <= 1.0:
            raise ValueError("max_features must lie in (0, 1]")
        if self.kind == "kernel_smoother" and (self.bandwidth is None or self.bandwidth <= 0):
            raise ValueError("kernel_smoother requires a positive bandwidth")
        if self.kind == "oracle" and not self.oracle_fn:
            raise ValueError("oracle regressor requires oracle_fn")

    def with_seed(self, seed: int) -> RegressorConfig:
        return replace(self, seed=int(seed))

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RegressorConfig:
        data = dict(data)
        data["oracle_params"] = dict(data.get("oracle_params") or {})
        return cls(**data)


@dataclass(frozen=True)
class RunConfig:
    """Configuration of one cross-fitted importance run.

    Defaults follow the reference protocol: two folds, ``m = 50``
    resamples per observation, ``alpha = 0.1``.
    """

    n_folds: int = 2
    m_resamples: int = 50
    alpha: float = 0.1
    seed: int = 0
    transport_kind: str = "bures_wasserstein"
    regressor: RegressorConfig = field(default_factory=RegressorConfig)
    inflate_near_null: bool = True
    latent_estimator: str = "loco"
    eta_mode: str = "direct"

    def __post_init__(self):
        if self.n_folds < 2:
            raise ValueError("n_folds must be >= 2")
        if self.m_resamples < 1:
            raise ValueError("m_resamples must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.transport_kind not in TRANSPORT_KINDS:
            raise ValueError(f"unknown transport kind {self.transport_kind!r}")
        if self.latent_estimator not in LATENT_ESTIMATORS:
            raise ValueError(f"unknown latent estimator {self.latent_estimator!r}")
        if self.eta_mode not in ETA_MODES:
            raise ValueError(f"unknown eta mode {self.eta_mode!r}")

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["regressor"] = self.regressor.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RunConfig:
        data = dict(data)
        data["regressor"] = RegressorConfig.from_dict(data.get("regressor", {}))
        return cls(**data)


def derive_seed(seed: int, *keys: int) -> int:
    """Independent 63-bit child seed of ``seed`` for the stream labelled ``keys``."""
    ss = np.random.SeedSequence(entropy=int(seed) % 2**64, spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))
