"""Domain types, CSV ingestion, standardization and the JSON report."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .config import RunConfig
from .errors import DataError, ReportFormatError


def _frozen(a, ndim):
    arr = np.array(a, dtype=np.float64)
    if arr.ndim != ndim:
        raise DataError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with named columns and a response vector."""

    feature_names: tuple[str, ...]
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        names = tuple(str(s) for s in self.feature_names)
        x = _frozen(self.x, 2)
        y = _frozen(self.y, 1)
        n, d = x.shape
        if n < 1 or d < 1:
            raise DataError(f"dataset needs n >= 1 and d >= 1, got {x.shape}")
        if len(names) != d:
            raise DataError(f"{len(names)} feature names for {d} columns")
        if len(set(names)) != d:
            raise DataError("feature names must be unique")
        if y.shape[0] != n:
            raise DataError(f"response has {y.shape[0]} entries for {n} rows")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DataError("dataset contains NaN or infinite values")
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def subset(self, rows) -> Dataset:
        return Dataset(self.feature_names, self.x[rows], self.y[rows])


@dataclass(frozen=True)
class StandardizationInfo:
    """Centering and scaling constants, features first then the response."""

    means: np.ndarray
    scales: np.ndarray

    def __post_init__(self):
        means = _frozen(self.means, 1)
        scales = _frozen(self.scales, 1)
        if means.shape != scales.shape:
            raise DataError("means and scales must have equal length")
        if np.any(scales <= 0):
            raise DataError("scales must be strictly positive")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "scales", scales)

    def to_dict(self):
        return {"means": self.means.tolist(), "scales": self.scales.tolist()}


def load_csv(path, target: str) -> Dataset:
    """Read a headed, all-numeric CSV and split off the ``target`` column."""
    if not os.path.isfile(path):
        raise DataError(f"input file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if target not in header:
            raise DataError(f"target column not found: {target!r}")
        rows = []
        for lineno, raw in enumerate(reader, start=1):
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) != len(header):
                raise DataError(f"row {lineno}: expected {len(header)} cells, got {len(raw)}")
            vals = []
            for col, cell in zip(header, raw):
                try:
                    v = float(cell)
                except ValueError:
                    v = math.nan
                if not math.isfinite(v):
                    raise DataError(f"row {lineno}, column {col!r}: non-numeric or missing value {cell!r}")
                vals.append(v)
            rows.append(vals)
    if len(rows) < 2:
        raise DataError(f"{path}: need at least 2 data rows, got {len(rows)}")
    data = np.array(rows)
    t = header.index(target)
    keep = [i for i in range(len(header)) if i != t]
    return Dataset(tuple(header[i] for i in keep), data[:, keep], data[:, t])


def standardize(ds: Dataset) -> tuple[Dataset, StandardizationInfo]:
    """Center and scale every feature and the response to unit sample sd (ddof=1)."""
    if ds.n < 2:
        raise DataError("standardization needs at least 2 rows")
    full = np.column_stack([ds.x, ds.y])
    means = full.mean(axis=0)
    scales = full.std(axis=0, ddof=1)
    names = ds.feature_names + ("<response>",)
    for name, s in zip(names, scales):
        if not s > 0:
            raise DataError(f"zero-variance column {name!r} cannot be standardized")
    z = (full - means) / scales
    return Dataset(ds.feature_names, z[:, :-1], z[:, -1]), StandardizationInfo(means, scales)


@dataclass(frozen=True)
class ImportanceEstimate:
    """Point estimate, normal-theory inference and per-observation influence values."""

    name: str
    estimate: float
    std_error: float
    ci_low: float
    ci_high: float
    z_score: float
    p_value: float
    influence_values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        object.__setattr__(self, "influence_values", _frozen(self.influence_values, 1))
        if self.ci_low > self.ci_high:
            raise ValueError("ci_low must not exceed ci_high")
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError("p_value must lie in [0, 1]")

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "estimate": self.estimate,
            "se": self.std_error,
            "ci": [self.ci_low, self.ci_high],
            "z": self.z_score,
            "p": self.p_value,
            "influence": self.influence_values.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> ImportanceEstimate:
        lo, hi = d["ci"]
        return cls(
            name=d["name"],
            estimate=float(d["estimate"]),
            std_error=float(d["se"]),
            ci_low=float(lo),
            ci_high=float(hi),
            z_score=float(d["z"]),
            p_value=float(d["p"]),
            influence_values=np.asarray(d.get("influence", []), dtype=np.float64),
        )


@dataclass(frozen=True)
class ImportanceReport:
    """Everything produced by one analysis run.

    ``sigma_diag`` holds the per-latent-coordinate weight totals
    ``sum_l W[j, l]``; for the Bures-Wasserstein map these are the
    diagonal entries of the estimated covariance, so that
    ``sum_j sigma_diag[j] * latent[j] == total_attributed``.
    """

    latent: tuple[ImportanceEstimate, ...]
    attributed: tuple[ImportanceEstimate, ...]
    groups: tuple[tuple[str, ImportanceEstimate], ...]
    total_latent: float
    total_attributed: float
    config: RunConfig
    sigma_diag: np.ndarray
    baselines: dict[str, tuple[ImportanceEstimate, ...]] = field(default_factory=dict)
    standardization: StandardizationInfo | None = None
    extras: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "latent", tuple(self.latent))
        object.__setattr__(self, "attributed", tuple(self.attributed))
        object.__setattr__(self, "groups", tuple((str(g), e) for g, e in self.groups))
        object.__setattr__(self, "sigma_diag", _frozen(self.sigma_diag, 1))
        if len(self.latent) != len(self.attributed) or len(self.sigma_diag) != len(self.latent):
            raise ValueError("latent, attributed and sigma_diag must have equal length")

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.attributed)

    def identity_gap(self) -> float:
        """Relative gap of ``sum_j sigma_diag[j] phi_Z[j]`` against ``sum_l phi_X[l]``."""
        lhs = math.fsum(s * e.estimate for s, e in zip(self.sigma_diag, self.latent))
        rhs = math.fsum(e.estimate for e in self.attributed)
        scale = max(abs(lhs), abs(rhs), math.fsum(abs(s * e.estimate) for s, e in zip(self.sigma_diag, self.latent)))
        return 0.0 if scale == 0 else abs(lhs - rhs) / scale

    def to_dict(self) -> dict[str, Any]:
        out = {
            "config": self.config.to_dict(),
            "latent": [e.to_dict() for e in self.latent],
            "attributed": [e.to_dict() for e in self.attributed],
            "groups": [e.to_dict() | {"name": g} for g, e in self.groups],
            "totals": {"latent": self.total_latent, "attributed": self.total_attributed},
            "sigma_diag": self.sigma_diag.tolist(),
        }
        if self.baselines:
            out["baselines"] = {k: [e.to_dict() for e in v] for k, v in self.baselines.items()}
        if self.standardization is not None:
            out["standardization"] = self.standardization.to_dict()
        if self.extras:
            out["extras"] = self.extras
        return out

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> ImportanceReport:
        std = d.get("standardization")
        return cls(
            latent=[ImportanceEstimate.from_dict(e) for e in d["latent"]],
            attributed=[ImportanceEstimate.from_dict(e) for e in d["attributed"]],
            groups=[(g["name"], ImportanceEstimate.from_dict(g)) for g in d.get("groups", [])],
            total_latent=float(d["totals"]["latent"]),
            total_attributed=float(d["totals"]["attributed"]),
            config=RunConfig.from_dict(d["config"]),
            sigma_diag=np.asarray(d["sigma_diag"], dtype=np.float64),
            baselines={
                k: tuple(ImportanceEstimate.from_dict(e) for e in v) for k, v in d.get("baselines", {}).items()
            },
            standardization=StandardizationInfo(std["means"], std["scales"]) if std else None,
            extras=d.get("extras", {}),
        )


def write_report(report: ImportanceReport, path) -> None:
    # json emits float repr, the shortest string that round-trips exactly
    text = json.dumps(report.to_dict(), indent=1)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
            fh.write("\n")
    except OSError as exc:
        raise DataError(f"cannot write report to {path}: {exc.strerror or exc}") from exc


def load_json(path) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ReportFormatError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise ReportFormatError(f"{path}: malformed JSON at byte offset {offset}: {exc.msg}") from exc


def read_report(path) -> ImportanceReport:
    data = load_json(path)
    try:
        return ImportanceReport.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ReportFormatError(f"{path}: not an importance report ({exc})") from exc


def names_to_indices(names: Sequence[str], members: Sequence[str]) -> list[int]:
    lookup = {n: i for i, n in enumerate(names)}
    out = []
    for m in members:
        if m not in lookup:
            raise DataError(f"unknown feature {m!r} in group definition")
        out.append(lookup[m])
    return out
