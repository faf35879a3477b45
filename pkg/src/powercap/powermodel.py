"""Linear container power model: fitting, prediction and error metrics."""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .core import (
    EmptyInput,
    FeatureVector,
    InsufficientData,
    JoinedRecord,
    PowerModel,
    SingularDesign,
    ZeroActual,
)

MIN_ROWS = 5

ModelLike = Union[PowerModel, Mapping[str, PowerModel]]


@dataclass
class FitConfig:
    solver: str = "closed"  # "closed" or "gd"
    learning_rate: float = 0.01
    epochs: int = 2000
    seed: int = 0


def design_rows(records: Iterable[JoinedRecord]) -> tuple[np.ndarray, np.ndarray]:
    """Sum container features per timestamp; the label is the server power.

    Records sharing a timestamp come from containers on the same metered
    server, so their features add up under the server-level model.
    """
    feats: dict[int, np.ndarray] = {}
    labels: dict[int, float] = {}
    for r in records:
        x = np.asarray(r.features.as_tuple(), dtype=float)
        if r.timestamp in feats:
            feats[r.timestamp] = feats[r.timestamp] + x
        else:
            feats[r.timestamp] = x
            labels[r.timestamp] = r.server_power
    ts = sorted(feats)
    if not ts:
        return np.zeros((0, 4)), np.zeros(0)
    return np.vstack([feats[t] for t in ts]), np.array([labels[t] for t in ts])


def _standardize(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    safe = np.where(std > 0, std, 1.0)
    return (X - mean) / safe, mean, std


def _closed_form(Z: np.ndarray, y: np.ndarray, std: np.ndarray) -> tuple[float, np.ndarray]:
    A = np.column_stack([np.ones(len(Z)), Z])
    if np.any(std == 0) or np.linalg.matrix_rank(A) < A.shape[1]:
        raise SingularDesign("design matrix is rank deficient")
    sol, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(sol[0]), sol[1:]


def _gradient_descent(Z: np.ndarray, y: np.ndarray, std: np.ndarray, cfg: FitConfig) -> tuple[float, np.ndarray]:
    rng = np.random.default_rng(cfg.seed)
    w = rng.normal(0.0, 0.01, Z.shape[1])
    w[std == 0] = 0.0
    bias = 0.0
    n = len(y)
    for _ in range(cfg.epochs):
        resid = Z @ w + bias - y
        w -= cfg.learning_rate * (2.0 / n) * (Z.T @ resid)
        bias -= cfg.learning_rate * (2.0 / n) * resid.sum()
    return bias, w


def fit_arrays(X: np.ndarray, y: np.ndarray, config: Optional[FitConfig] = None) -> PowerModel:
    cfg = config or FitConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(y) < MIN_ROWS:
        raise InsufficientData(f"need at least {MIN_ROWS} samples, got {len(y)}")
    Z, mean, std = _standardize(X)
    if cfg.solver == "closed":
        bias, w = _closed_form(Z, y, std)
    elif cfg.solver == "gd":
        bias, w = _gradient_descent(Z, y, std, cfg)
    else:
        raise ValueError(f"unknown solver {cfg.solver!r}")
    coef = np.where(std > 0, w / np.where(std > 0, std, 1.0), 0.0)
    intercept = bias - float(np.dot(coef, mean))
    return PowerModel(
        p_static=max(0.0, intercept),
        coeff_cpu=float(coef[0]),
        coeff_ram=float(coef[1]),
        coeff_disk=float(coef[2]),
        coeff_net=float(coef[3]),
        feature_scale=tuple((float(m), float(s)) for m, s in zip(mean, std)),
        solver=cfg.solver,
        meta={"rows": int(len(y)), "learning_rate": cfg.learning_rate, "epochs": cfg.epochs, "seed": cfg.seed}
        if cfg.solver == "gd" else {"rows": int(len(y))},
    )


def fit(records: Sequence[JoinedRecord], config: Optional[FitConfig] = None) -> PowerModel:
    """Fit static power and the four coefficients against metered server power."""
    X, y = design_rows(records)
    return fit_arrays(X, y, config)


def fit_by_class(
    records: Sequence[JoinedRecord], kind_of: Mapping[str, str], config: Optional[FitConfig] = None
) -> dict[str, PowerModel]:
    """One model per container class, from traces where each class ran alone."""
    groups: dict[str, list[JoinedRecord]] = defaultdict(list)
    for r in records:
        groups[kind_of.get(r.container_id, "default")].append(r)
    return {k: fit(v, config) for k, v in sorted(groups.items())}


def resolve_model(model: ModelLike, kind: str = "default") -> PowerModel:
    if isinstance(model, PowerModel):
        return model
    if kind in model:
        return model[kind]
    return model["default"]


def predict_container_power(model: PowerModel, f: FeatureVector) -> float:
    w = (
        model.coeff_cpu * f.ucpu
        + model.coeff_ram * f.uram
        + model.coeff_disk * f.udisk
        + model.coeff_net * f.unet
    )
    return max(0.0, w)


def predict_server_power(model: PowerModel, fs: Iterable[FeatureVector]) -> float:
    return model.p_static + sum(predict_container_power(model, f) for f in fs)


def predict_workload_power(model: PowerModel, cluster_features: Iterable[FeatureVector]) -> float:
    # dynamic only: a workload spread over servers owns none of their idle draw
    return sum(predict_container_power(model, f) for f in cluster_features)


def _pct_errors(predicted: Sequence[float], actual: Sequence[float]) -> np.ndarray:
    p = np.asarray(predicted, dtype=float)
    a = np.asarray(actual, dtype=float)
    if p.size == 0 or a.size == 0:
        raise EmptyInput("no samples")
    if p.shape != a.shape:
        raise ValueError("predicted and actual differ in length")
    if np.any(a <= 0):
        raise ZeroActual("actual values must be positive")
    return 100.0 * np.abs(p - a) / a


def mape(predicted: Sequence[float], actual: Sequence[float]) -> float:
    """Mean absolute percentage error, in percent."""
    return float(np.mean(_pct_errors(predicted, actual)))


def error_distribution(predicted: Sequence[float], actual: Sequence[float], bins: Sequence[float]) -> list[float]:
    """Fraction of samples whose percentage error is below each threshold.

    Thresholds are sorted ascending before counting, so the output is
    non-decreasing.
    """
    errs = _pct_errors(predicted, actual)
    return [float(np.mean(errs < t)) for t in sorted(bins)]


def train_test_split(n: int, test_fraction: float = 0.25, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    perm = np.random.default_rng(seed).permutation(n)
    n_test = max(1, int(round(n * test_fraction)))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def save_model(model: ModelLike, path) -> None:
    if isinstance(model, PowerModel):
        doc = model.to_dict()
    else:
        doc = {"models": {k: m.to_dict() for k, m in sorted(model.items())}}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> ModelLike:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if "models" in doc:
        return {k: PowerModel.from_dict(m) for k, m in doc["models"].items()}
    return PowerModel.from_dict(doc)
