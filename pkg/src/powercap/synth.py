"""Synthetic training data generated from known model coefficients."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .core import FeatureVector, JoinedRecord, PowerSample, UtilizationSample

REFERENCE = {"p_static": 30.0, "a": 0.08, "b": 0.04, "c": 1e-8, "d": 2e-8}


def random_features(rng: np.random.Generator, n: int, max_cores: int = 4) -> np.ndarray:
    return np.column_stack([
        rng.uniform(0, 100 * max_cores, n),
        rng.uniform(0, 100, n),
        rng.uniform(0, 2e8, n),
        rng.uniform(0, 1e8, n),
    ])


def meter_noise(rng: np.random.Generator, watts: np.ndarray, relative: float = 0.015, absolute: float = 0.3) -> np.ndarray:
    """Gaussian meter error with standard deviation ``relative * W + absolute``."""
    return rng.normal(0.0, 1.0, len(watts)) * (relative * watts + absolute)


def synthetic_records(
    n: int,
    coeffs: Optional[dict] = None,
    seed: int = 0,
    noise: bool = False,
) -> list[JoinedRecord]:
    """One single-container record per second, labels from the linear server model."""
    k = {**REFERENCE, **(coeffs or {})}
    rng = np.random.default_rng(seed)
    X = random_features(rng, n)
    dyn = X @ np.array([k["a"], k["b"], k["c"], k["d"]])
    y = k["p_static"] + dyn
    if noise:
        y = np.maximum(y + meter_noise(rng, y), 0.0)
    return [
        JoinedRecord(t + 1, "c0", FeatureVector(*map(float, X[t])), float(y[t]), float(dyn[t]))
        for t in range(n)
    ]


def synthetic_logs(
    n: int,
    coeffs: Optional[dict] = None,
    seed: int = 0,
    containers: int = 1,
    noise: bool = False,
) -> tuple[list[UtilizationSample], list[PowerSample]]:
    """docker-stats style samples and meter readings for ``n`` seconds.

    Byte rates are whole numbers so that differencing the cumulative counters
    gives back exactly the rates used to compute power.
    """
    k = {**REFERENCE, **(coeffs or {})}
    rng = np.random.default_rng(seed)
    utils, power = [], []
    counters = {f"c{i}": [0, 0, 0, 0] for i in range(containers)}
    for t in range(n + 1):
        total = k["p_static"]
        for cid, ctr in counters.items():
            cpu = float(rng.uniform(0, 400))
            mem = float(rng.uniform(0, 100))
            disk = int(rng.integers(0, 2 * 10**8))
            net = int(rng.integers(0, 10**8))
            if t > 0:
                ctr[0] += net // 2
                ctr[1] += net - net // 2
                ctr[2] += disk // 2
                ctr[3] += disk - disk // 2
            else:
                disk = net = 0
            limit = 4 * 2**30
            utils.append(UtilizationSample(t, cid, cpu, mem, int(limit * mem / 100), limit, *ctr, pids=4))
            total += k["a"] * cpu + k["b"] * mem + k["c"] * disk + k["d"] * net
        watts = total
        if noise:
            watts = max(0.0, watts + float(meter_noise(rng, np.array([watts]))[0]))
        power.append(PowerSample(t, watts))
    return utils, power
