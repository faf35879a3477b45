"""Scenario builders for the comparison experiments and randomized checks."""

from __future__ import annotations

import numpy as np

from .core import ClusterSpec, ContainerState, PowerModel, ServerState, WorkloadSpec
from .scenario import Scenario
from .simulator import OracleCoefficients, SimConfig

GIB = 2**30


def oracle_model(oracle: OracleCoefficients, kind: str = "default") -> PowerModel:
    """A model that predicts exactly what the noiseless oracle reports."""
    a, b, c, d = oracle.coefficients(kind)
    return PowerModel(oracle.p_static, a, b, c, d, solver="oracle")


def three_on_one(mode: str = "cap", work: float = 3000.0, cap: float = 78.0, seed: int = 0,
                 noise: bool = False) -> Scenario:
    """Three identical two-core containers sharing one server whose cap binds on the third."""
    oracle = OracleCoefficients(seed=seed)
    if not noise:
        oracle = oracle.noiseless()
    workloads = {f"w{i}": WorkloadSpec(f"w{i}", work, 2, 40.0) for i in range(1, 4)}
    pending = [ContainerState(f"c{i}", 2, 2 * GIB, f"w{i}", image_size=500_000_000) for i in range(1, 4)]
    cluster = ClusterSpec([ServerState("s1", 8, 16 * GIB, cap, oracle.p_static)], pending, workloads, 300, seed)
    return Scenario("three-on-one", cluster, SimConfig(capping_mode=mode), oracle)


def compensation_pair(compensate: bool = True, mode: str = "cap", work: float = 8000.0) -> Scenario:
    """A two-container workload split over two servers; the first server's cap binds.

    The second server has no room to take the capped container, so capping
    must remove cores, and its two spare cores can absorb the compensation.
    """
    oracle = OracleCoefficients().noiseless()
    workloads = {
        "bg": WorkloadSpec("bg", 4 * 2000.0, 4, 0.0),
        "job": WorkloadSpec("job", work, 8, 0.0),
    }
    pending = [
        ContainerState("bg1", 4, 2 * GIB, "bg", server="s1"),
        ContainerState("job1", 4, 2 * GIB, "job", image_size=800_000_000, server="s1"),
        ContainerState("job2", 4, 2 * GIB, "job", image_size=800_000_000, server="s2"),
    ]
    servers = [
        ServerState("s1", 8, 16 * GIB, 80.0, oracle.p_static),
        ServerState("s2", 6, 16 * GIB, 200.0, oracle.p_static),
    ]
    cluster = ClusterSpec(servers, pending, workloads, 300, 0)
    return Scenario("compensation-pair", cluster, SimConfig(capping_mode=mode, compensate=compensate), oracle)


def random_scenario(seed: int, mode: str = "cap", detection_interval: int = 20) -> Scenario:
    """Small random cluster with caps drawn so that violations are common."""
    rng = np.random.default_rng(seed)
    oracle = OracleCoefficients(seed=seed).noiseless()
    n_servers = int(rng.integers(1, 5))
    servers = []
    for i in range(n_servers):
        cores = int(rng.integers(6, 17))
        servers.append(ServerState(f"s{i}", cores, 32 * GIB, float(rng.uniform(40, 100)), oracle.p_static))
    workloads, pending = {}, []
    for i in range(int(rng.integers(2, 7))):
        par = int(rng.integers(1, 5))
        wl = WorkloadSpec(f"w{i}", float(rng.integers(100, 1500)), par, float(rng.uniform(0, 80)),
                          float(rng.integers(0, 10**8)), float(rng.integers(0, 10**8)))
        workloads[wl.id] = wl
        for j in range(int(rng.integers(1, 3))):
            pending.append(ContainerState(f"c{i}_{j}", int(rng.integers(1, 4)), int(rng.integers(1, 4)) * GIB,
                                          wl.id, image_size=int(rng.integers(0, 2 * 10**9))))
    cfg = SimConfig(capping_mode=mode, detection_interval=detection_interval)
    cluster = ClusterSpec(servers, pending, workloads, detection_interval, seed)
    return Scenario(f"random-{seed}", cluster, cfg, oracle)
