"""Scenario documents: servers, workloads, oracle and simulator settings in one JSON file.

Example::

    {
      "name": "three-on-one",
      "seed": 7,
      "config": {"capping_mode": "cap", "detection_interval": 300},
      "oracle": {"p_static": 30, "classes": {"default": [0.08, 0.04, 1e-8, 2e-8]},
                 "noise_relative": 0.015, "noise_absolute": 0.3},
      "servers": [{"id": "s1", "cores": 8, "memory": 17179869184, "cap": 55}],
      "workloads": [{"id": "w1", "total_cpu_work": 1200, "max_parallelism": 2,
                     "mem_profile": 40, "containers": [{"id": "c1", "cores": 2,
                     "memory": 2147483648, "image_size": 500000000}]}]
    }
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, fields
from typing import Any

from .core import ClusterSpec, ContainerState, PowercapError, ServerState, WorkloadSpec
from .simulator import CappingMode, OracleCoefficients, SimConfig


class ScenarioError(PowercapError, ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass
class Scenario:
    name: str
    cluster: ClusterSpec
    config: SimConfig
    oracle: OracleCoefficients

    def fresh(self) -> Scenario:
        """Deep copy, since a run mutates cluster state."""
        return copy.deepcopy(self)

    def with_mode(self, mode: str, **overrides) -> Scenario:
        sc = self.fresh()
        sc.config.capping_mode = CappingMode(mode)
        for k, v in overrides.items():
            setattr(sc.config, k, v)
        return sc


def _get(d: dict, key: str, path: str, kind, default: Any = ...):
    if key not in d:
        if default is ...:
            raise ScenarioError(f"{path}.{key}", "missing required field")
        return default
    v = d[key]
    if kind is float and isinstance(v, int) and not isinstance(v, bool):
        v = float(v)
    if kind is int and isinstance(v, float) and v.is_integer():
        v = int(v)
    if not isinstance(v, kind) or isinstance(v, bool) and kind is not bool:
        raise ScenarioError(f"{path}.{key}", f"expected {kind.__name__}, got {type(v).__name__}")
    return v


def _nonneg(v, path: str):
    if v < 0:
        raise ScenarioError(path, "must be >= 0")
    return v


def parse_scenario(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("$", "scenario must be an object")
    name = _get(doc, "name", "$", str, "scenario")
    seed = _get(doc, "seed", "$", int, 0)

    cfg_doc = _get(doc, "config", "$", dict, {})
    known = {f.name for f in fields(SimConfig)}
    for k in cfg_doc:
        if k not in known:
            raise ScenarioError(f"$.config.{k}", "unknown field")
    try:
        config = SimConfig(**cfg_doc)
    except (ValueError, TypeError) as exc:
        raise ScenarioError("$.config", str(exc)) from None

    o = _get(doc, "oracle", "$", dict, {})
    classes = {}
    for k, v in _get(o, "classes", "$.oracle", dict, {"default": [0.08, 0.04, 1e-8, 2e-8]}).items():
        if not (isinstance(v, list) and len(v) == 4 and all(isinstance(x, (int, float)) for x in v)):
            raise ScenarioError(f"$.oracle.classes.{k}", "expected four numbers [a, b, c, d]")
        classes[k] = tuple(float(x) for x in v)
    if "default" not in classes:
        raise ScenarioError("$.oracle.classes", "a 'default' class is required")
    oracle = OracleCoefficients(
        p_static=_nonneg(_get(o, "p_static", "$.oracle", float, 30.0), "$.oracle.p_static"),
        classes=classes,
        noise_relative=_nonneg(_get(o, "noise_relative", "$.oracle", float, 0.015), "$.oracle.noise_relative"),
        noise_absolute=_nonneg(_get(o, "noise_absolute", "$.oracle", float, 0.3), "$.oracle.noise_absolute"),
        seed=seed,
    )

    servers = []
    server_docs = _get(doc, "servers", "$", list)
    if not server_docs:
        raise ScenarioError("$.servers", "at least one server is required")
    for i, sd in enumerate(server_docs):
        p = f"$.servers[{i}]"
        if not isinstance(sd, dict):
            raise ScenarioError(p, "expected object")
        servers.append(ServerState(
            id=_get(sd, "id", p, str),
            total_cores=_nonneg(_get(sd, "cores", p, int), f"{p}.cores"),
            total_memory=_nonneg(_get(sd, "memory", p, int), f"{p}.memory"),
            power_cap=_get(sd, "cap", p, float),
            p_static=_nonneg(_get(sd, "p_static", p, float, oracle.p_static), f"{p}.p_static"),
        ))
    server_ids = {s.id for s in servers}
    if len(server_ids) != len(servers):
        raise ScenarioError("$.servers", "duplicate server id")

    workloads: dict[str, WorkloadSpec] = {}
    pending = []
    seen = set()
    for i, wd in enumerate(_get(doc, "workloads", "$", list)):
        p = f"$.workloads[{i}]"
        if not isinstance(wd, dict):
            raise ScenarioError(p, "expected object")
        wid = _get(wd, "id", p, str)
        if wid in workloads:
            raise ScenarioError(f"{p}.id", f"duplicate workload id {wid!r}")
        kind = _get(wd, "kind", p, str, "default")
        workloads[wid] = WorkloadSpec(
            id=wid,
            total_cpu_work=_nonneg(_get(wd, "total_cpu_work", p, float), f"{p}.total_cpu_work"),
            max_parallelism=_get(wd, "max_parallelism", p, int, 1),
            mem_profile=_nonneg(_get(wd, "mem_profile", p, float, 0.0), f"{p}.mem_profile"),
            disk_rate=_nonneg(_get(wd, "disk_rate", p, float, 0.0), f"{p}.disk_rate"),
            net_rate=_nonneg(_get(wd, "net_rate", p, float, 0.0), f"{p}.net_rate"),
            kind=kind,
        )
        if workloads[wid].max_parallelism < 1:
            raise ScenarioError(f"{p}.max_parallelism", "must be >= 1")
        cdocs = _get(wd, "containers", p, list)
        if not cdocs:
            raise ScenarioError(f"{p}.containers", "at least one container is required")
        for j, cd in enumerate(cdocs):
            cp = f"{p}.containers[{j}]"
            if not isinstance(cd, dict):
                raise ScenarioError(cp, "expected object")
            cid = _get(cd, "id", cp, str)
            if cid in seen:
                raise ScenarioError(f"{cp}.id", f"duplicate container id {cid!r}")
            seen.add(cid)
            pin = _get(cd, "server", cp, str, None)
            if pin is not None and pin not in server_ids:
                raise ScenarioError(f"{cp}.server", f"unknown server {pin!r}")
            cores = _get(cd, "cores", cp, int)
            if cores < 1:
                raise ScenarioError(f"{cp}.cores", "must be >= 1")
            pending.append(ContainerState(
                id=cid,
                alloc_cores=cores,
                alloc_memory=_nonneg(_get(cd, "memory", cp, int, 0), f"{cp}.memory"),
                workload=wid,
                image_size=_nonneg(_get(cd, "image_size", cp, int, 0), f"{cp}.image_size"),
                server=pin,
            ))
    cluster = ClusterSpec(servers, pending, workloads, config.detection_interval, seed)
    return Scenario(name, cluster, config, oracle)


def load_scenario(path) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioError("$", f"invalid JSON: {exc}") from None
    return parse_scenario(doc)


def scenario_to_dict(sc: Scenario) -> dict:
    """Inverse of parse_scenario for an unplaced scenario."""
    cfg = {f.name: getattr(sc.config, f.name) for f in fields(SimConfig)}
    cfg["capping_mode"] = sc.config.capping_mode.value
    workloads = []
    for wid, wl in sc.cluster.workloads.items():
        workloads.append({
            "id": wid, "kind": wl.kind, "total_cpu_work": wl.total_cpu_work,
            "max_parallelism": wl.max_parallelism, "mem_profile": wl.mem_profile,
            "disk_rate": wl.disk_rate, "net_rate": wl.net_rate,
            "containers": [
                {k: v for k, v in {"id": c.id, "cores": c.alloc_cores, "memory": c.alloc_memory,
                                   "image_size": c.image_size, "server": c.server}.items() if v is not None}
                for c in sc.cluster.pending if c.workload == wid
            ],
        })
    return {
        "name": sc.name,
        "seed": sc.oracle.seed,
        "config": cfg,
        "oracle": {
            "p_static": sc.oracle.p_static,
            "classes": {k: list(v) for k, v in sc.oracle.classes.items()},
            "noise_relative": sc.oracle.noise_relative,
            "noise_absolute": sc.oracle.noise_absolute,
        },
        "servers": [
            {"id": s.id, "cores": s.total_cores, "memory": s.total_memory, "cap": s.power_cap, "p_static": s.p_static}
            for s in sc.cluster.servers
        ],
        "workloads": workloads,
    }
