"""Power-capped placement, violation detection and capping.

All power comparisons are strict in the same direction as the original
pseudocode: a server accepts a container only if the resulting power stays
strictly below the cap, and is in violation only when strictly above it.
A server sitting exactly at its cap is left alone.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .core import (
    MIN_CORES,
    ClusterSpec,
    ContainerState,
    FeatureVector,
    JoinedRecord,
    MissingStats,
    NoCapacity,
    ServerState,
    WorkloadSpec,
)
from .powermodel import ModelLike, predict_container_power, resolve_model

NOT_POSSIBLE = "power-capped placement not possible"


@dataclass
class CapAction:
    kind: str  # Placed | Migrate | ReduceCores | Compensate | NoAction
    container: Optional[str] = None
    server: Optional[str] = None
    target: Optional[str] = None
    cores: Optional[int] = None
    reason: Optional[str] = None
    tick: Optional[float] = None

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


class CapActionLog(list):
    """Ordered list of CapAction with a line-delimited JSON form."""

    def add(self, kind: str, **kw) -> CapAction:
        action = CapAction(kind, **kw)
        self.append(action)
        return action

    def of_kind(self, kind: str) -> list[CapAction]:
        return [a for a in self if a.kind == kind]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(a.to_dict(), sort_keys=True) + "\n" for a in self)


@dataclass
class Violation:
    server: ServerState
    candidate: Optional[ContainerState]
    predicted: float


def profile_features(workload: WorkloadSpec, cores: int) -> FeatureVector:
    """Utilization a container of ``workload`` shows when running on ``cores`` cores."""
    return FeatureVector(
        ucpu=100.0 * min(cores, workload.max_parallelism),
        uram=workload.mem_profile,
        udisk=workload.disk_rate,
        unet=workload.net_rate,
    )


def profile_power(cluster: ClusterSpec, model: ModelLike, c: ContainerState, cores: Optional[int] = None) -> float:
    wl = cluster.workloads[c.workload]
    m = resolve_model(model, wl.kind)
    return predict_container_power(m, profile_features(wl, c.alloc_cores if cores is None else cores))


def _attach(server: ServerState, c: ContainerState, pc: float, now: float) -> None:
    c.server = server.id
    c.placed_at = now
    server.containers.append(c)
    server.ps += pc


def place_containers(
    cluster: ClusterSpec, model: ModelLike, now: float = 0.0
) -> tuple[dict[str, str], CapActionLog]:
    """First-fit power-capped placement of every pending container, in order.

    Containers with ``server`` preset are pinned there (capacity still checked).
    Placed containers are removed from ``cluster.pending``.
    """
    placement: dict[str, str] = {}
    log = CapActionLog()
    for c in list(cluster.pending):
        if c.pc is None:
            c.pc = profile_power(cluster, model, c)
        if c.server is not None:
            target = cluster.server(c.server)
            if not target.fits(c):
                raise NoCapacity(f"pinned server {target.id} cannot hold {c.id}")
        else:
            target = None
            for s in cluster.servers:
                if s.ps + c.pc < s.power_cap and s.fits(c):
                    target = s
                    break
            if target is None:
                target = min(cluster.servers, key=lambda s: s.ps)  # min() keeps the lowest index on ties
                log.add("NoAction", container=c.id, server=target.id, reason=NOT_POSSIBLE, tick=now)
                if not target.fits(c):
                    raise NoCapacity(f"fallback server {target.id} cannot hold {c.id}")
        _attach(target, c, c.pc, now)
        placement[c.id] = target.id
        log.add("Placed", container=c.id, server=target.id, cores=c.alloc_cores, tick=now)
        cluster.pending.remove(c)
    return placement, log


def place_first_fit(
    cluster: ClusterSpec, model: ModelLike, now: float = 0.0
) -> tuple[dict[str, str], CapActionLog]:
    """Capacity-only first fit, the placement used by the uncapped and DVFS baselines."""
    placement: dict[str, str] = {}
    log = CapActionLog()
    for c in list(cluster.pending):
        if c.pc is None:
            c.pc = profile_power(cluster, model, c)
        if c.server is not None:
            target = cluster.server(c.server)
            ok = target.fits(c)
        else:
            target = next((s for s in cluster.servers if s.fits(c)), None)
            ok = target is not None
        if not ok:
            raise NoCapacity(f"no server can hold {c.id}")
        _attach(target, c, c.pc, now)
        placement[c.id] = target.id
        log.add("Placed", container=c.id, server=target.id, cores=c.alloc_cores, tick=now)
        cluster.pending.remove(c)
    return placement, log


def newest_container(server: ServerState) -> Optional[ContainerState]:
    if not server.containers:
        return None
    idx = max(range(len(server.containers)), key=lambda i: (server.containers[i].placed_at, i))
    return server.containers[idx]


def _window_features(records: Sequence[JoinedRecord]) -> FeatureVector:
    arr = np.array([r.features.as_tuple() for r in records], dtype=float)
    return FeatureVector(*(float(v) for v in arr.mean(axis=0)))


def detect_violations(
    cluster: ClusterSpec,
    model: ModelLike,
    stats_window: Mapping[str, Sequence[JoinedRecord]],
) -> list[Violation]:
    """Predict every server's power from recent container stats and flag those above cap.

    Side effects: each container's ``pc`` and each server's ``ps`` are
    refreshed with the new predictions, which later migration checks read.
    """
    totals = []
    for s in cluster.servers:
        total = 0.0
        for c in s.containers:
            records = stats_window.get(c.id)
            if not records:
                raise MissingStats(c.id)
            wl = cluster.workloads.get(c.workload)
            m = resolve_model(model, wl.kind if wl else "default")
            c.pc = predict_container_power(m, _window_features(records))
            total += c.pc
        total += resolve_model(model).p_static
        s.ps = total
        totals.append(total)
    flagged = []
    for s, total in zip(cluster.servers, totals):
        if total > s.power_cap:
            flagged.append(Violation(s, newest_container(s), total))
    return flagged


def _default_migrate(src: ServerState, dst: ServerState, c: ContainerState) -> None:
    src.containers.remove(c)
    dst.containers.append(c)
    c.server = dst.id


def _default_reduce(server: ServerState, c: ContainerState) -> None:
    c.alloc_cores -= 1


def apply_power_cap(
    cluster: ClusterSpec,
    server: ServerState,
    candidate: ContainerState,
    model: ModelLike,
    power_probe: Callable[[], float],
    now: float = 0.0,
    migrate: Optional[Callable[[ServerState, ServerState, ContainerState], None]] = None,
    reduce: Optional[Callable[[ServerState, ContainerState], None]] = None,
) -> tuple[bool, CapActionLog]:
    """Bring ``server`` back under its cap by moving or shrinking ``candidate``.

    Migration is tried first, to the first other server whose PS plus the
    candidate's power stays below its cap and which has room. Otherwise
    cores are taken away one at a time, reading ``power_probe`` after each
    step, until the probe reports power at or below the cap or the
    candidate is down to one core. Returns success and the actions taken.
    """
    migrate = migrate or _default_migrate
    reduce = reduce or _default_reduce
    log = CapActionLog()
    pc = candidate.pc or 0.0

    for dst in cluster.servers:
        if dst is server:
            continue
        if dst.ps + pc < dst.power_cap and dst.fits(candidate):
            migrate(server, dst, candidate)
            candidate.placed_at = now
            dst.ps += pc
            server.ps -= pc
            log.add("Migrate", container=candidate.id, server=server.id, target=dst.id, tick=now)
            return True, log

    power = server.ps
    while power > server.power_cap:
        if candidate not in server.containers:  # finished while settling
            return True, log
        if candidate.alloc_cores <= MIN_CORES:
            log.add("NoAction", container=candidate.id, server=server.id, reason="core floor reached", tick=now)
            return False, log
        reduce(server, candidate)
        log.add("ReduceCores", container=candidate.id, server=server.id, cores=candidate.alloc_cores, tick=now)
        power = power_probe()
        server.ps = power
        if power <= server.power_cap:
            return True, log
    return True, log


def compensate(
    cluster: ClusterSpec,
    workload: str,
    reduced: ContainerState,
    model: ModelLike,
    removed: int,
    now: float = 0.0,
) -> CapActionLog:
    """Hand the cores taken from ``reduced`` to siblings of the same workload on other servers.

    One core is granted per removed core, each time to the first sibling
    whose host has a free core and stays strictly below its cap after the
    predicted power increase. Stops at the first core nobody can take.
    """
    log = CapActionLog()
    siblings = [
        c for s in cluster.servers for c in s.containers
        if c.workload == workload and c.id != reduced.id and s.id != reduced.server
    ]
    for _ in range(removed):
        for sib in siblings:
            host = cluster.server(sib.server)
            delta = profile_power(cluster, model, sib, sib.alloc_cores + 1) - profile_power(cluster, model, sib)
            if host.free_cores >= 1 and host.ps + delta < host.power_cap:
                sib.alloc_cores += 1
                host.ps += delta
                log.add("Compensate", container=sib.id, server=host.id, cores=sib.alloc_cores, tick=now)
                break
        else:
            break
    return log
