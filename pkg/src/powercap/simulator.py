"""Discrete-time cluster simulator with a ground-truth power oracle.

One tick is one second. Tick ``t`` advances every running workload over the
interval [t-1, t), then samples utilization and power at ``t``. Container
freezes (migration, core deallocation) are tracked at sub-second resolution
so that the work lost to them is exact.
"""

from __future__ import annotations

import math
from collections import defaultdict, deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from . import scheduler
from .core import (
    ClusterSpec,
    ContainerState,
    EventKind,
    FeatureVector,
    JoinedRecord,
    MetricsReport,
    NonTermination,
    PowerSample,
    ServerState,
    SimEvent,
    UtilizationSample,
)
from .powermodel import ModelLike, resolve_model

DONE_EPS = 1e-9


class CappingMode(str, Enum):
    NONE = "none"
    CAP = "cap"
    FREQSCALE = "freqscale"


@dataclass
class SimConfig:
    detection_interval: int = 300
    migration_rate: float = 100e6  # bytes/s
    migration_fixed: float = 5.0  # s
    dealloc_delay: float = 0.18  # s
    capping_mode: CappingMode = CappingMode.NONE
    freq_step: float = 0.1
    compensate: bool = True
    stats_window: int = 5
    max_ticks: int = 1_000_000
    tick_length: int = 1

    def __post_init__(self):
        self.capping_mode = CappingMode(self.capping_mode)
        if self.tick_length != 1:
            raise ValueError("tick_length is fixed at 1 s")
        for name in ("migration_fixed", "dealloc_delay"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.migration_rate <= 0:
            raise ValueError("migration_rate must be > 0")
        if not 0 < self.freq_step < 1:
            raise ValueError("freq_step must be in (0, 1)")
        if self.detection_interval < 1:
            raise ValueError("detection_interval must be >= 1")


@dataclass
class OracleCoefficients:
    """Ground truth: static power and (a, b, c, d) per container class."""

    p_static: float = 30.0
    classes: dict[str, tuple[float, float, float, float]] = field(
        default_factory=lambda: {"default": (0.08, 0.04, 1e-8, 2e-8)}
    )
    noise_relative: float = 0.015
    noise_absolute: float = 0.3
    seed: int = 0

    def coefficients(self, kind: str) -> tuple[float, float, float, float]:
        return self.classes.get(kind, self.classes["default"])

    def container_power(self, kind: str, f: FeatureVector) -> float:
        a, b, c, d = self.coefficients(kind)
        return a * f.ucpu + b * f.uram + c * f.udisk + d * f.unet

    def noiseless(self) -> OracleCoefficients:
        return OracleCoefficients(self.p_static, dict(self.classes), 0.0, 0.0, self.seed)


def migration_time(image_size: float, cfg: SimConfig) -> float:
    """Freeze time of a checkpoint/restore migration; linear in image size."""
    if image_size < 0:
        raise ValueError("image_size must be >= 0")
    return cfg.migration_fixed + image_size / cfg.migration_rate


def deallocation_time(image_size: float, cfg: SimConfig) -> float:
    """Freeze time of taking a core away; independent of the container size."""
    return cfg.dealloc_delay


def oracle_power(
    server: ServerState,
    features: dict[str, FeatureVector],
    oracle: OracleCoefficients,
    rng: Optional[np.random.Generator] = None,
    kinds: Optional[dict[str, str]] = None,
    freq_scaling: bool = False,
) -> tuple[float, float]:
    """True and metered power of ``server`` given each hosted container's features.

    With ``freq_scaling`` the dynamic part is multiplied by the server's
    frequency factor. The meter adds Gaussian noise with standard deviation
    ``noise_relative * true + noise_absolute``.
    """
    kinds = kinds or {}
    dynamic = sum(
        oracle.container_power(kinds.get(c.id, "default"), features.get(c.id, FeatureVector()))
        for c in server.containers
    )
    if freq_scaling:
        dynamic *= server.freq_factor
    true = server.p_static + dynamic
    sigma = oracle.noise_relative * true + oracle.noise_absolute
    if rng is None or sigma == 0:
        return true, true
    return true, max(0.0, true + float(rng.normal(0.0, sigma)))


class SchedulerHooks:
    """Indirection over the scheduler so tests can observe capping episodes."""

    def place(self, cluster, model, now, power_aware=True):
        if power_aware:
            return scheduler.place_containers(cluster, model, now)
        return scheduler.place_first_fit(cluster, model, now)

    def detect(self, cluster, model, stats):
        return scheduler.detect_violations(cluster, model, stats)

    def apply_cap(self, cluster, server, candidate, model, probe, now, migrate, reduce):
        return scheduler.apply_power_cap(cluster, server, candidate, model, probe, now, migrate=migrate, reduce=reduce)

    def compensate(self, cluster, workload, reduced, model, removed, now):
        return scheduler.compensate(cluster, workload, reduced, model, removed, now)


@dataclass
class RunResult:
    report: MetricsReport
    events: list[SimEvent]
    server_power: list[tuple[int, str, float, float]]
    container_power: list[tuple[int, str, str, float]]
    utilization: dict[str, list[UtilizationSample]] = field(default_factory=dict)
    meter: dict[str, list[PowerSample]] = field(default_factory=dict)


class Simulator:
    def __init__(
        self,
        cluster: ClusterSpec,
        config: SimConfig,
        oracle: OracleCoefficients,
        model: ModelLike,
        hooks: Optional[SchedulerHooks] = None,
        name: str = "scenario",
        record_traces: bool = False,
    ):
        self.cluster = cluster
        self.config = config
        self.oracle = oracle
        self.model = model
        self.hooks = hooks or SchedulerHooks()
        self.name = name
        self.record_traces = record_traces
        self.rng = np.random.default_rng(oracle.seed)
        self.now = 0
        self.events: list[SimEvent] = []
        self._seq = 0
        self.frozen_until: dict[str, float] = defaultdict(float)
        self.features: dict[str, FeatureVector] = {}
        self.stats: dict[str, deque] = {}
        self.consumed: dict[str, float] = defaultdict(float)
        self.container_consumed: dict[str, list[tuple[int, float]]] = defaultdict(list)
        self.finish_time: dict[str, int] = {}
        self.last_progress: dict[str, int] = {}
        self.last_measured: dict[str, float] = {}
        self.server_power: list[tuple[int, str, float, float]] = []
        self.container_power: list[tuple[int, str, str, float]] = []
        self.first_cap_tick: dict[str, int] = {}  # end of the first capping response per server
        self.total_work = {k: w.total_cpu_work for k, w in cluster.workloads.items()}
        self._counters: dict[str, list[float]] = defaultdict(lambda: [0.0, 0.0, 0.0, 0.0])
        self.utilization: dict[str, list[UtilizationSample]] = defaultdict(list)
        self.meter: dict[str, list[PowerSample]] = defaultdict(list)

    # -- events -------------------------------------------------------------

    def emit(self, kind: EventKind, **payload) -> SimEvent:
        ev = SimEvent(self.now, self._seq, kind, payload)
        self._seq += 1
        self.events.append(ev)
        return ev

    # -- setup --------------------------------------------------------------

    @property
    def freq_scaling(self) -> bool:
        return self.config.capping_mode is CappingMode.FREQSCALE

    def setup(self) -> None:
        m = resolve_model(self.model)
        for s in self.cluster.servers:
            for c in s.containers:
                if c.pc is None:
                    c.pc = scheduler.profile_power(self.cluster, self.model, c)
            s.ps = m.p_static + sum(c.pc for c in s.containers)
            s.freq_factor = 1.0
        power_aware = self.config.capping_mode is CappingMode.CAP
        _, log = self.hooks.place(self.cluster, self.model, self.now, power_aware)
        placed = {c.id: c for c in self.cluster.containers()}
        for a in log:
            if a.kind == "Placed":
                c = placed[a.container]
                self.emit(EventKind.PLACED, container=c.id, server=a.server, cores=c.alloc_cores,
                          memory=c.alloc_memory, pc=c.pc)
            else:
                self.emit(EventKind.NO_ACTION, container=a.container, server=a.server, reason=a.reason)
        for wid, wl in self.cluster.workloads.items():
            self.last_progress[wid] = 0
            if wl.total_cpu_work <= 0:
                self._finish(wid)
        self._sample()

    # -- dynamics -----------------------------------------------------------

    def _effective_cores(self, c: ContainerState, server: ServerState) -> float:
        wl = self.cluster.workloads[c.workload]
        f = server.freq_factor if self.freq_scaling else 1.0
        return min(c.alloc_cores * f, wl.max_parallelism)

    def _finish(self, wid: str) -> None:
        wl = self.cluster.workloads[wid]
        wl.done = True
        wl.total_cpu_work = 0.0
        self.finish_time[wid] = self.now
        members = []
        for s in self.cluster.servers:
            for c in list(s.containers):
                if c.workload == wid:
                    s.containers.remove(c)
                    s.ps -= c.pc or 0.0
                    members.append(c.id)
        self.emit(EventKind.FINISHED, workload=wid, containers=sorted(members), execution_time=self.now)

    def _advance_work(self) -> list[str]:
        t0, t1 = self.now, self.now + 1
        rates: dict[str, float] = defaultdict(float)
        shares: dict[str, list[tuple[str, float]]] = defaultdict(list)
        for s in self.cluster.servers:
            for c in s.containers:
                active = min(1.0, max(0.0, t1 - max(t0, self.frozen_until[c.id])))
                r = self._effective_cores(c, s) * active
                rates[c.workload] += r
                shares[c.workload].append((c.id, r))
        finished = []
        for wid, wl in self.cluster.workloads.items():
            if wl.done:
                continue
            rate = rates.get(wid, 0.0)
            used = min(rate, wl.total_cpu_work)
            if used > 0:
                self.last_progress[wid] = t1
            wl.total_cpu_work -= used
            self.consumed[wid] += used
            scale = used / rate if rate > 0 else 0.0
            for cid, r in shares.get(wid, []):
                self.container_consumed[cid].append((t1, r * scale))
            if wl.total_cpu_work <= DONE_EPS:
                finished.append(wid)
        return finished

    def _container_features(self, c: ContainerState, s: ServerState) -> FeatureVector:
        if self.frozen_until[c.id] > self.now:
            return FeatureVector()
        wl = self.cluster.workloads[c.workload]
        return FeatureVector(100.0 * self._effective_cores(c, s), wl.mem_profile, wl.disk_rate, wl.net_rate)

    def _sample(self) -> None:
        kinds = {c.id: self.cluster.workloads[c.workload].kind for c in self.cluster.containers()}
        for s in self.cluster.servers:
            feats = {c.id: self._container_features(c, s) for c in s.containers}
            self.features.update(feats)
            true, measured = oracle_power(s, feats, self.oracle, self.rng, kinds, self.freq_scaling)
            self.last_measured[s.id] = measured
            self.server_power.append((self.now, s.id, true, measured))
            self.emit(EventKind.POWER_READING, server=s.id, true=true, measured=measured)
            scale = s.freq_factor if self.freq_scaling else 1.0
            for c in s.containers:
                cp = self.oracle.container_power(kinds[c.id], feats[c.id]) * scale
                self.container_power.append((self.now, c.id, s.id, cp))
                rec = JoinedRecord(self.now, c.id, feats[c.id], measured, cp)
                self.stats.setdefault(c.id, deque(maxlen=self.config.stats_window)).append(rec)
                if self.record_traces:
                    self._record_util(c, feats[c.id])
            if self.record_traces:
                self.meter[s.id].append(PowerSample(self.now, round(measured, 3)))

    def _record_util(self, c: ContainerState, f: FeatureVector) -> None:
        ctr = self._counters[c.id]
        # half of each byte rate goes to each direction of the counter pair
        ctr[0] += f.unet / 2
        ctr[1] += f.unet / 2
        ctr[2] += f.udisk / 2
        ctr[3] += f.udisk / 2
        mem_used = int(c.alloc_memory * f.uram / 100.0)
        self.utilization[c.server].append(UtilizationSample(
            self.now, c.id, f.ucpu, f.uram, mem_used, c.alloc_memory,
            *(int(math.floor(v)) for v in ctr), pids=1 + int(f.ucpu // 100),
        ))

    def advance(self) -> None:
        """One tick of workload progress followed by a stats/power sample."""
        finished = self._advance_work()
        self.now += 1
        for wid in finished:
            self._finish(wid)
        self._sample()

    # -- capping ------------------------------------------------------------

    def _probe(self, server: ServerState):
        def probe() -> float:
            self.advance()
            return self.last_measured[server.id]
        return probe

    def _migrate(self, src: ServerState, dst: ServerState, c: ContainerState) -> None:
        src.containers.remove(c)
        dst.containers.append(c)
        c.server = dst.id
        delay = migration_time(c.image_size, self.config)
        self.frozen_until[c.id] = max(self.frozen_until[c.id], self.now + delay)
        self.emit(EventKind.MIGRATED, container=c.id, source=src.id, target=dst.id, pc=c.pc,
                  target_ps=dst.ps, target_cap=dst.power_cap, freeze=delay)

    def _reduce(self, server: ServerState, c: ContainerState) -> None:
        c.alloc_cores -= 1
        delay = deallocation_time(c.image_size, self.config)
        self.frozen_until[c.id] = max(self.frozen_until[c.id], self.now + delay)
        self.emit(EventKind.CORE_REDUCED, container=c.id, server=server.id, cores=c.alloc_cores, freeze=delay)

    def _detect_and_cap(self) -> None:
        flagged = self.hooks.detect(self.cluster, self.model, self.stats)
        for v in flagged:
            s, cand = v.server, v.candidate
            self.emit(EventKind.VIOLATION_DETECTED, server=s.id, predicted=v.predicted,
                      candidate=cand.id if cand else None)
            if cand is None or cand not in s.containers:
                continue
            start_cores = cand.alloc_cores
            ok, log = self.hooks.apply_cap(self.cluster, s, cand, self.model, self._probe(s), self.now,
                                           self._migrate, self._reduce)
            if log.of_kind("Migrate") or log.of_kind("ReduceCores"):
                self.first_cap_tick.setdefault(s.id, self.now)
            for a in log.of_kind("NoAction"):
                self.emit(EventKind.NO_ACTION, container=a.container, server=a.server, reason=a.reason)
            removed = start_cores - cand.alloc_cores
            wl = self.cluster.workloads[cand.workload]
            if removed > 0 and self.config.compensate and not wl.done:
                comp = self.hooks.compensate(self.cluster, cand.workload, cand, self.model, removed, self.now)
                for a in comp:
                    self.emit(EventKind.COMPENSATED, container=a.container, server=a.server, cores=a.cores)

    def _freq_scale(self) -> None:
        step = self.config.freq_step
        for s in self.cluster.servers:
            measured = self.last_measured[s.id]
            if measured > s.power_cap:
                self.emit(EventKind.VIOLATION_DETECTED, server=s.id, predicted=measured, candidate=None)
                while measured > s.power_cap and s.freq_factor - step >= step - 1e-9:
                    s.freq_factor = round(s.freq_factor - step, 9)
                    self.emit(EventKind.FREQ_SCALED, server=s.id, freq=s.freq_factor)
                    self.advance()
                    measured = self.last_measured[s.id]
                if s.freq_factor < 1.0:
                    self.first_cap_tick.setdefault(s.id, self.now)
            elif measured < s.power_cap and s.freq_factor < 1.0:
                s.freq_factor = round(min(1.0, s.freq_factor + step), 9)
                self.emit(EventKind.FREQ_SCALED, server=s.id, freq=s.freq_factor)

    def step(self) -> None:
        self.advance()
        if self.now % self.config.detection_interval == 0:
            mode = self.config.capping_mode
            if mode is CappingMode.CAP:
                self._detect_and_cap()
            elif mode is CappingMode.FREQSCALE:
                self._freq_scale()
        self._check_progress()

    def _check_progress(self) -> None:
        limit = 10 * self.config.detection_interval
        for wid, wl in self.cluster.workloads.items():
            if not wl.done and self.now - self.last_progress[wid] > limit:
                raise NonTermination(f"workload {wid} made no progress since tick {self.last_progress[wid]}")
        if self.now > self.config.max_ticks:
            raise NonTermination(f"exceeded max_ticks={self.config.max_ticks}")

    @property
    def finished(self) -> bool:
        return all(w.done for w in self.cluster.workloads.values())

    # -- reporting ----------------------------------------------------------

    def report(self) -> MetricsReport:
        peak: dict[str, float] = {}
        post: dict[str, Optional[float]] = {s.id: None for s in self.cluster.servers}
        over: dict[str, int] = {s.id: 0 for s in self.cluster.servers}
        caps = {s.id: s.power_cap for s in self.cluster.servers}
        for tick, sid, true, _ in self.server_power:
            peak[sid] = max(peak.get(sid, true), true)
            if true > caps[sid]:
                over[sid] += 1
            first = self.first_cap_tick.get(sid)
            if first is not None and tick >= first:
                post[sid] = true if post[sid] is None else max(post[sid], true)
        counts = {k.value: 0 for k in (EventKind.MIGRATED, EventKind.CORE_REDUCED, EventKind.COMPENSATED,
                                       EventKind.FREQ_SCALED, EventKind.NO_ACTION)}
        for ev in self.events:
            if ev.kind.value in counts:
                counts[ev.kind.value] += 1
        return MetricsReport(
            scenario=self.name,
            mode=self.config.capping_mode.value,
            seed=self.oracle.seed,
            execution_time=dict(sorted(self.finish_time.items())),
            peak_power=peak,
            post_cap_peak_power=post,
            violation_ticks=over,
            action_counts=counts,
            ticks=self.now,
        )

    def result(self) -> RunResult:
        return RunResult(self.report(), self.events, self.server_power, self.container_power,
                         dict(self.utilization), dict(self.meter))


def run(
    cluster: ClusterSpec,
    config: SimConfig,
    oracle: OracleCoefficients,
    model: ModelLike,
    hooks: Optional[SchedulerHooks] = None,
    name: str = "scenario",
    record_traces: bool = False,
) -> RunResult:
    """Place the pending containers and simulate until every workload finishes."""
    sim = Simulator(cluster, config, oracle, model, hooks, name, record_traces)
    sim.setup()
    while not sim.finished:
        sim.step()
    return sim.result()
