"""Domain types shared by the trace, model, scheduler and simulator modules.

Units: timestamps and ticks are integer seconds from scenario start, power in
Watts, memory and I/O in bytes, CPU utilization in percent of one host core
(so a container on two cores ranges over [0, 200]).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from typing import Any, Optional

MIN_CORES = 1


class PowercapError(Exception):
    """Base class for all errors raised by this package."""


class TraceError(PowercapError, ValueError):
    def __init__(self, message: str, line_no: Optional[int] = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class MalformedRow(TraceError):
    pass


class NegativeCounter(TraceError):
    pass


class NegativePower(TraceError):
    pass


class CounterRegression(TraceError):
    pass


class InsufficientData(PowercapError, ValueError):
    pass


class SingularDesign(PowercapError, ValueError):
    pass


class EmptyInput(PowercapError, ValueError):
    pass


class ZeroActual(PowercapError, ValueError):
    pass


class NoCapacity(PowercapError):
    pass


class MissingStats(PowercapError, KeyError):
    pass


class NonTermination(PowercapError, RuntimeError):
    pass


@dataclass(frozen=True)
class UtilizationSample:
    """One row of docker-stats style output."""

    timestamp: int
    container_id: str
    cpu_pct: float
    mem_pct: float
    mem_used: int
    mem_limit: int
    net_rx: int
    net_tx: int
    blk_read: int
    blk_write: int
    pids: int

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> UtilizationSample:
        return cls(**d)


@dataclass(frozen=True)
class PowerSample:
    timestamp: int
    watts: float

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> PowerSample:
        return cls(**d)


FEATURE_NAMES = ("ucpu", "uram", "udisk", "unet")


@dataclass(frozen=True)
class FeatureVector:
    """Utilization factors feeding the linear power model.

    ``ucpu`` is already the sum over the container's cores, ``uram`` a percent
    of allocated memory, ``udisk`` and ``unet`` byte rates.
    """

    ucpu: float = 0.0
    uram: float = 0.0
    udisk: float = 0.0
    unet: float = 0.0

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.ucpu, self.uram, self.udisk, self.unet)

    def __add__(self, other: FeatureVector) -> FeatureVector:
        return FeatureVector(*(x + y for x, y in zip(self.as_tuple(), other.as_tuple())))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> FeatureVector:
        return cls(**d)


@dataclass(frozen=True)
class JoinedRecord:
    timestamp: int
    container_id: str
    features: FeatureVector
    server_power: float
    container_power: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> JoinedRecord:
        d = dict(d)
        d["features"] = FeatureVector.from_dict(d["features"])
        return cls(**d)


@dataclass(frozen=True)
class PowerModel:
    """Static power plus one coefficient per utilization factor.

    Coefficients are stored in raw feature units; ``feature_scale`` keeps the
    (mean, std) pairs that were used to standardize features during fitting.
    """

    p_static: float
    coeff_cpu: float
    coeff_ram: float
    coeff_disk: float
    coeff_net: float
    feature_scale: tuple[tuple[float, float], ...] = ((0.0, 1.0),) * 4
    solver: str = "closed"
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def coefficients(self) -> tuple[float, float, float, float]:
        return (self.coeff_cpu, self.coeff_ram, self.coeff_disk, self.coeff_net)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["feature_scale"] = [list(p) for p in self.feature_scale]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> PowerModel:
        d = dict(d)
        d["feature_scale"] = tuple(tuple(float(v) for v in p) for p in d.get("feature_scale", ((0.0, 1.0),) * 4))
        return cls(**d)


@dataclass
class WorkloadSpec:
    """Work-based stand-in for a benchmark that runs to completion.

    ``total_cpu_work`` is the remaining core-seconds, shared by every
    container of the workload. ``max_parallelism`` caps how many cores a
    single container of the workload can keep busy.
    """

    id: str
    total_cpu_work: float
    max_parallelism: int = 1
    mem_profile: float = 0.0
    disk_rate: float = 0.0
    net_rate: float = 0.0
    kind: str = "default"
    done: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> WorkloadSpec:
        return cls(**d)


@dataclass
class ContainerState:
    id: str
    alloc_cores: int
    alloc_memory: int
    workload: str
    image_size: int = 0
    pc: Optional[float] = None
    placed_at: float = 0.0
    server: Optional[str] = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> ContainerState:
        return cls(**d)


@dataclass
class ServerState:
    id: str
    total_cores: int
    total_memory: int
    power_cap: float
    p_static: float = 0.0
    oracle: Optional[dict] = None
    containers: list[ContainerState] = field(default_factory=list)
    ps: float = 0.0
    freq_factor: float = 1.0

    @property
    def used_cores(self) -> int:
        return sum(c.alloc_cores for c in self.containers)

    @property
    def used_memory(self) -> int:
        return sum(c.alloc_memory for c in self.containers)

    @property
    def free_cores(self) -> int:
        return self.total_cores - self.used_cores

    @property
    def free_memory(self) -> int:
        return self.total_memory - self.used_memory

    def fits(self, container: ContainerState) -> bool:
        return self.free_cores >= container.alloc_cores and self.free_memory >= container.alloc_memory

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> ServerState:
        d = dict(d)
        d["containers"] = [ContainerState.from_dict(c) for c in d.get("containers", [])]
        return cls(**d)


@dataclass
class ClusterSpec:
    servers: list[ServerState]
    pending: list[ContainerState] = field(default_factory=list)
    workloads: dict[str, WorkloadSpec] = field(default_factory=dict)
    detection_interval: int = 300
    rng_seed: int = 0

    def server(self, server_id: str) -> ServerState:
        for s in self.servers:
            if s.id == server_id:
                return s
        raise KeyError(server_id)

    def host_of(self, container_id: str) -> ServerState:
        for s in self.servers:
            for c in s.containers:
                if c.id == container_id:
                    return s
        raise KeyError(container_id)

    def containers(self) -> list[ContainerState]:
        return [c for s in self.servers for c in s.containers]

    def to_dict(self) -> dict:
        return {
            "servers": [s.to_dict() for s in self.servers],
            "pending": [c.to_dict() for c in self.pending],
            "workloads": {k: w.to_dict() for k, w in self.workloads.items()},
            "detection_interval": self.detection_interval,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ClusterSpec:
        return cls(
            servers=[ServerState.from_dict(s) for s in d["servers"]],
            pending=[ContainerState.from_dict(c) for c in d.get("pending", [])],
            workloads={k: WorkloadSpec.from_dict(w) for k, w in d.get("workloads", {}).items()},
            detection_interval=d.get("detection_interval", 300),
            rng_seed=d.get("rng_seed", 0),
        )


class EventKind(str, Enum):
    PLACED = "Placed"
    VIOLATION_DETECTED = "ViolationDetected"
    MIGRATED = "Migrated"
    CORE_REDUCED = "CoreReduced"
    COMPENSATED = "Compensated"
    FREQ_SCALED = "FreqScaled"
    NO_ACTION = "NoAction"
    FINISHED = "Finished"
    POWER_READING = "PowerReading"


@dataclass(frozen=True)
class SimEvent:
    tick: int
    seq: int
    kind: EventKind
    payload: dict

    def to_dict(self) -> dict:
        return {"tick": self.tick, "seq": self.seq, "kind": self.kind.value, "payload": self.payload}

    @classmethod
    def from_dict(cls, d: dict) -> SimEvent:
        return cls(tick=d["tick"], seq=d["seq"], kind=EventKind(d["kind"]), payload=d["payload"])


@dataclass
class MetricsReport:
    scenario: str
    mode: str
    seed: int
    execution_time: dict[str, int]
    peak_power: dict[str, float]
    post_cap_peak_power: dict[str, Optional[float]]
    violation_ticks: dict[str, int]
    action_counts: dict[str, int]
    ticks: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> MetricsReport:
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


def plain(obj: Any) -> Any:
    """Convert dataclass trees to JSON-ready builtins."""
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, dict):
        return {k: plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    return obj
