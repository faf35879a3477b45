"""Parse docker-stats and power meter logs and join them into training records."""

from __future__ import annotations

import bisect
import csv
import io
import math
from collections import defaultdict
from os import PathLike
from typing import IO, Iterable, Optional, Union

from .core import (
    CounterRegression,
    FeatureVector,
    JoinedRecord,
    MalformedRow,
    NegativeCounter,
    NegativePower,
    PowerSample,
    UtilizationSample,
)

UTIL_HEADER = (
    "timestamp", "container_id", "cpu_pct", "mem_pct", "mem_used", "mem_limit",
    "net_rx", "net_tx", "blk_read", "blk_write", "pids",
)
POWER_HEADER = ("timestamp", "watts")
COUNTERS = ("net_rx", "net_tx", "blk_read", "blk_write")

Source = Union[str, PathLike, IO[str], IO[bytes]]


def _rows(source: Source, header: tuple[str, ...]) -> Iterable[tuple[int, list[str]]]:
    if isinstance(source, (str, PathLike)):
        with open(source, newline="", encoding="utf-8") as fh:
            yield from _rows(fh, header)
        return
    text = source.read()
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    reader = csv.reader(io.StringIO(text))
    first = next(reader, None)
    if first is None or tuple(h.strip() for h in first) != header:
        raise MalformedRow(f"expected header {','.join(header)}", 1)
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise MalformedRow(f"expected {len(header)} columns, got {len(row)}", line_no)
        yield line_no, row


def _num(value: str, kind, line_no: int, name: str):
    try:
        v = kind(value)
    except ValueError:
        raise MalformedRow(f"cannot parse {name}={value!r}", line_no) from None
    if kind is float and not math.isfinite(v):
        raise MalformedRow(f"non-finite {name}={value!r}", line_no)
    return v


def parse_utilization_csv(source: Source) -> list[UtilizationSample]:
    samples = []
    last: dict[str, UtilizationSample] = {}
    for line_no, row in _rows(source, UTIL_HEADER):
        s = UtilizationSample(
            timestamp=_num(row[0], int, line_no, "timestamp"),
            container_id=row[1],
            cpu_pct=_num(row[2], float, line_no, "cpu_pct"),
            mem_pct=_num(row[3], float, line_no, "mem_pct"),
            mem_used=_num(row[4], int, line_no, "mem_used"),
            mem_limit=_num(row[5], int, line_no, "mem_limit"),
            net_rx=_num(row[6], int, line_no, "net_rx"),
            net_tx=_num(row[7], int, line_no, "net_tx"),
            blk_read=_num(row[8], int, line_no, "blk_read"),
            blk_write=_num(row[9], int, line_no, "blk_write"),
            pids=_num(row[10], int, line_no, "pids"),
        )
        if s.cpu_pct < 0 or s.mem_pct < 0:
            raise MalformedRow("negative utilization", line_no)
        if any(getattr(s, c) < 0 for c in COUNTERS):
            raise NegativeCounter("negative counter", line_no)
        prev = last.get(s.container_id)
        if prev is not None and any(getattr(s, c) < getattr(prev, c) for c in COUNTERS):
            raise NegativeCounter(f"cumulative counter decreased for {s.container_id}", line_no)
        last[s.container_id] = s
        samples.append(s)
    return samples


def parse_power_csv(source: Source) -> list[PowerSample]:
    samples = []
    for line_no, row in _rows(source, POWER_HEADER):
        watts = _num(row[1], float, line_no, "watts")
        if watts < 0:
            raise NegativePower(f"negative power {watts}", line_no)
        samples.append(PowerSample(_num(row[0], int, line_no, "timestamp"), watts))
    return samples


def write_utilization_csv(samples: Iterable[UtilizationSample], fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(UTIL_HEADER)
    for s in samples:
        w.writerow([getattr(s, name) for name in UTIL_HEADER])


def write_power_csv(samples: Iterable[PowerSample], fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(POWER_HEADER)
    for s in samples:
        w.writerow([s.timestamp, repr(s.watts)])


def derive_features(prev: UtilizationSample, curr: UtilizationSample) -> FeatureVector:
    """Turn two consecutive samples of one container into utilization factors.

    CPU and memory are instantaneous percentages already; disk and network
    rates are first differences of the cumulative byte counters.
    """
    if prev.container_id != curr.container_id:
        raise ValueError("samples belong to different containers")
    dt = curr.timestamp - prev.timestamp
    if dt <= 0:
        raise ValueError("timestamps must increase")
    for c in COUNTERS:
        if getattr(curr, c) < getattr(prev, c):
            raise CounterRegression(f"{c} decreased for {curr.container_id} at t={curr.timestamp}")
    disk = (curr.blk_read + curr.blk_write) - (prev.blk_read + prev.blk_write)
    net = (curr.net_rx + curr.net_tx) - (prev.net_rx + prev.net_tx)
    return FeatureVector(ucpu=curr.cpu_pct, uram=curr.mem_pct, udisk=disk / dt, unet=net / dt)


class _PowerIndex:
    # duplicate meter timestamps are averaged so the join is order independent
    def __init__(self, power: Iterable[PowerSample]):
        groups: dict[int, list[float]] = defaultdict(list)
        for p in power:
            groups[p.timestamp].append(p.watts)
        self.times = sorted(groups)
        self.watts = [math.fsum(groups[t]) / len(groups[t]) for t in self.times]

    def nearest(self, t: int, tolerance: int) -> Optional[float]:
        i = bisect.bisect_left(self.times, t)
        best = None
        # earlier candidate is checked first so it wins ties
        for j in (i - 1, i):
            if 0 <= j < len(self.times):
                d = abs(self.times[j] - t)
                if d <= tolerance and (best is None or d < best[0]):
                    best = (d, j)
        return None if best is None else self.watts[best[1]]


def match_power(t: int, power: list[PowerSample], tolerance: int = 0) -> Optional[float]:
    """Meter reading paired with timestamp ``t``, or None when none is in range."""
    return _PowerIndex(power).nearest(t, tolerance)


def join_by_timestamp(
    utils: list[UtilizationSample],
    power: list[PowerSample],
    tolerance: int = 0,
) -> tuple[list[JoinedRecord], int]:
    """Pair utilization samples with meter readings.

    The first sample of every container only seeds the counter differencing.
    Returns the joined records (sorted by timestamp, then container id) and the
    number of samples dropped for lack of a meter reading within ``tolerance``.
    """
    if tolerance < 0:
        raise ValueError("tolerance must be >= 0")
    index = _PowerIndex(power)
    by_container: dict[str, list[UtilizationSample]] = defaultdict(list)
    for s in utils:
        by_container[s.container_id].append(s)

    records = []
    dropped = 0
    for cid, samples in by_container.items():
        samples.sort(key=lambda s: s.timestamp)
        for prev, curr in zip(samples, samples[1:]):
            watts = index.nearest(curr.timestamp, tolerance)
            if watts is None:
                dropped += 1
                continue
            records.append(JoinedRecord(curr.timestamp, cid, derive_features(prev, curr), watts))
    records.sort(key=lambda r: (r.timestamp, r.container_id))
    return records, dropped
