import io
import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from powercap.core import (
    CounterRegression,
    FeatureVector,
    MalformedRow,
    NegativeCounter,
    NegativePower,
    PowerSample,
    UtilizationSample,
)
from powercap.trace import (
    UTIL_HEADER,
    derive_features,
    join_by_timestamp,
    match_power,
    parse_power_csv,
    parse_utilization_csv,
    write_power_csv,
    write_utilization_csv,
)

HEADER = ",".join(UTIL_HEADER) + "\n"


def util(t, cid="c1", cpu=100.0, rx=0, tx=0, rd=0, wr=0):
    return UtilizationSample(t, cid, cpu, 50.0, 1, 2, rx, tx, rd, wr, 3)


def test_parse_utilization_row():
    src = io.BytesIO((HEADER + "5,c1,150.0,50.0,2147483648,4294967296,1000,2000,0,0,12\n").encode())
    (s,) = parse_utilization_csv(src)
    assert s.cpu_pct == 150.0
    assert s.timestamp == 5 and s.container_id == "c1"
    assert s.mem_used == 2147483648 and s.net_tx == 2000 and s.pids == 12


def test_parse_utilization_empty():
    assert parse_utilization_csv(io.StringIO(HEADER)) == []


def test_parse_utilization_short_row():
    src = io.StringIO(HEADER + "5,c1,150.0,50.0,2147483648,4294967296,1000,2000,0,0\n")
    with pytest.raises(MalformedRow) as exc:
        parse_utilization_csv(src)
    assert exc.value.line_no == 2


def test_parse_utilization_bad_number():
    with pytest.raises(MalformedRow):
        parse_utilization_csv(io.StringIO(HEADER + "5,c1,abc,50,1,2,0,0,0,0,1\n"))


def test_parse_utilization_counter_decrease():
    src = io.StringIO(HEADER + "1,c1,1,1,1,2,1000,0,0,0,1\n" + "2,c2,1,1,1,2,10,0,0,0,1\n" + "3,c1,1,1,1,2,500,0,0,0,1\n")
    with pytest.raises(NegativeCounter) as exc:
        parse_utilization_csv(src)
    assert exc.value.line_no == 4


def test_parse_power():
    assert parse_power_csv(io.StringIO("timestamp,watts\n5,41.2\n")) == [PowerSample(5, 41.2)]


def test_parse_power_negative():
    with pytest.raises(NegativePower):
        parse_power_csv(io.StringIO("timestamp,watts\n5,-1.0\n"))


def test_parse_power_keeps_duplicates():
    got = parse_power_csv(io.StringIO("timestamp,watts\n5,40\n5,42\n"))
    assert got == [PowerSample(5, 40.0), PowerSample(5, 42.0)]


def test_parse_missing_header():
    with pytest.raises(MalformedRow):
        parse_power_csv(io.StringIO("5,40\n"))


def test_csv_roundtrip(tmp_path):
    samples = [util(1, rx=3), util(2, rx=9, wr=4)]
    power = [PowerSample(1, 40.123456789), PowerSample(2, 0.1 + 0.2)]
    with open(tmp_path / "u.csv", "w") as fh:
        write_utilization_csv(samples, fh)
    with open(tmp_path / "p.csv", "w") as fh:
        write_power_csv(power, fh)
    assert parse_utilization_csv(tmp_path / "u.csv") == samples
    assert parse_power_csv(tmp_path / "p.csv") == power


def test_derive_features_disk_rate():
    f = derive_features(util(0), util(1, rd=4096))
    assert f.udisk == 4096
    assert f.unet == 0


def test_derive_features_identical_counters():
    f = derive_features(util(0, rx=5, rd=7), util(3, rx=5, rd=7))
    assert (f.udisk, f.unet) == (0, 0)


def test_derive_features_passes_cpu_and_mem_through():
    f = derive_features(util(0), util(2, cpu=250.0, rx=100, tx=100))
    assert f == FeatureVector(250.0, 50.0, 0.0, 100.0)


def test_derive_features_regression():
    with pytest.raises(CounterRegression):
        derive_features(util(0, rx=1000), util(1, rx=500))


def test_join_exact_match():
    records, dropped = join_by_timestamp([util(4), util(5)], [PowerSample(5, 40.0)])
    assert len(records) == 1 and dropped == 0
    assert records[0].server_power == 40.0


def test_join_no_match_drops():
    records, dropped = join_by_timestamp([util(4), util(5)], [PowerSample(6, 40.0)])
    assert records == [] and dropped == 1


def test_match_power_tie_goes_earlier():
    power = [PowerSample(5, 50.0), PowerSample(7, 70.0)]
    # t=5 is exact; t=6 is 1 s from both 5 and 7, the earlier wins
    assert match_power(5, power, 1) == 50.0
    assert match_power(6, power, 1) == 50.0
    assert match_power(7, power, 1) == 70.0
    assert match_power(9, power, 1) is None


def test_join_tolerance_example():
    records, dropped = join_by_timestamp([util(4), util(5), util(6)], [PowerSample(5, 50.0), PowerSample(7, 70.0)], 1)
    assert [(r.timestamp, r.server_power) for r in records] == [(5, 50.0), (6, 50.0)]
    assert dropped == 0


def test_join_averages_duplicate_meter_rows():
    records, _ = join_by_timestamp([util(0), util(1)], [PowerSample(1, 40.0), PowerSample(1, 42.0)])
    assert records[0].server_power == 41.0


def _brute_equi_join(utils, power):
    out = []
    watts = {}
    for p in power:
        watts.setdefault(p.timestamp, []).append(p.watts)
    by_c = {}
    for s in utils:
        by_c.setdefault(s.container_id, []).append(s)
    for cid, ss in by_c.items():
        ss = sorted(ss, key=lambda s: s.timestamp)
        for i in range(1, len(ss)):
            t = ss[i].timestamp
            if t in watts:
                w = watts[t]
                out.append((t, cid, sum(w) / len(w)))
    return sorted(out)


util_tables = st.lists(
    st.tuples(st.sampled_from(["a", "b", "c"]), st.integers(0, 30)), max_size=60, unique=True
).map(lambda rows: [util(t, cid, rx=t * 10) for cid, t in rows])
power_tables = st.lists(st.tuples(st.integers(0, 30), st.floats(1, 100)), max_size=40).map(
    lambda rows: [PowerSample(t, w) for t, w in rows]
)


@settings(max_examples=200, deadline=None)
@given(util_tables, power_tables)
def test_join_matches_brute_force(utils, power):
    records, dropped = join_by_timestamp(utils, power, 0)
    got = sorted((r.timestamp, r.container_id, r.server_power) for r in records)
    want = _brute_equi_join(utils, power)
    assert [(t, c) for t, c, _ in got] == [(t, c) for t, c, _ in want]
    assert all(abs(g[2] - w[2]) < 1e-9 for g, w in zip(got, want))
    with_pred = len(utils) - len({s.container_id for s in utils})
    assert len(records) + dropped == with_pred


@settings(max_examples=100, deadline=None)
@given(util_tables, power_tables, st.integers(0, 3), st.randoms())
def test_join_invariant_to_row_order(utils, power, tol, rnd):
    a, _ = join_by_timestamp(utils, power, tol)
    u2, p2 = list(utils), list(power)
    rnd.shuffle(u2)
    rnd.shuffle(p2)
    b, _ = join_by_timestamp(u2, p2, tol)
    assert Counter(a) == Counter(b)
