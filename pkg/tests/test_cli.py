import csv
import json

import pytest

from powercap.cli import main
from powercap.experiments import oracle_model, three_on_one
from powercap.powermodel import load_model, save_model
from powercap.scenario import scenario_to_dict
from powercap.synth import REFERENCE, synthetic_logs
from powercap.trace import write_power_csv, write_utilization_csv


@pytest.fixture
def logs(tmp_path):
    utils, power = synthetic_logs(300, seed=4, containers=2)
    u, p = tmp_path / "utils.csv", tmp_path / "power.csv"
    with open(u, "w") as fh:
        write_utilization_csv(utils, fh)
    with open(p, "w") as fh:
        write_power_csv(power, fh)
    return u, p


def test_train_noiseless(logs, tmp_path, capsys):
    u, p = logs
    out = tmp_path / "model.json"
    assert main(["train", "--utils", str(u), "--power", str(p), "--out", str(out)]) == 0
    text = capsys.readouterr().out
    mape = float(text.split("MAPE:")[1].split("%")[0])
    assert mape < 0.1
    m = load_model(out)
    assert m.coeff_cpu == pytest.approx(REFERENCE["a"], rel=1e-6)


def test_train_gd(logs, tmp_path):
    u, p = logs
    out = tmp_path / "model.json"
    assert main(["train", "--utils", str(u), "--power", str(p), "--solver", "gd", "--out", str(out)]) == 0
    assert load_model(out).solver == "gd"


def test_train_missing_power(logs, tmp_path, capsys):
    u, _ = logs
    missing = tmp_path / "nope.csv"
    assert main(["train", "--utils", str(u), "--power", str(missing), "--out", str(tmp_path / "m.json")]) == 1
    assert str(missing) in capsys.readouterr().err


def test_train_parse_error_names_line(logs, tmp_path, capsys):
    u, p = logs
    p.write_text(p.read_text() + "17,oops\n")
    assert main(["train", "--utils", str(u), "--power", str(p), "--out", str(tmp_path / "m.json")]) == 1
    err = capsys.readouterr().err
    assert str(p) in err and "line" in err


def test_train_too_little_data(tmp_path):
    utils, power = synthetic_logs(4, seed=1)
    u, p = tmp_path / "u.csv", tmp_path / "p.csv"
    with open(u, "w") as fh:
        write_utilization_csv(utils, fh)
    with open(p, "w") as fh:
        write_power_csv(power, fh)
    assert main(["train", "--utils", str(u), "--power", str(p), "--out", str(tmp_path / "m.json")]) == 2


def _scenario(tmp_path, mode, name="sc.json", **kw):
    sc = three_on_one(mode, **kw)
    path = tmp_path / name
    path.write_text(json.dumps(scenario_to_dict(sc)))
    model = tmp_path / "oracle_model.json"
    save_model(oracle_model(sc.oracle), model)
    return path, model


def _simulate(scenario, model, out):
    return main(["simulate", "--scenario", str(scenario), "--model", str(model), "--out-dir", str(out)])


def test_simulate_none_mode(tmp_path):
    sc, model = _scenario(tmp_path, "none")
    assert _simulate(sc, model, tmp_path / "out") == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["mode"] == "none"
    assert all(v == 0 for v in report["action_counts"].values())
    for name in ("events.jsonl", "server_power.csv", "container_power.csv", "execution_time.csv"):
        assert (tmp_path / "out" / name).exists()


def test_simulate_is_byte_identical(tmp_path):
    sc, model = _scenario(tmp_path, "cap", noise=True, seed=3)
    assert _simulate(sc, model, tmp_path / "a") == 0
    assert _simulate(sc, model, tmp_path / "b") == 0
    for name in ("events.jsonl", "report.json", "server_power.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_simulate_does_not_mutate_inputs(tmp_path):
    sc, model = _scenario(tmp_path, "cap")
    before = sc.read_bytes(), model.read_bytes()
    _simulate(sc, model, tmp_path / "out")
    assert (sc.read_bytes(), model.read_bytes()) == before


def test_simulate_cap_below_static(tmp_path):
    sc, model = _scenario(tmp_path, "cap", cap=20.0, work=900.0)
    assert _simulate(sc, model, tmp_path / "out") == 0
    events = [json.loads(line) for line in (tmp_path / "out" / "events.jsonl").read_text().splitlines()]
    floors = [e for e in events if e["kind"] == "NoAction" and e["payload"].get("reason") == "core floor reached"]
    assert floors
    assert any(e["kind"] == "CoreReduced" and e["payload"]["cores"] == 1 for e in events)


def test_simulate_malformed_scenario(tmp_path, capsys):
    sc, model = _scenario(tmp_path, "cap")
    doc = json.loads(sc.read_text())
    doc["workloads"][0]["containers"][0]["cores"] = "two"
    sc.write_text(json.dumps(doc))
    assert _simulate(sc, model, tmp_path / "out") == 1
    assert "$.workloads[0].containers[0].cores" in capsys.readouterr().err


def test_simulate_non_termination(tmp_path):
    sc, model = _scenario(tmp_path, "none")
    doc = json.loads(sc.read_text())
    doc["config"]["max_ticks"] = 10
    sc.write_text(json.dumps(doc))
    assert _simulate(sc, model, tmp_path / "out") == 3


def _reports(tmp_path, modes):
    paths = []
    for mode in modes:
        sc, model = _scenario(tmp_path, mode, name=f"{mode}.json")
        out = tmp_path / mode
        assert _simulate(sc, model, out) == 0
        paths.append(out / "report.json")
    return paths


def _read(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_report_two_modes(tmp_path):
    paths = _reports(tmp_path, ["none", "cap"])
    out = tmp_path / "cmp.csv"
    assert main(["report", "--inputs", *map(str, paths), "--out", str(out)]) == 0
    rows = _read(out)
    assert rows[0] == ["metric", "id", "none", "cap"]
    times = [r for r in rows if r[0] == "execution_time"]
    assert [r[1] for r in times] == ["w1", "w2", "w3"]
    assert all(len(r) == 4 for r in times)


def test_report_column_order_follows_inputs(tmp_path):
    paths = _reports(tmp_path, ["freqscale", "none", "cap"])
    out = tmp_path / "cmp.csv"
    assert main(["report", "--inputs", *map(str, paths), "--out", str(out)]) == 0
    rows = _read(out)
    assert rows[0][2:] == ["freqscale", "none", "cap"]
    (peak,) = [r for r in rows if r[0] == "peak_power"]
    want = [json.loads(p.read_text())["peak_power"]["s1"] for p in paths]
    assert [float(v) for v in peak[2:]] == want


def test_report_rejects_different_scenarios(tmp_path):
    paths = _reports(tmp_path, ["none", "cap"])
    doc = json.loads(paths[1].read_text())
    doc["scenario"] = "something-else"
    paths[1].write_text(json.dumps(doc))
    assert main(["report", "--inputs", *map(str, paths), "--out", str(tmp_path / "cmp.csv")]) == 1


def test_report_rejects_mismatched_workloads(tmp_path):
    paths = _reports(tmp_path, ["none", "cap"])
    doc = json.loads(paths[1].read_text())
    doc["execution_time"].pop("w3")
    paths[1].write_text(json.dumps(doc))
    assert main(["report", "--inputs", *map(str, paths), "--out", str(tmp_path / "cmp.csv")]) == 1
