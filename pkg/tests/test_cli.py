import csv
import json
import struct
import subprocess
import sys

import pytest

from abacus.cli import main
from abacus.dma import PAGE_MAGIC
from abacus.events import encode_event_log, read_log

from conftest import FIXTURES, GOLDEN, load_json
from fixture_specs import FIXTURE_NAMES

MONITOR = {"units": [{"index": 0, "type": "HIST", "attr_mode": True}, {"index": 1, "type": "TRACE"},
                     {"index": 2, "type": "LAT"}, {"index": 3, "type": "STALL"}]}


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def zero_manifest():
    return {"system": {"ncores": 2, "processes": [{"pid": 1, "program": {"ops": 0}}]},
            "monitor": MONITOR, "max_cycles": 1000}


def test_zero_op_manifest(tmp_path):
    out = tmp_path / "r.json"
    assert main(["run", "--config", write_json(tmp_path / "m.json", zero_manifest()), "--out", str(out)]) == 0
    rep = load_json(out)
    assert rep["schema_version"] == 1
    for u in rep["units"]:
        f = u["fields"] if "fields" in u else u
        for key in ("counts", "per_core"):
            if key in f:
                assert not any(f[key])
        assert f.get("count", 0) == 0 and f.get("total", 0) == 0


def test_malformed_json_is_config_error(tmp_path, capsys):
    bad = tmp_path / "m.json"
    bad.write_text("{not json")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "r.json")]) == 1
    assert "config" in capsys.readouterr().err


def test_unknown_field_names_json_path(tmp_path, capsys):
    m = zero_manifest()
    m["system"]["processes"][0]["program"]["colour"] = "red"
    assert main(["run", "--config", write_json(tmp_path / "m.json", m), "--out", str(tmp_path / "r")]) == 1
    assert "system.processes[0].program.colour" in capsys.readouterr().err


def test_unit_index_99_is_config_error(tmp_path, capsys):
    log = tmp_path / "l.ablg"
    log.write_bytes(encode_event_log([]))
    mon = write_json(tmp_path / "mon.json", {"units": [{"index": 99, "type": "HIST"}]})
    for cmd in ("oracle", "replay"):
        assert main([cmd, "--log", str(log), "--monitor", mon, "--out", str(tmp_path / "r.json")]) == 1
        assert "units[0].index" in capsys.readouterr().err


def test_missing_input_is_io_error(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "r")]) == 2
    assert main(["decode", "--page", str(tmp_path / "nope.abac"), "--out", str(tmp_path / "r")]) == 2
    assert "I/O" in capsys.readouterr().err


def test_unwritable_output_is_io_error(tmp_path):
    cfg = write_json(tmp_path / "m.json", zero_manifest())
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "missing" / "r.json")]) == 2


def test_truncated_log_is_bad_input_with_offset(tmp_path, capsys):
    data = (GOLDEN / "golden_log.ablg").read_bytes()
    cut = tmp_path / "cut.ablg"
    cut.write_bytes(data[:8 + 32 * 3 + 5])
    mon = write_json(tmp_path / "mon.json", MONITOR)
    for cmd in ("replay", "oracle"):
        assert main([cmd, "--log", str(cut), "--monitor", mon, "--out", str(tmp_path / "r.json")]) == 3
        assert "offset 104" in capsys.readouterr().err


def test_empty_log_gives_zero_report(tmp_path):
    log = tmp_path / "e.ablg"
    log.write_bytes(encode_event_log([]))
    mon = write_json(tmp_path / "mon.json", dict(MONITOR, ncores=1))
    reports = []
    for cmd in ("replay", "oracle"):
        out = tmp_path / f"{cmd}.json"
        assert main([cmd, "--log", str(log), "--monitor", mon, "--out", str(out)]) == 0
        reports.append(load_json(out))
    assert reports[0] == reports[1]
    assert reports[0]["snapshot_cycle"] == 0


def test_golden_manifest_is_byte_stable(tmp_path):
    out, log, page = tmp_path / "r.json", tmp_path / "l.ablg", tmp_path / "p.abac"
    for _ in range(2):
        assert main(["run", "--config", str(GOLDEN / "golden_manifest.json"), "--out", str(out),
                     "--emit-log", str(log), "--dump-page", str(page)]) == 0
        assert out.read_bytes() == (GOLDEN / "golden_report.json").read_bytes()
        assert log.read_bytes() == (GOLDEN / "golden_log.ablg").read_bytes()
        assert page.read_bytes() == (GOLDEN / "golden_page.abac").read_bytes()


def test_decode_examples(tmp_path, capsys):
    zero = tmp_path / "zero.abac"
    zero.write_bytes(bytes(65536))
    assert main(["decode", "--page", str(zero), "--out", str(tmp_path / "r.json")]) == 3
    assert "bad magic at offset 0" in capsys.readouterr().err
    empty = tmp_path / "empty.abac"
    empty.write_bytes(struct.pack("<IIQII", PAGE_MAGIC, 1, 37, 0, 0))
    assert main(["decode", "--page", str(empty), "--out", str(tmp_path / "e.json")]) == 0
    assert load_json(tmp_path / "e.json") == {"schema_version": 1, "snapshot_cycle": 37, "units": []}
    out = tmp_path / "g.json"
    assert main(["decode", "--page", str(GOLDEN / "golden_page.abac"), "--out", str(out)]) == 0
    assert out.read_bytes() == (GOLDEN / "golden_report.json").read_bytes()


def test_csv_export(tmp_path):
    d = tmp_path / "csv"
    assert main(["decode", "--page", str(GOLDEN / "golden_page.abac"), "--out", str(tmp_path / "r.json"),
                 "--csv", str(d)]) == 0
    names = sorted(p.name for p in d.iterdir())
    assert names == ["unit0_hist.csv", "unit0_hist_attribution.csv", "unit1_trace.csv",
                     "unit2_lat.csv", "unit2_lat_attribution.csv", "unit3_stall.csv",
                     "unit3_stall_attribution.csv"]
    rows = list(csv.reader((d / "unit0_hist.csv").open()))
    assert rows[0] == ["bucket_index", "range_lo", "range_hi", "count"]
    assert rows[1][:3] == ["0", "0", "64"] and rows[2][:3] == ["1", "64", "128"]
    rep = load_json(tmp_path / "r.json")
    hist = next(u for u in rep["units"] if u["type"] == "HIST")
    counts = hist["fields"]["counts"] if "fields" in hist else hist["counts"]
    assert [int(r[3]) for r in rows[1:]] == counts
    lat = list(csv.reader((d / "unit2_lat.csv").open()))
    assert lat[-1][2] == ""


def triangle(name, tmp_path):
    d = FIXTURES / name
    want = (d / "report.json").read_bytes()
    got = {}
    log = tmp_path / "log.ablg"
    assert main(["run", "--config", str(d / "manifest.json"), "--out", str(tmp_path / "run.json"),
                 "--emit-log", str(log)]) == 0
    got["run"] = (tmp_path / "run.json").read_bytes()
    for cmd in ("replay", "oracle"):
        out = tmp_path / f"{cmd}.json"
        assert main([cmd, "--log", str(d / "log.ablg"), "--monitor", str(d / "monitor.json"),
                     "--out", str(out)]) == 0
        got[cmd] = out.read_bytes()
    return want, got, log.read_bytes() == (d / "log.ablg").read_bytes()


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_fixture_triangle(name, tmp_path):
    want, got, same_log = triangle(name, tmp_path)
    assert same_log
    assert got == {"run": want, "replay": want, "oracle": want}


def test_fixture_logs_decode():
    for name in FIXTURE_NAMES:
        events = read_log(FIXTURES / name / "log.ablg")
        assert encode_event_log(events) == (FIXTURES / name / "log.ablg").read_bytes()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "abacus", "decode", "--page", str(GOLDEN / "golden_page.abac"),
                           "--out", str(tmp_path / "r.json")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    proc = subprocess.run([sys.executable, "-m", "abacus", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "replay" in proc.stdout
