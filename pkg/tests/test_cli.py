import json
import subprocess
import sys

import pytest

from dagprogress.cli import main
from dagprogress.dag import DagStore, EventId, EventProto, ValidatorSet, dump_snapshot
from dagprogress.simulator import CSV_COLUMNS, csv_to_rows


def write_snapshot(path, *protos, stakes=(1, 1, 1)):
    store = DagStore(ValidatorSet(stakes))
    for p in protos:
        store.insert(p)
    path.write_text(dump_snapshot(store))
    return path


def leaf(c):
    return EventProto(EventId(c, 1))


def ev(c, seq, *others):
    return EventProto(EventId(c, seq), EventId(c, seq - 1), tuple(EventId.parse(o) for o in others))


def test_run_writes_csv(capsys):
    code = main(["run", "--nodes", "10", "--seed", "7", "--duration-ms", "10000",
                 "--timing", "rk", "--selection", "rk"])
    assert code == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == ",".join(CSV_COLUMNS)
    rows = csv_to_rows(out)
    assert len(rows) == 1 and rows[0]["seed"] == 7 and rows[0]["config_id"] == "rk-rk"


def test_run_json_to_file(tmp_path):
    out = tmp_path / "r.json"
    assert main(["run", "--nodes", "3", "--duration-ms", "500", "--format", "json", "-o", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["config"]["nodes"] == 3


def test_config_file_with_overrides(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text('nodes = 3\nseed = 11\nduration_ms = 500\nstakes = "equal"\n')
    assert main(["run", "--config", str(cfg), "--seed", "12"]) == 0
    assert csv_to_rows(capsys.readouterr().out)[0]["seed"] == 12


def test_missing_config_exits_2(tmp_path, capsys):
    missing = tmp_path / "nowhere.toml"
    assert main(["run", "--config", str(missing)]) == 2
    assert str(missing) in capsys.readouterr().err


def test_unknown_config_key_exits_2(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text("speed = 3\n")
    assert main(["run", "--config", str(cfg)]) == 2
    assert "speed" in capsys.readouterr().err


def test_bad_latency_file_exits_3(tmp_path, capsys):
    bad = tmp_path / "lat.csv"
    bad.write_text("city_a,city_b,latency_ms\nA,B,1\nB,C,2\n")
    assert main(["run", "--nodes", "3", "--latency", "csv", "--latency-csv", str(bad)]) == 3
    assert "A-C" in capsys.readouterr().err


def test_sweep_counts(capsys):
    code = main(["sweep", "--combos", "qi-qi,qi-rk,rk-qi,rk-rk", "--reps", "2",
                 "--nodes", "4", "--duration-ms", "1000"])
    assert code == 0
    rows = csv_to_rows(capsys.readouterr().out)
    assert sum(r["kind"] == "run" for r in rows) == 8
    assert [r["config_id"] for r in rows if r["kind"] == "summary"] == ["qi-qi", "qi-rk", "rk-qi", "rk-rk"]


def test_sweep_rejects_bad_combo(capsys):
    assert main(["sweep", "--combos", "rk-xx"]) == 2


def test_dump_then_explain(tmp_path, capsys):
    snap = tmp_path / "dag.txt"
    assert main(["dump-dag", "--nodes", "3", "--stakes", "equal", "--duration-ms", "300",
                 "--node", "1", "-o", str(snap)]) == 0
    assert snap.read_text().startswith("# stakes 1 1 1\n")
    assert main(["explain-event", str(snap), "0:1"]) == 0
    assert "k = 1/9" in capsys.readouterr().out


def test_explain_leaf_prints_one_ninth(tmp_path, capsys):
    snap = write_snapshot(tmp_path / "s.txt", leaf(0), leaf(1), leaf(2))
    assert main(["explain-event", str(snap), "0:1"]) == 0
    out = capsys.readouterr().out
    assert "k = 1/9" in out


def test_explain_second_frame_shows_previous_progress(tmp_path, capsys):
    snap = write_snapshot(tmp_path / "s.txt", leaf(0), leaf(1), leaf(2),
                          ev(0, 2, "1:1", "2:1"), ev(1, 2, "0:1", "2:1"), ev(2, 2, "0:1", "1:1"),
                          ev(0, 3, "1:2", "2:2"))
    assert main(["explain-event", str(snap), "0:3", "--format", "json"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert (d["frame"], d["is_root"]) == (2, True)
    assert d["previous_frame_progress"]["k"] == "1/1"
    assert d["progress"]["k"] == "1/9"


def test_explain_unknown_event_exits_4(tmp_path, capsys):
    snap = write_snapshot(tmp_path / "s.txt", leaf(0))
    assert main(["explain-event", str(snap), "2:9"]) == 4
    assert main(["explain-event", str(snap), "garbage"]) == 4


def test_explain_corrupt_snapshot_exits_3(tmp_path):
    snap = tmp_path / "s.txt"
    snap.write_text("0:1 0 1 - 9 1\n")
    assert main(["explain-event", str(snap), "0:1"]) == 3


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "dagprogress", "run", "--nodes", "3",
                           "--duration-ms", "300"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.startswith("kind,config_id")


@pytest.mark.parametrize("argv", [[], ["frobnicate"]])
def test_usage_errors(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 2
