import csv
import io
import json
import subprocess
import sys

import pytest

from htype.cli import fmt, main, parse_range


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_range():
    assert parse_range("2..4") == [2, 3, 4]
    assert parse_range("5") == [5]
    assert parse_range("2,5") == [2, 5]


def test_fmt_round_trips():
    x = 0.1 + 0.2
    assert float(fmt(x)) == x


def test_validate_ok(capsys):
    code, out, _ = run(["validate", "--group", "heis(1)"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["valid"] is True
    assert {"config", "seed", "version"} <= set(doc)


def test_validate_non_skew_json(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"m": 2, "m2": 1, "B": [[[1, 1], [-1, 0]]]}))
    code, out, _ = run(["validate", "--group", str(bad)], capsys)
    assert code == 1
    assert "not skew-symmetric at (q=1,i=1,j=1)" in json.loads(out)["violations"]


@pytest.mark.parametrize("group,needle", [("nope(3)", "nope"), ("/no/such/file.json", "cannot read")])
def test_bad_group_exit_2(group, needle, capsys):
    code, _, err = run(["validate", "--group", group], capsys)
    assert code == 2
    assert needle in err


def test_malformed_json_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run(["deviation", "--group", str(bad)], capsys)
    assert code == 2 and "malformed JSON" in err


def test_bad_solver_file_exit_2(tmp_path, capsys):
    f = tmp_path / "s.json"
    f.write_text(json.dumps({"restarts": 0}))
    code, _, err = run(["deviation", "--group", "free(3)", "--solver-file", str(f)], capsys)
    assert code == 2 and "solver" in err


def test_deviation_free4(capsys):
    code, out, _ = run(["deviation", "--group", "free(4)", "--restarts", "1"], capsys)
    doc = json.loads(out)
    assert code == 0
    assert doc["report"]["value"] == pytest.approx(0.70711, abs=1e-3)
    assert doc["seed"] == 0 and doc["config"]["solver"]["restarts"] == 1


def test_deviation_metric_file(tmp_path, capsys):
    f = tmp_path / "g.json"
    f.write_text(json.dumps([[1.0]]))
    code, out, _ = run(["deviation", "--group", "heis(1,2)", "--metric", str(f), "--format", "csv"],
                       capsys)
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0
    assert rows[0][0] == "value"
    assert float(rows[1][0]) == pytest.approx(18 ** 0.5 / 2)


def test_defects_csv_header(capsys):
    code, out, _ = run(["defects", "--group", "heis(1)", "--format", "csv"], capsys)
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0
    assert rows[0] == ["kind", "x1", "x2", "t1", "value"]
    assert [r[0] for r in rows[1:]] == ["eikonal", "harmonic", "scaled_harmonic"]


def test_conjecture_is_byte_identical(tmp_path):
    args = ["conjecture", "--n", "2..4", "--seed", "7", "--samples", "50", "--format", "csv"]
    outs = [subprocess.run([sys.executable, "-m", "htype", *args], capture_output=True,
                           text=True, check=True).stdout for _ in range(2)]
    assert outs[0] == outs[1]
    rows = list(csv.reader(io.StringIO(outs[0])))
    assert rows[0][:4] == ["n", "sup", "delta_sq", "ratio"]
    assert [r[0] for r in rows[1:]] == ["2", "3", "4"]
    # 17 significant digits
    assert len(rows[1][2].replace("0.", "", 1).lstrip("0")) == 17


def test_verify_fundamental_json(tmp_path, capsys):
    out = tmp_path / "v.json"
    code, _, _ = run(["verify-fundamental", "--n", "2", "--samples", "3", "-o", str(out)], capsys)
    doc = json.loads(out.read_text())
    assert code == 0 and doc["ok"] is True
    assert doc["results"]["2"]["harmonic"]["limit"] == 1e-9


def test_catalog(capsys):
    code, out, _ = run(["catalog"], capsys)
    names = [g["name"] for g in json.loads(out)["groups"]]
    assert code == 0 and "free(4)" in names


def test_usage_errors(capsys):
    assert main(["deviation"]) == 2
    assert main(["bogus"]) == 2
    assert main(["validate", "--group", "heis(1)", "--threads", "0"]) == 2
    capsys.readouterr()
