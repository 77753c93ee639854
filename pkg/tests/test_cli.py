import csv
import json
import subprocess
import sys

import pytest

from hyperwalk.cli import PERIOD_HEADER, run


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_walk_zero_field_rows_identical(tmp_path):
    out = tmp_path / "w.csv"
    assert run(["walk", "--field", "zero", "--steps", "50", "--stride", "1", "--amplitude", "0.3", "-o", str(out)]) == 0
    rows = read_csv(out)
    assert list(rows[0]) == ["n", "t", "re", "im"]
    assert len(rows) == 51
    assert {(r["re"], r["im"]) for r in rows} == {(rows[0]["re"], rows[0]["im"])}


def test_walk_seventeen_digits(tmp_path):
    out = tmp_path / "w.csv"
    run(["walk", "--field", "E", "--lambda", "0.001", "--steps", "3", "--stride", "1", "-o", str(out)])
    rows = read_csv(out)
    assert float(rows[3]["t"]) == 3 * 0.001
    assert rows[1]["im"] == f"{-0.001 * 0.1:.17g}"


def test_walk_json(tmp_path):
    out = tmp_path / "w.json"
    assert run(["walk", "--field", "H", "--steps", "10", "--format", "json", "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["samples"][-1]["n"] == 10


def test_compare_lambda_sweep(tmp_path):
    out = tmp_path / "cmp.csv"
    code = run(["compare", "--pair", "E-H", "--lambdas", "1e-2,1e-3,1e-4", "--amplitude", "0.1",
                "--t-final", "10", "-o", str(out)])
    assert code == 0
    rows = read_csv(out)
    assert [float(r["scale"]) for r in rows] == [1e-2, 1e-3, 1e-4]
    assert all(int(r["violations"]) == 0 for r in rows)
    summary = json.loads(out.with_suffix(".json").read_text())
    assert summary["verdict"] == "adequal_trend"
    assert summary["exponent"] == pytest.approx(1.0, abs=0.2)
    assert {"scale", "sup_abs", "sup_rel"} <= set(summary["rows"][0])


def test_compare_amplitude_sweep_json(tmp_path):
    out = tmp_path / "cmp.json"
    code = run(["compare", "--pair", "F-E", "--sweep", "amplitude", "--amplitudes", "0.2,0.1,0.05",
                "--lambda", "1e-3", "--format", "json", "-o", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["exponent"] == pytest.approx(2.0, abs=0.3)
    assert doc["gronwall_violations"] == 0


def test_period_defaults_small(tmp_path):
    out = tmp_path / "period.csv"
    code = run(["period", "--amplitudes", "0.2,0.1,0.05", "--n-periods", "3",
                "--deviation-lambdas", "1e-2,1e-3,1e-4", "-o", str(out)])
    assert code == 0
    assert out.read_text().splitlines()[0] == PERIOD_HEADER
    rows = read_csv(out)
    h = [r for r in rows if r["field"] == "H"]
    assert h and all(float(r["abs_dev"]) <= 1e-9 for r in h)
    summary = json.loads(out.with_suffix(".json").read_text())
    assert summary["fit_exponent"] == pytest.approx(2.0, abs=0.3)
    assert summary["verdict"] == "adequal_trend"


def test_series_prints_ratio(capsys):
    assert run(["series", "--Z", "1"]) == 0
    text = capsys.readouterr().out
    assert "1.0 - 0.16666666666666666*eps^2" in text
    assert "adequal to 1: False" in text  # appreciable-amplitude line


def test_series_json(tmp_path):
    out = tmp_path / "s.json"
    assert run(["series", "--format", "json", "--samples", "20", "--seed", "3", "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["pythagorean_max_residual"] <= 1e-12
    assert all(r["adequal"] for r in doc["rows"])
    assert doc["appreciable_amplitude"]["adequal"] is False


def test_gronwall_table(tmp_path):
    out = tmp_path / "g.csv"
    assert run(["gronwall", "--eta", "0", "--K", "1", "--t", "0,1,2", "-o", str(out)]) == 0
    assert [r["bound"] for r in read_csv(out)] == ["0", "0", "0"]


def test_byte_identical_reruns(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["compare", "--lambdas", "1e-2,1e-3,1e-4", "--t-final", "5"]
    run(args + ["-o", str(a)])
    run(args + ["-o", str(b)])
    assert a.read_bytes() == b.read_bytes()
    assert a.with_suffix(".json").read_bytes() == b.with_suffix(".json").read_bytes()


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# gronwall run\neta = 2\nK = 0.5\nt = 4\n")
    out = tmp_path / "g.csv"
    assert run(["gronwall", "--config", str(cfg), "--K", "0", "-o", str(out)]) == 0
    assert float(read_csv(out)[0]["bound"]) == 8.0


@pytest.mark.parametrize("argv", [
    ["walk", "--amplitude", "4.0"],
    ["walk", "--g", "-1"],
    ["compare", "--lambdas", "1e-2,-1e-3,1e-4"],
    ["period", "--amplitudes", "0.1,0.2"],
    ["period", "--n-per-period", "100,200,400"],
    ["gronwall", "--eta", "1"],
    ["nonsense"],
])
def test_invalid_config_exit_2(argv, tmp_path):
    assert run(argv + ["-o", str(tmp_path / "x")] if argv != ["nonsense"] else argv) == 2
    assert not (tmp_path / "x").exists()


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("bogus = 1\n")
    assert run(["gronwall", "--config", str(cfg)]) == 2


def test_numerical_failure_exit_3(tmp_path):
    out = tmp_path / "w.csv"
    # a mesh this coarse makes the linear walk spiral out of the domain disk
    assert run(["walk", "--field", "E", "--lambda", "1.5", "--steps", "500", "-o", str(out)]) == 3
    assert not out.exists()


def test_strict_inconclusive_exit_4(tmp_path):
    # F vs E at a fixed appreciable amplitude does not shrink with the mesh
    argv = ["compare", "--pair", "F-E", "--amplitude", "1.0", "--lambdas", "1e-2,5e-3,2.5e-3",
            "-o", str(tmp_path / "c.csv")]
    assert run(argv) == 0
    assert run(argv + ["--strict"]) == 4


def test_help_documents_units():
    proc = subprocess.run([sys.executable, "-m", "hyperwalk.cli", "period", "--help"],
                          capture_output=True, text=True, check=True)
    assert "[rad]" in proc.stdout and "[time]" in proc.stdout
