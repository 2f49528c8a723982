import csv
import io
import json
import subprocess
import sys

import pytest

from arrayqfi.cli import CSV_HEADER, SWEEP_MODELS, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_closed_spe(capsys):
    code, out, _ = run(capsys, "closed", "--model", "spe", "--n", "4", "--d", "15", "--sigma", "0.3", "--stretch", "2")
    assert code == 0
    assert out.splitlines()[0] == CSV_HEADER
    (row,) = rows(out)
    assert float(row["qfi"]) == pytest.approx(222.2222222222, rel=1e-10)
    assert row["model"] == "spe"
    mantissa = row["qfi"].split("e")[0].replace(".", "")
    assert len(mantissa) == 17


def test_closed_thermal_json(capsys):
    code, out, _ = run(capsys, "closed", "--model", "thermal", "--n", "4", "--sigma", "0.3", "--stretch", "2",
                       "--mean-photons", "1", "--format", "json")
    assert code == 0
    assert json.loads(out)["qfi"] == pytest.approx(666.6666666667, rel=1e-10)


def test_closed_single_source_inf_bound(capsys):
    code, out, _ = run(capsys, "closed", "--model", "spe", "--n", "1")
    assert code == 0
    assert rows(out)[0]["qcrb"] == "inf"


def test_repetitions_scale_bound(capsys):
    _, one, _ = run(capsys, "closed", "--n", "3")
    _, ten, _ = run(capsys, "closed", "--n", "3", "--repetitions", "10")
    assert float(rows(one)[0]["qcrb"]) == pytest.approx(10 * float(rows(ten)[0]["qcrb"]), rel=1e-15)


def test_overlap_engines_agree(capsys):
    args = ["overlap", "--n", "4", "--d", "1.2", "--sigma", "0.3", "--stretch", "2"]
    _, a, _ = run(capsys, *args, "--engine", "enumerate")
    _, b, _ = run(capsys, *args, "--engine", "permanent")
    assert float(rows(a)[0]["qfi"]) == pytest.approx(float(rows(b)[0]["qfi"]), rel=1e-10)
    assert {"term_B", "term_C", "log_perm"} <= set(rows(a)[0])


def test_overlap_far_matches_closed(capsys):
    _, out, _ = run(capsys, "overlap", "--n", "4", "--d", "2.4", "--sigma", "0.3", "--stretch", "2")
    _, closed, _ = run(capsys, "closed", "--n", "4", "--d", "2.4", "--sigma", "0.3", "--stretch", "2")
    assert float(rows(out)[0]["qfi"]) == pytest.approx(float(rows(closed)[0]["qfi"]), rel=5e-3)


def test_engine_limit_exit_3(capsys):
    code, _, err = run(capsys, "overlap", "--n", "12", "--engine", "enumerate")
    assert code == 3
    assert "EngineLimit" in err


@pytest.mark.parametrize("argv", [["closed", "--bogus"], ["closed", "--model", "nope"], [],
                                  ["sweep", "--min", "2", "--max", "1", "-o", "x.csv"]])
def test_usage_errors_exit_2(capsys, argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert run(capsys, *argv)[0] == 2


def test_domain_error_exit_3(capsys):
    code, _, err = run(capsys, "closed", "--n", "0")
    assert code == 3
    assert "n_sources" in err


def test_unwritable_output_exit_4(capsys, tmp_path):
    target = tmp_path / "missing" / "out.csv"
    assert run(capsys, "sweep", "--min", "1", "--max", "2", "--steps", "2", "-o", str(target))[0] == 4


def test_spacing_sweep_two_steps(capsys, tmp_path):
    out = tmp_path / "s.csv"
    assert run(capsys, "sweep", "--min", "1", "--max", "2", "--steps", "2", "--n", "3", "-o", str(out))[0] == 0
    data = rows(out.read_text())
    assert [float(r["param"]) for r in data] == [1.0, 2.0]
    assert b"\r" not in out.read_bytes()


def test_spacing_sweep_relative_bounds(capsys, tmp_path):
    out = tmp_path / "s.csv"
    run(capsys, "sweep", "--min", "1", "--max", "4", "--steps", "4", "--relative", "--sigma", "0.5", "-o", str(out))
    assert [float(r["param"]) for r in rows(out.read_text())] == [0.5, 1.0, 1.5, 2.0]


def test_n_sweep_long_csv_and_wide_json(capsys, tmp_path):
    csv_out, json_out = tmp_path / "n.csv", tmp_path / "n.json"
    base = ["sweep", "--variable", "n", "--min", "2", "--max", "5", "--sigma", "0.3", "--stretch", "2"]
    assert run(capsys, *base, "-o", str(csv_out))[0] == 0
    data = rows(csv_out.read_text())
    assert len(data) == 4 * len(SWEEP_MODELS)
    assert [r["model"] for r in data[:5]] == list(SWEEP_MODELS)
    assert run(capsys, *base, "-o", str(json_out), "--format", "json")[0] == 0
    points = json.loads(json_out.read_text())["points"]
    assert [p["param"] for p in points] == [2, 3, 4, 5]
    assert set(points[0]["models"]) == set(SWEEP_MODELS)


def test_sweep_workers_preserve_order_and_bytes(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    base = ["sweep", "--min", "0.1", "--max", "3", "--steps", "12", "--n", "4", "--deterministic"]
    run(capsys, *base, "-o", str(a), "--workers", "3")
    run(capsys, *base, "-o", str(b))
    assert a.read_bytes() == b.read_bytes()


def test_deterministic_reruns_byte_identical(capsys):
    outs = {run(capsys, "overlap", "--n", "5", "--d", "0.4", "--sigma", "0.3", "--deterministic",
                "--format", "json")[1] for _ in range(2)}
    assert len(outs) == 1


def test_unit_flag_only_relabels(capsys):
    _, um, _ = run(capsys, "closed", "--n", "4", "--unit", "um")
    _, nm, _ = run(capsys, "closed", "--n", "4", "--unit", "nm")
    assert um == nm


def test_config_file_and_env(capsys, tmp_path, monkeypatch):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# shared settings\nsigma = 0.3\nstretch = 2  # xi\nn = 4\nformat = json\n")
    _, out, _ = run(capsys, "closed", "--config", str(cfg))
    assert json.loads(out)["qfi"] == pytest.approx(222.2222222222, rel=1e-10)
    monkeypatch.setenv("QFI_ARRAY_CONFIG", str(cfg))
    _, out, _ = run(capsys, "closed", "--stretch", "1")
    assert json.loads(out)["qfi"] == pytest.approx(55.5555555556, rel=1e-10)


def test_config_unknown_key_is_usage_error(capsys, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert run(capsys, "closed", "--config", str(cfg))[0] == 2


def test_missing_config_is_io_error(capsys, tmp_path):
    assert run(capsys, "closed", "--config", str(tmp_path / "absent.cfg"))[0] == 4


def test_check_default_passes(capsys, tmp_path):
    report = tmp_path / "report.json"
    code, out, _ = run(capsys, "check", "--max-n", "4", "--report", str(report))
    assert code == 0
    payload = json.loads(report.read_text())
    assert payload["passed"] and not payload["failed"]
    assert all({"name", "tolerance", "deviation", "passed"} <= set(c) for c in payload["checks"])
    assert "checks passed" in out.splitlines()[-1]


def test_check_negated_fails(capsys):
    code, _, err = run(capsys, "check", "--max-n", "3", "--self-test-negate", "--format", "json")
    assert code == 1
    assert "self_test_negate" in err


@pytest.mark.parametrize("kind, extra, key, expected", [
    ("poisson", ["--r", "2"], "value", 20.0),
    ("thermal", ["--nbar", "0.5"], "value", 1.0),
    ("overlap-state", ["--n", "3", "--d", "0.8"], "value", 1.0),
])
def test_oracle_values(capsys, kind, extra, key, expected):
    code, out, _ = run(capsys, "oracle", "--kind", kind, *extra, "--format", "json")
    assert code == 0
    assert json.loads(out)[key] == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("kind", ["fidelity", "noon", "cfi", "estimator"])
def test_oracle_kinds_run(capsys, kind):
    code, out, _ = run(capsys, "oracle", "--kind", kind, "--n", "3", "--d", "1.0", "--sigma", "1.0")
    assert code == 0
    assert len(out.splitlines()) == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "arrayqfi", "closed", "--n", "2"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith(CSV_HEADER)
