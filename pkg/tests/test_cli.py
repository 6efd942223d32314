import json
import subprocess
import sys

import pytest

import diststate.harness as harness
from diststate.cli import main
from diststate.errors import NumericalError


def write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_complexity_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["complexity", "--out", str(out)]) == 0
    assert (out / "complexity.csv").exists() and (out / "summary.json").exists()
    err = capsys.readouterr().err
    assert json.loads(err.strip().splitlines()[-1])["communications"]["12"] == 0


def test_tables_to_stdout_without_out(capsys):
    assert main(["complexity", "--seed", "4"]) == 0
    out = capsys.readouterr().out
    assert "# seed = 4\n" in out and "block_size,monitors" in out


def test_detect_alarm_exit_code(tmp_path):
    cfg = write(tmp_path, "buses = 30\nbranches = 45\nmonitors = 3\ntrials = 3\n"
                          "clean_snapshots = 3\nstream_length = 5\n")
    assert main(["detect", "--config", cfg, "--out", str(tmp_path / "d")]) == 1


def test_detect_no_attack_exit_zero(tmp_path):
    cfg = write(tmp_path, "buses = 30\nbranches = 45\nmonitors = 3\ntrials = 2\n"
                          "clean_snapshots = 3\nstream_length = 2\nw_max = 0\n")
    assert main(["detect", "--config", cfg]) == 0


@pytest.mark.parametrize(
    "text",
    ["kind = complexity_counts\nbogus = 1\n", "rows = many\n", "kind = detection\n"],
)
def test_config_errors_exit_2(tmp_path, capsys, text):
    assert main(["complexity", "--config", write(tmp_path, text)]) == 2
    assert capsys.readouterr().err.startswith("error:")


def test_missing_config_file_exit_2(tmp_path):
    assert main(["complexity", "--config", str(tmp_path / "absent.cfg")]) == 2


def test_solve_without_files_exit_2():
    assert main(["solve"]) == 2


def test_bad_grid_file_exit_2(tmp_path, capsys):
    grid = write(tmp_path, "buses 3\nbranch 0 1 x\n", "grid.txt")
    meas = write(tmp_path, "sigma 0.1\nmeas 0 1 1.0\n", "meas.txt")
    cfg = write(tmp_path, f"grid_file = {grid}\nmeasurement_file = {meas}\n")
    assert main(["solve", "--config", cfg]) == 2
    assert "line 2" in capsys.readouterr().err


def test_numerical_failure_exit_3(monkeypatch):
    def boom(cfg):
        raise NumericalError("singular")

    monkeypatch.setitem(harness.RUNNERS, "complexity_counts", boom)
    assert main(["complexity"]) == 3


def test_seed_override_changes_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["complexity", "--seed", "1", "--out", str(a)])
    main(["complexity", "--seed", "2", "--out", str(b)])
    assert (a / "complexity.csv").read_text() != (b / "complexity.csv").read_text()


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "diststate.cli", "complexity"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert "communications" in proc.stdout
