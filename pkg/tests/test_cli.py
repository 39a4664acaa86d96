import csv
import io
import math

import pytest

from rachgeo.cli import COLUMNS, main
from rachgeo.config import ConfigError, load_config

SMALL_SWEEP = """
[network]
u_tilde = 3, 12
[sweep]
theta_start_db = -10
theta_stop_db = -6
theta_step_db = 4
[optimizer]
n_max = 4
q_step = 0.1
"""


def _write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _rows(path):
    with open(path, encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_defaults_load():
    cfg = load_config()
    assert cfg.u_tilde == (3.0, 12.0, 24.0)
    assert cfg.thetas_db()[0] == -20.0 and cfg.thetas_db()[-1] == 0.0 and len(cfg.thetas_db()) == 11


def test_sample_config_matches_defaults():
    assert load_config("configs/defaults.ini") == load_config()


@pytest.mark.parametrize(
    "text",
    [
        "[nonsense]\nx = 1\n",
        "[network]\nbogus = 1\n",
        "[network]\neta = four\n",
    ],
)
def test_config_parse_errors(text):
    with pytest.raises(ConfigError):
        load_config(text=text)


@pytest.mark.parametrize(
    "text",
    [
        "[sweep]\ntheta_step_db = 0\n",
        "[sweep]\ntheta_start_db = 0\ntheta_stop_db = -4\n",
        "[network]\neta = 2\n",
        "[schemes]\nbackoff_n_slots = 2\n",
        "[schemes]\nenabled = baseline, magic\n",
    ],
)
def test_config_check_errors_exit_1(tmp_path, text, capsys):
    assert main(["analytic", "--config", _write(tmp_path, text)]) == 1
    assert "config error" in capsys.readouterr().err


def test_missing_config_file_exit_1(tmp_path):
    assert main(["analytic", "--config", str(tmp_path / "absent.ini")]) == 1


def test_analytic_csv(tmp_path):
    out = tmp_path / "a.csv"
    assert main(["analytic", "--config", _write(tmp_path, SMALL_SWEEP), "--out", str(out)]) == 0
    rows = _rows(out)
    assert list(rows[0].keys()) == list(COLUMNS)
    assert len(rows) == 3 * 2 * 2
    assert {r["status"] for r in rows} == {"ok"}
    base = [r for r in rows if r["scheme"] == "baseline" and r["u_tilde"] == "12.0" and r["theta_db"] == "-10.0"]
    assert float(base[0]["p"]) == pytest.approx(0.5655705379380831, abs=1e-12)
    ramp = [r for r in rows if r["scheme"] == "ramping"]
    assert ramp[0]["rho_dbm"] == "-90.0;-86.0;-82.0;-78.0;-74.0;-70.0"
    assert len(ramp[0]["x_vector"].split(";")) == 6


def test_analytic_baseline_is_monotone(tmp_path):
    text = "[schemes]\nenabled = baseline\n"
    out = tmp_path / "b.csv"
    assert main(["analytic", "--config", _write(tmp_path, text), "--out", str(out)]) == 0
    for u in ("3.0", "12.0", "24.0"):
        ps = [float(r["p"]) for r in _rows(out) if r["u_tilde"] == u]
        assert ps == sorted(ps)


def test_negligible_threshold_point(tmp_path):
    text = "[sweep]\ntheta_start_db = -200\ntheta_stop_db = -200\n[optimizer]\nn_max = 2\nq_step = 0.5\n"
    out = tmp_path / "c.csv"
    assert main(["analytic", "--config", _write(tmp_path, text), "--out", str(out)]) == 0
    for r in _rows(out):
        assert float(r["p"]) < 1e-12
        assert float(r["delay"]) == pytest.approx(1.0, abs=1e-12)


def test_fixed_backoff_override(tmp_path):
    out = tmp_path / "d.csv"
    argv = ["analytic", "--config", _write(tmp_path, SMALL_SWEEP + "[schemes]\nenabled = backoff\n"),
            "--backoff-n", "3", "--backoff-q", "0.5", "--out", str(out)]
    assert main(argv) == 0
    assert {(r["N"], r["q"]) for r in _rows(out)} == {("3", "0.5")}


def test_backoff_crushes_ramping_under_heavy_load(tmp_path):
    text = "[network]\nu_tilde = 24\n[sweep]\ntheta_start_db = 0\ntheta_stop_db = 0\n"
    out = tmp_path / "e.csv"
    assert main(["analytic", "--config", _write(tmp_path, text), "--out", str(out), "--jobs", "3"]) == 0
    d = {r["scheme"]: float(r["delay"]) for r in _rows(out)}
    assert d["backoff"] <= 0.05 * d["ramping"]


def test_nonconvergence_exit_2(tmp_path):
    text = SMALL_SWEEP + "[schemes]\nenabled = ramping\n[solver]\nmax_iter = 2\n"
    assert main(["analytic", "--config", _write(tmp_path, text), "--out", str(tmp_path / "f.csv")]) == 2


def test_nonconvergence_threshold(tmp_path):
    text = SMALL_SWEEP + "[schemes]\nenabled = ramping\n[solver]\nmax_iter = 2\nmax_nonconverged_fraction = 1\n"
    assert main(["analytic", "--config", _write(tmp_path, text), "--out", str(tmp_path / "f.csv")]) == 0


def test_table1_cli(tmp_path):
    text = "[optimizer]\nn_max = 8\n"
    out = tmp_path / "t.csv"
    assert main(["table1", "--config", _write(tmp_path, text), "--out", str(out), "--jobs", "4"]) == 0
    cells = {(float(r["u_tilde"]), float(r["theta_db"])): (int(r["N"]), float(r["q"])) for r in _rows(out)}
    assert len(cells) == 9
    assert cells[(3.0, -10.0)] == (0, 1.0)
    assert cells[(12.0, -2.0)] == (2, 0.91)
    assert cells[(24.0, -6.0)] == (2, 0.87)
    assert cells[(24.0, -2.0)] == (6, 0.69)


def test_optimize_surface(tmp_path):
    text = "[network]\nu_tilde = 12\n[sweep]\ntheta_start_db = -2\ntheta_stop_db = -2\n[optimizer]\nn_max = 3\nq_step = 0.25\n"
    out = tmp_path / "o.csv"
    assert main(["optimize", "--config", _write(tmp_path, text), "--surface", "--out", str(out)]) == 0
    rows = _rows(out)
    assert rows[0]["status"] == "optimum"
    assert sum(r["status"] == "grid" for r in rows) == 4 * 4


SIM = """
[network]
u_tilde = 3
[schemes]
enabled = baseline, backoff
backoff_n_slots = 1
backoff_q = 0.5
[sweep]
theta_start_db = -10
theta_stop_db = -10
[simulation]
region_side = 4
slots = 150
realizations = 2
"""


def test_simulate_byte_identical(tmp_path):
    path = _write(tmp_path, SIM)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["simulate", "--config", path, "--out", str(a), "--seed", "5"]) == 0
    assert main(["simulate", "--config", path, "--out", str(b), "--seed", "5", "--jobs", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = _rows(a)
    assert {r["source"] for r in rows} == {"sim"}
    assert all(float(r["ci_halfwidth"]) > 0 for r in rows)


def test_simulate_seed_changes_output(tmp_path):
    path = _write(tmp_path, SIM)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["simulate", "--config", path, "--out", str(a), "--seed", "1"])
    main(["simulate", "--config", path, "--out", str(b), "--seed", "2"])
    assert a.read_bytes() != b.read_bytes()


def test_validate_noise_only_passes(tmp_path, capsys):
    text = """
[network]
u_tilde = 0
[schemes]
enabled = baseline
[sweep]
theta_start_db = -4
theta_stop_db = 0
theta_step_db = 2
[simulation]
region_side = 2
slots = 2100
realizations = 4
"""
    summary = tmp_path / "s.txt"
    out = tmp_path / "v.csv"
    assert main(["validate", "--config", _write(tmp_path, text), "--out", str(out), "--summary", str(summary)]) == 0
    assert "failed: 0" in summary.read_text()
    assert "points: 3" in capsys.readouterr().err
    sims = [r for r in _rows(out) if r["source"] == "sim"]
    assert {r["status"] for r in sims} == {"pass"}


def test_validate_failure_exit_3(tmp_path):
    text = SIM + "[validation]\ntolerance = 0\nci_multiplier = 0\n"
    assert main(["validate", "--config", _write(tmp_path, text), "--out", str(tmp_path / "v.csv")]) == 3


def test_validate_ramping_has_occupancy(tmp_path):
    text = SIM.replace("baseline, backoff", "ramping") + "[validation]\ntolerance = 1\n"
    out = tmp_path / "v.csv"
    assert main(["validate", "--config", _write(tmp_path, text), "--out", str(out)]) == 0
    rows = _rows(out)
    assert [r["source"] for r in rows] == ["analytic", "sim"]
    assert all(len(r["x_vector"].split(";")) == 6 for r in rows)


def test_stdout_output(capsys):
    # fixed (N, q) keeps the full default sweep fast
    assert main(["analytic", "--config", "configs/defaults.ini", "--backoff-n", "0", "--backoff-q", "1"]) == 0
    text = capsys.readouterr().out
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == 99
    assert not any(math.isnan(float(r["p"])) for r in rows)
