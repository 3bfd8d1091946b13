import json
import math
from pathlib import Path

import numpy as np
import polars as pl
import pytest

from qswitch.cli import EXIT_CONFIG, EXIT_DOMAIN, EXIT_OK, EXIT_STRICT, cmd_timing, main
from qswitch.config import parse_config
from qswitch.constants import CONSTANTS_ENV, PhysicalConstants
from qswitch.spacetime import CentralBody
from qswitch.timing import small_mass_duration


@pytest.fixture(autouse=True)
def no_constants_env(monkeypatch: pytest.MonkeyPatch):
    monkeypatch.delenv(CONSTANTS_ENV, raising=False)


def write_config(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "scenario.toml"
    path.write_text(text, encoding="utf-8")
    return path


def run(*args: str | Path) -> int:
    return main([str(a) for a in args])


def test_timing_earth(tmp_path: Path):
    assert run("timing", "--out", tmp_path) == EXIT_OK
    row = pl.read_csv(tmp_path / "earth_timing.csv").row(0, named=True)
    assert 8.0 <= row["dt_exp[s]"] <= 10.5
    assert row["dt_r[s]"] == pytest.approx(9.1583485624569381, rel=1e-9)
    assert 5.5e7 <= row["static_tau[s]"] <= 6.5e7
    assert row["ref_dt_exp[s]"] == 9.0
    assert row["regime"] == "near-surface"
    assert row["feasible"] is True
    assert abs(row["residual[s]"]) < 1e-12 * row["tau_star[s]"]
    assert row["relative_gap"] == pytest.approx(0.0, abs=1e-8)
    events = pl.read_csv(tmp_path / "earth_timing_events.csv")
    assert events["event"].to_list() == ["t0", "t1", "t2", "t3", "t_b_prepare", "t4"]
    assert (tmp_path / "earth_timing_feasibility.csv").exists()
    assert not (tmp_path / "earth_timing_warnings.csv").exists()


def test_timing_small_mass(tmp_path: Path):
    assert run("timing", "--preset", "small-mass", "--out", tmp_path) == EXIT_OK
    row = pl.read_csv(tmp_path / "small-mass_timing.csv").row(0, named=True)
    assert 4e-2 <= row["dt_exp[s]"] <= 5.5e-2
    assert row["dt_r[s]"] == pytest.approx(small_mass_duration(CentralBody.small_mass(), 1e-15), rel=1e-6)
    assert row["ref_dt_exp[s]"] == 5e-2
    assert row["regime"] == "small-mass"
    assert "feasible" not in row


def test_timing_prints_written_paths(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    assert run("timing", "--out", tmp_path, "-q") == EXIT_OK
    printed = capsys.readouterr().out.split()
    assert str(tmp_path / "earth_timing.csv") in printed


@pytest.mark.parametrize(
    ("command", "text"),
    [
        ("timing", ""),
        ("switch", "[model]\nc1A = [0.8, 0.1]\ndelta_A = 0.3\n"),
        ("trigger", "[trigger]\nnumeric = true\nsamples = 11\n"),
        ("sweep", "[sweep]\nparameter = 'h'\nmin = 0.5\nmax = 5.0\ncount = 3\nscale = 'log'\nparameter2 = 'd'\nmin2 = 1e-7\nmax2 = 1e-6\ncount2 = 3\n"),
        ("sweep", "[sweep]\ntarget = 'switch'\nparameter = 'c1A'\nmin = 0.0\nmax = 1.0\ncount = 3\nparameter2 = 'f_BA'\nmin2 = 0.5\nmax2 = 1.0\ncount2 = 2\n"),
    ],
)
def test_output_is_deterministic(tmp_path: Path, command: str, text: str):
    config = write_config(tmp_path, text)
    assert run(command, "--config", config, "--out", tmp_path / "a") == EXIT_OK
    assert run(command, "--config", config, "--out", tmp_path / "b") == EXIT_OK
    first = sorted((tmp_path / "a").iterdir())
    second = sorted((tmp_path / "b").iterdir())
    assert [p.name for p in first] == [p.name for p in second]
    for a, b in zip(first, second, strict=True):
        assert a.read_bytes() == b.read_bytes()


def test_json_format(tmp_path: Path):
    assert run("timing", "--out", tmp_path, "--format", "json") == EXIT_OK
    rows = json.loads((tmp_path / "earth_timing.json").read_text(encoding="utf-8"))
    csv = pl.read_csv(_write_csv(tmp_path)).row(0, named=True)
    assert len(rows) == 1
    assert set(rows[0]) == set(csv)
    assert rows[0]["dt_r[s]"] == csv["dt_r[s]"]


def _write_csv(tmp_path: Path) -> Path:
    assert run("timing", "--out", tmp_path / "csv") == EXIT_OK
    return tmp_path / "csv" / "earth_timing.csv"


def test_config_error_exit_code(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    config = write_config(tmp_path, "[protocol]\nheight = 1.0\n")
    assert run("timing", "--config", config, "--out", tmp_path) == EXIT_CONFIG
    assert "line 2" in capsys.readouterr().err


def test_domain_error_exit_code(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    config = write_config(tmp_path, "[protocol]\nh = -1.0\n")
    assert run("timing", "--config", config, "--out", tmp_path) == EXIT_DOMAIN
    assert "height h must be positive" in capsys.readouterr().err


def test_warnings_only_fail_under_strict(tmp_path: Path):
    config = write_config(tmp_path, "[protocol]\ntrigger_window = 1e-17\n")
    assert run("timing", "--config", config, "--out", tmp_path) == EXIT_OK
    assert (tmp_path / "earth_timing_warnings.csv").exists()
    assert run("timing", "--config", config, "--out", tmp_path, "--strict") == EXIT_STRICT
    assert run("timing", "--out", tmp_path / "clean", "--strict") == EXIT_OK


def test_cmd_timing_report():
    report = cmd_timing(parse_config("[scenario]\nname = 'direct'\n", constants=PhysicalConstants()))
    assert report.command == "timing"
    assert report.headline["scenario"][0] == "direct"
    assert report.inputs["h[m]"] == 1.0
    assert report.warnings == ()


def test_switch_ideal_e1(tmp_path: Path):
    assert run("switch", "--out", tmp_path) == EXIT_OK
    table = pl.read_csv(tmp_path / "earth_switch.csv")
    switched = table.filter(pl.col("zeta") == 3)
    assert switched["probability"].to_list() == pytest.approx([1.0, 1.0])
    assert switched["p_sign"].to_list() == pytest.approx([0.5, 0.5])
    plus = switched.filter(pl.col("sign") == 1).row(0, named=True)
    minus = switched.filter(pl.col("sign") == -1).row(0, named=True)
    s = 1 / math.sqrt(2)
    assert (plus["e3.re"], plus["e5.re"]) == pytest.approx((s, s))
    assert (minus["e3.re"], minus["e5.re"]) == pytest.approx((s, -s))
    assert table.filter(pl.col("zeta") != 3)["probability"].to_list() == pytest.approx([0.0] * 6)
    target = pl.read_csv(tmp_path / "earth_switch_target_only.csv")
    assert target["probability"].to_list() == pytest.approx([0.5, 0.5])
    state = pl.read_csv(tmp_path / "earth_switch_state.csv")
    assert state.height == 2


def test_switch_e4_is_trivial(tmp_path: Path):
    config = write_config(tmp_path, "[input]\nalpha = [0, 0, 0, 1, 0]\n")
    assert run("switch", "--config", config, "--out", tmp_path) == EXIT_OK
    table = pl.read_csv(tmp_path / "earth_switch.csv")
    assert table.filter(pl.col("zeta") == 2)["probability"].to_list() == pytest.approx([1.0, 1.0])
    target = pl.read_csv(tmp_path / "earth_switch_target_only.csv").filter(pl.col("sign") == 1).row(0, named=True)
    assert target["probability"] == pytest.approx(1.0)
    assert target["e5.re"] == pytest.approx(1.0)


def test_switch_unnormalized_input(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    config = write_config(tmp_path, "[input]\nalpha = [1, 1, 0, 0, 0]\n")
    assert run("switch", "--config", config, "--out", tmp_path) == EXIT_DOMAIN
    assert "not normalized" in capsys.readouterr().err


def test_trigger_defaults_pass(tmp_path: Path):
    assert run("trigger", "--out", tmp_path) == EXIT_OK
    table = pl.read_csv(tmp_path / "earth_trigger.csv")
    assert table["mode"].to_list() == ["analytic", "numeric"]
    assert table["passed"].to_list() == [True, True]
    trajectory = pl.read_csv(tmp_path / "earth_trigger_trajectory.csv")
    assert trajectory.height == 101
    assert trajectory["P_A0"][0] == pytest.approx(1.0)
    assert trajectory["P_A1"][-1] > 0.95
    assert not (tmp_path / "earth_trigger_warnings.csv").exists()


def test_trigger_free_oscillator(tmp_path: Path):
    constants = PhysicalConstants()
    mass, omega = 1e-26, 2.0 * math.pi * 1e5
    sigma = math.sqrt(constants.hbar / (mass * omega))
    amplitude = 400.0 * sigma
    text = f"[trigger]\nwidth = {20.0 * sigma!r}\npotential = 0.0\namplitude = {amplitude!r}\nsamples = 21\n"
    assert run("trigger", "--config", write_config(tmp_path, text), "--out", tmp_path) == EXIT_OK
    trajectory = pl.read_csv(tmp_path / "earth_trigger_trajectory.csv")
    expect = amplitude * np.cos(omega * trajectory["tau[s]"].to_numpy())
    assert np.allclose(trajectory["x[m]"].to_numpy(), expect, rtol=0.0, atol=1e-6 * amplitude)
    assert np.allclose(trajectory["P_A0"].to_numpy(), 1.0)
    table = pl.read_csv(tmp_path / "earth_trigger.csv")
    assert table["passed"].to_list() == [False, False]


def test_trigger_validity_violation(tmp_path: Path):
    config = write_config(tmp_path, "[trigger]\nspread_factor = 2.0\nnumeric = false\n")
    assert run("trigger", "--config", config, "--out", tmp_path) == EXIT_OK
    warnings = pl.read_csv(tmp_path / "earth_trigger_warnings.csv")["warning"].to_list()
    assert any("Δ >> σ violated" in w for w in warnings)
    table = pl.read_csv(tmp_path / "earth_trigger.csv")
    assert table["passed"].to_list() == [False]
    assert run("trigger", "--config", config, "--out", tmp_path, "--strict") == EXIT_STRICT


def test_sweep_height_log(tmp_path: Path):
    config = write_config(tmp_path, "[sweep]\nparameter = 'h'\nmin = 100.0\nmax = 0.1\ncount = 20\nscale = 'log'\n")
    assert run("sweep", "--config", config, "--out", tmp_path) == EXIT_OK
    table = pl.read_csv(tmp_path / "earth_sweep.csv")
    assert table.height == 20
    assert np.all(np.diff(table["h"].to_numpy()) > 0.0)
    assert np.all(np.diff(table["dt_r[s]"].to_numpy()) < 0.0)


def test_sweep_separation_linear(tmp_path: Path):
    config = write_config(tmp_path, "[sweep]\nparameter = 'd'\nmin = 1e-7\nmax = 1e-6\ncount = 10\n")
    assert run("sweep", "--config", config, "--out", tmp_path) == EXIT_OK
    table = pl.read_csv(tmp_path / "earth_sweep.csv")
    ratio = table["dt_r[s]"].to_numpy() / table["d"].to_numpy()
    assert np.allclose(ratio, ratio[0], rtol=1e-12, atol=0.0)


def test_single_point_sweep_matches_timing(tmp_path: Path):
    config = write_config(tmp_path, "[sweep]\nparameter = 'h'\nmin = 1.0\nmax = 1.0\ncount = 1\n")
    assert run("sweep", "--config", config, "--out", tmp_path) == EXIT_OK
    assert run("timing", "--config", config, "--out", tmp_path) == EXIT_OK
    sweep = pl.read_csv(tmp_path / "earth_sweep.csv").drop("h")
    timing = pl.read_csv(tmp_path / "earth_timing.csv").drop("scenario")
    assert sweep.equals(timing)


def test_two_parameter_sweep_is_ordered(tmp_path: Path):
    text = "[sweep]\nparameter = 'h'\nmin = 2.0\nmax = 1.0\ncount = 2\nparameter2 = 'd'\nmin2 = 2e-7\nmax2 = 1e-7\ncount2 = 2\n"
    assert run("sweep", "--config", write_config(tmp_path, text), "--out", tmp_path) == EXIT_OK
    table = pl.read_csv(tmp_path / "earth_sweep.csv")
    assert table.select("h", "d").rows() == [(1.0, 1e-7), (1.0, 2e-7), (2.0, 1e-7), (2.0, 2e-7)]


def test_switch_sweep(tmp_path: Path):
    config = write_config(tmp_path, "[sweep]\ntarget = 'switch'\nparameter = 'c1A'\nmin = 0.0\nmax = 1.0\ncount = 5\n")
    assert run("sweep", "--config", config, "--out", tmp_path) == EXIT_OK
    table = pl.read_csv(tmp_path / "earth_sweep.csv")
    x = table["c1A"].to_numpy()
    assert np.allclose(table["P_zeta3"].to_numpy(), 0.5 + 0.5 * x**2)
    total = sum(table[f"P_zeta{z}"].to_numpy() for z in range(4))
    assert np.allclose(total, 1.0)


def test_sweep_without_section(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    assert run("sweep", "--out", tmp_path) == EXIT_CONFIG
    assert "[sweep]" in capsys.readouterr().err


def test_oversized_sweep_rejected(tmp_path: Path):
    text = "[sweep]\nparameter = 'h'\nmin = 1.0\nmax = 2.0\ncount = 1000001\n"
    assert run("sweep", "--config", write_config(tmp_path, text), "--out", tmp_path) == EXIT_CONFIG


def test_unknown_subcommand():
    with pytest.raises(SystemExit) as e:
        main(["plot"])
    assert e.value.code == EXIT_CONFIG
