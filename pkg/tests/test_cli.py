"""Command-line interface: experiment round trips, determinism, exit codes."""

import json

import pytest
from click.testing import CliRunner

from omcache.cli import list_experiments, main


@pytest.fixture()
def runner():
    return CliRunner()


def test_list_experiments(runner):
    res = runner.invoke(main, ["list"])
    assert res.exit_code == 0
    for name in ("cool", "herald-tradeoff", "retrieval", "schedule",
                 "total-fidelity", "min-g0", "lifetimes", "bell", "bleed",
                 "asymptotic", "rounds-to-ghz"):
        assert name in res.output
    assert len(list_experiments()) >= 11


def test_cool_roundtrip(runner, tmp_path):
    res = runner.invoke(main, ["run", "cool", "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    csv_path = tmp_path / "cool.csv"
    meta_path = tmp_path / "cool.meta.json"
    assert csv_path.exists() and meta_path.exists()
    meta = json.loads(meta_path.read_text())
    text = csv_path.read_text()
    assert text.endswith("\n")
    lines = text.splitlines()
    assert lines[0].split(",")[0] == "time_ns"
    assert set(lines[0].split(",")) == set(meta["columns"])
    assert len(lines) - 1 == meta["rows"] == 241
    # floats are written with shortest round-trip repr
    cell = lines[5].split(",")[1]
    assert repr(float(cell)) == cell
    assert meta["experiment"] == "cool"
    assert meta["preset"] == "target"
    assert meta["seed"] == 12345
    assert meta["parameters"]["n_th"] == pytest.approx(3.6873015087002634)
    assert "wall_time_s" in meta


def test_lifetimes_roundtrip(runner, tmp_path):
    res = runner.invoke(main, ["run", "lifetimes", "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    lines = (tmp_path / "lifetimes.csv").read_text().splitlines()
    header = lines[0].split(",")
    assert header[0] == "n_th" and "tau_leak_ms" in header
    assert len(lines) == 6  # five n_th rows


def test_deterministic_output(runner, tmp_path):
    a, b, c, d = (tmp_path / s for s in ("a", "b", "c", "d"))
    for out in (a, b):
        res = runner.invoke(main, ["run", "herald-tradeoff", "--out", str(out)])
        assert res.exit_code == 0, res.output
    assert (a / "herald-tradeoff.csv").read_bytes() == (
        b / "herald-tradeoff.csv"
    ).read_bytes()
    # a seeded Monte Carlo experiment: same seed identical, new seed differs
    for out, seed in ((c, "7"), (d, "7")):
        res = runner.invoke(
            main,
            ["run", "schedule", "--out", str(out), "--seed", seed,
             "--trials", "2000"],
        )
        assert res.exit_code == 0, res.output
    assert (c / "schedule.csv").read_bytes() == (d / "schedule.csv").read_bytes()
    res = runner.invoke(
        main,
        ["run", "schedule", "--out", str(tmp_path), "--seed", "8",
         "--trials", "2000"],
    )
    assert res.exit_code == 0
    assert (tmp_path / "schedule.csv").read_bytes() != (
        c / "schedule.csv"
    ).read_bytes()


def test_unknown_experiment_suggests(runner, tmp_path):
    res = runner.invoke(main, ["run", "colo", "--out", str(tmp_path)])
    assert res.exit_code == 2
    assert "cool" in res.stderr


def test_bad_override_key(runner, tmp_path):
    res = runner.invoke(
        main, ["run", "cool", "--out", str(tmp_path), "--set", "not_a_knob=1"]
    )
    assert res.exit_code == 2
    assert "known keys" in res.stderr


def test_bad_preset_name(runner, tmp_path):
    res = runner.invoke(
        main, ["run", "cool", "--out", str(tmp_path), "--preset", "nope"]
    )
    assert res.exit_code == 2
    assert "bundled presets" in res.stderr


def test_bad_seed(runner, tmp_path):
    res = runner.invoke(
        main, ["run", "cool", "--out", str(tmp_path), "--seed", "-3"]
    )
    assert res.exit_code == 2


def test_infeasible_exits_3(runner, tmp_path):
    # coupling a million times too weak: every operating point trips the
    # dark-count or weak-coupling constraints, no row survives
    res = runner.invoke(
        main,
        ["run", "total-fidelity", "--out", str(tmp_path),
         "--set", "g0_over_2pi_hz=1e-3"],
    )
    assert res.exit_code == 3
    assert "infeasible" in res.stderr.lower()


def test_unreachable_target_exits_3(runner, tmp_path):
    res = runner.invoke(
        main,
        ["run", "min-g0", "--out", str(tmp_path),
         "--target-fidelity", "0.999999"],
    )
    assert res.exit_code == 3
    assert "target" in res.stderr


@pytest.mark.filterwarnings("ignore::omcache.errors.WeakCouplingViolation")
def test_overrides_and_bath_flag_reach_meta(runner, tmp_path):
    # 2 mW sits above the weak-coupling threshold: the warning is expected
    res = runner.invoke(
        main,
        ["run", "cool", "--out", str(tmp_path),
         "--set", "drives.cool.power_w=2e-3", "--Tb", "0.04"],
    )
    assert res.exit_code == 0, res.output
    meta = json.loads((tmp_path / "cool.meta.json").read_text())
    assert meta["parameters"]["drives"]["cool"]["power"] == pytest.approx(2e-3)
    assert meta["parameters"]["system"]["bath_temperature"] == pytest.approx(0.04)
    assert meta["parameters"]["n_th"] == pytest.approx(6.155888095973019e-6, rel=1e-6)
    assert "drives.cool.power_w=2e-3" in meta["overrides"]
