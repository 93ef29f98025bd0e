import json

import numpy as np
import pytest

from swlp import cli
from swlp.cli import main
from swlp.io import (ConfigError, RunManifest, Snapshot, SnapshotError, build_manifest, difference_norms,
                     read_config, read_snapshot, read_step_records, snapshot_name, write_snapshot)
from swlp.mesh_state import FlowState, Grid1D, PositivityError
from swlp.scenarios import build_scenario


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_list_scenarios(capsys):
    code, out, _ = run_cli(capsys, "list-scenarios")
    assert code == 0 and "dam_break" in out and "nonunique_riemann" in out


def test_run_dam_break_imex_loc(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "run", "--scenario", "dam_break", "--scheme", "imex-loc", "--t-end", "50",
                           "--out", str(tmp_path))
    assert code == 0
    snap = read_snapshot(tmp_path / snapshot_name(50.0))
    assert snap.data.shape == (1500, 6) and snap.t == 50.0
    assert np.all(np.isfinite(snap.data))
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["final_time"] == 50.0 and summary["scheme"] == "imex-loc"
    rows, ok = read_step_records(tmp_path / "steps.csv")
    assert ok and len(rows) == summary["steps"]
    assert rows[-1]["t"] == 50.0


def test_run_nonunique_echoes_gravity(tmp_path, capsys):
    code, _, _ = run_cli(capsys, "run", "--scenario", "nonunique_riemann", "--scheme", "exex-loc",
                         "--out", str(tmp_path))
    assert code == 0
    snap = read_snapshot(tmp_path / snapshot_name(0.1))
    assert snap.data.shape[0] == 300
    assert json.loads(snap.header["g"]) == 2.0


def test_t_end_zero_gives_initial_data(tmp_path, capsys):
    code, _, _ = run_cli(capsys, "run", "--scenario", "dam_break", "--t-end", "0", "--out", str(tmp_path))
    assert code == 0
    snap = read_snapshot(tmp_path / snapshot_name(0.0))
    grid, state = build_scenario("dam_break").initial_state()
    np.testing.assert_array_equal(snap.column("h"), state.h)
    np.testing.assert_array_equal(snap.column("z"), grid.z)


def test_snapshot_roundtrip_exact(tmp_path, rng):
    n = 37
    grid = Grid1D(-1.3, 2.9, n, rng.normal(size=n))
    state = FlowState(rng.uniform(0.1, 5, n), rng.normal(size=n), time=0.123456789012345)
    path = tmp_path / "s.csv"
    write_snapshot(path, state, grid, {"scheme": "exex-loc"})
    snap = read_snapshot(path)
    back, gback = snap.state(), snap.grid()
    assert back.h.tobytes() == state.h.tobytes() and back.hu.tobytes() == state.hu.tobytes()
    assert gback.z.tobytes() == grid.z.tobytes()
    assert back.time == state.time and (gback.x_min, gback.x_max) == (grid.x_min, grid.x_max)


def test_snapshot_rejects_bad_files(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("# t = 0\n1,2,3\n")
    with pytest.raises(SnapshotError):
        read_snapshot(bad)
    bad.write_text("# t = 0\nFAILED,boom\n")
    with pytest.raises(SnapshotError):
        read_snapshot(bad)


def test_output_byte_deterministic(tmp_path, capsys):
    args = ["run", "--scenario", "perturbation", "--scheme", "imex-glob", "--t-end", "0.02", "--cells", "200",
            "--snapshot-times", "0.01"]
    for sub in ("a", "b"):
        assert run_cli(capsys, *args, "--out", str(tmp_path / sub))[0] == 0
    for name in (snapshot_name(0.01), snapshot_name(0.02), "steps.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_compare_identical_runs_is_zero(tmp_path, capsys):
    args = ["run", "--scenario", "nonunique_riemann", "--t-end", "0.01"]
    run_cli(capsys, *args, "--out", str(tmp_path / "a"))
    run_cli(capsys, *args, "--out", str(tmp_path / "b"))
    f = snapshot_name(0.01)
    code, out, _ = run_cli(capsys, "compare", str(tmp_path / "a" / f), str(tmp_path / "b" / f))
    assert code == 0 and "L1=0.000000e+00" in out
    norms = difference_norms(read_snapshot(tmp_path / "a" / f), read_snapshot(tmp_path / "b" / f))
    assert all(norms[c]["l1"] == 0 and norms[c]["linf"] == 0 for c in ("h", "u", "h+z"))


def test_difference_norms_refinement(tmp_path):
    def snap(n, fn):
        g = Grid1D(0.0, 1.0, n, np.zeros(n))
        x = g.cell_centers
        return Snapshot({"t": "0", "x_min": "0", "x_max": "1"},
                        np.column_stack([x, 0 * x, fn(x), 0 * x, 0 * x, fn(x)]))

    coarse = snap(10, lambda x: 1 + x)
    fine = snap(40, lambda x: 1 + x)
    # cell averages of a linear function equal the centre value
    assert difference_norms(coarse, fine)["h"]["linf"] < 1e-15
    assert difference_norms(coarse, fine)["ratio"] == 4
    with pytest.raises(ConfigError):
        difference_norms(coarse, snap(15, lambda x: x))


def test_compare_runs_refinement_decreases(capsys):
    def l1(cells_b):
        code, out, _ = run_cli(capsys, "compare", "--scenario", "perturbation", "--scheme", "exex-loc",
                               "--cells", str(cells_b // 2), "--cells-b", str(cells_b), "--t-end", "0.1",
                               "--norm", "l1")
        assert code == 0
        line = [ln for ln in out.splitlines() if ln.strip().startswith("h:")][0]
        return float(line.split("L1=")[1].split()[0])

    assert l1(1000) < l1(500)


def test_exit_codes(tmp_path, capsys, monkeypatch):
    assert run_cli(capsys, "run", "--scheme", "rk4")[0] == 2
    assert run_cli(capsys, "run", "--scenario", "dam_break", "--kappa", "0.9", "--out", str(tmp_path))[0] == 2
    assert run_cli(capsys, "run", "--scenario", "dam_break", "--scheme", "exex-loc", "--audit", "entropy",
                   "--out", str(tmp_path))[0] == 2
    assert run_cli(capsys, "run", "--audit", "nonsense")[0] == 2

    def boom(*args, **kwargs):
        raise PositivityError(3, -1e-3)

    monkeypatch.setattr(cli, "run_to", boom)
    code, _, err = run_cli(capsys, "run", "--scenario", "dam_break", "--out", str(tmp_path / "f"))
    assert code == 3 and "PositivityError" in err
    rows, ok = read_step_records(tmp_path / "f" / "steps.csv")
    assert not ok and rows == []
    assert json.loads((tmp_path / "f" / "summary.json").read_text())["status"] == "failed"


def test_audit_exit_status(capsys):
    code, out, _ = run_cli(capsys, "audit", "--scenario", "lake_at_rest", "--scheme", "imex-glob", "--t-end", "0.05")
    assert code == 0
    for name in ("entropy", "wb", "conservation", "whitham"):
        assert f"audit {name}: PASS" in out
    # a failing audit maps to exit 4
    real = cli.execute

    def failing(manifest, write_files=True):
        s = real(manifest, write_files)
        s["audits"]["wb"]["ok"] = False
        return s

    cli.execute, saved = failing, cli.execute
    try:
        assert run_cli(capsys, "audit", "--scenario", "lake_at_rest", "--t-end", "0.01")[0] == 4
    finally:
        cli.execute = saved


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# dam break quick look\nscenario = dam_break\nscheme = exex-glob\ncells = 150\n"
                   "t-end = 2.5  # short\ndt_limit_factor = none\nsnapshot_times = 1, 2\n")
    values = read_config(cfg)
    assert values["t_end"] == 2.5 and values["dt_limit_factor"] is None and values["snapshot_times"] == [1.0, 2.0]
    m = build_manifest(values, {"cells": 300, "scheme": None})
    assert m.cells == 300 and m.scheme == "exex-glob" and m.dt_limit_set
    code, _, _ = run_cli(capsys, "run", "--config", str(cfg), "--cells", "300", "--out", str(tmp_path / "o"))
    assert code == 0
    snap = read_snapshot(tmp_path / "o" / snapshot_name(2.5))
    assert snap.data.shape[0] == 300 and json.loads(snap.header["scheme"]) == "exex-glob"
    assert (tmp_path / "o" / snapshot_name(1.0)).exists()
    cfg.write_text("bogus = 1\n")
    with pytest.raises(ConfigError):
        read_config(cfg)
    assert run_cli(capsys, "run", "--config", str(cfg))[0] == 2


def test_manifest_defaults_total():
    m = build_manifest({}, {})
    assert isinstance(m, RunManifest) and m.kappa == 1.01 and m.backend == "auto"
    assert set(m.echo()) >= {"scenario", "scheme", "cells", "cfl", "g", "t_end", "audit", "seed"}


def test_efficiency_ratio_row(capsys):
    code, out, _ = run_cli(capsys, "efficiency", "--scenario", "dam_break", "--t-end", "10", "--cells", "300")
    assert code == 0 and "ratio" in out
    ratio = float(out.split("mean dt =")[1])
    assert ratio > 1
    code, out, _ = run_cli(capsys, "efficiency", "--scenario", "lake_at_rest", "--schemes", "exex-loc",
                           "--t-end", "0.01")
    assert code == 0 and "ratio" not in out
    row = [ln for ln in out.splitlines() if ln.startswith("exex-loc")][0]
    assert np.isfinite(float(row.split()[2]))
