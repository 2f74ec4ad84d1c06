import json
from pathlib import Path

import numpy as np
import pytest

from wavesem.cli import EXIT_CONFIG, EXIT_IO, EXIT_NUMERICAL, EXIT_OK, main
from wavesem.io import read_probe_csv, read_table, write_table

STILL = """
[domain]
length = 1.0
h = 0.2
[discretization]
n_elements = 4
n_layers = 1
order = 2
[wave]
initial = rest
[time]
steps = 20
dt = 0.01
[probes]
x = 0.25, 0.5
"""

FNPF = """
[domain]
length = 1.0
[discretization]
n_elements = 4
n_layers = 1
order = 4
[wave]
mode = FNPF
kh = 1.0
rel_steepness = 0.5
[time]
periods = 0.5
[probes]
x = 0.0, 0.5
[output]
snapshot_every = 10
write_vtk = true
"""


def _write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_still_water_run_gives_zero_probes(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", _write(tmp_path, STILL), "--out", str(out), "--quiet"]) == EXIT_OK
    for f in sorted(out.glob("probe_*.csv")):
        a = read_probe_csv(f)
        assert len(a["t"]) == 21
        assert np.all(a["eta"] == 0.0)


def test_fnpf_run_manifest_complete(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", _write(tmp_path, FNPF), "--out", str(out), "--quiet"]) == EXIT_OK
    man = json.loads((out / "manifest.json").read_text())
    for key in ("version", "config", "output_directory", "wall_time_s", "timings", "files"):
        assert key in man
    assert set(man["timings"]) == {"LaplaceSolve", "EvaluateRHS", "LaplaceUpdate"}
    for name in man["files"]:
        assert (out / name).is_file(), name
    assert any(name.endswith(".vtk") for name in man["files"])
    assert len(list(out.glob("probe_*.csv"))) == 2


def test_identical_config_gives_identical_probe_files(tmp_path):
    cfg = _write(tmp_path, FNPF)
    for d in ("a", "b"):
        assert main(["run", "--config", cfg, "--out", str(tmp_path / d), "--quiet", "--threads", "1"]) == EXIT_OK
    for fa in sorted((tmp_path / "a").glob("probe_*.csv")):
        assert fa.read_bytes() == (tmp_path / "b" / fa.name).read_bytes()


def test_negative_depth_is_validation_error(tmp_path, capsys):
    code = main(["run", "--config", _write(tmp_path, STILL.replace("h = 0.2", "h = -0.2")), "--quiet"])
    assert code == EXIT_CONFIG
    assert "domain.h" in capsys.readouterr().err


def test_missing_config_is_io_error(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.ini"), "--quiet"]) == EXIT_IO


def test_bad_arguments_exit_two():
    assert main(["frobnicate"]) == EXIT_CONFIG


def test_blow_up_exits_three_with_stage(tmp_path, capsys):
    text = FNPF.replace("periods = 0.5", "steps = 30\ndt = 5.0").replace("[output]\nsnapshot_every = 10\nwrite_vtk = true\n", "")
    code = main(["run", "--config", _write(tmp_path, text), "--out", str(tmp_path / "o"), "--quiet"])
    assert code == EXIT_NUMERICAL
    assert "numerical failure" in capsys.readouterr().err


def test_analyze_probes_and_harmonics(tmp_path):
    T = 1.0
    t = np.linspace(0, 20, 801)
    eta = 0.01 * np.sin(2 * np.pi * t / T) + 0.002
    write_table(tmp_path / "probe_00.csv", ("t", "eta", "phi_eta", "w_eta"), zip(t, eta, 0 * t, 0 * t))
    out = tmp_path / "an"
    assert main(["analyze", "probes", str(tmp_path / "probe_*.csv"), "--out", str(out), "--quiet"]) == EXIT_OK
    stats = read_table(out / "probe_stats.csv")
    assert stats["eta_m"][0] == pytest.approx(0.012, rel=1e-6)
    assert main(["analyze", "harmonics", str(tmp_path / "probe_*.csv"), "--period", "1.0", "--out", str(out),
                 "--quiet"]) == EXIT_OK
    h = read_table(out / "harmonics.csv")
    assert h["A1"][0] == pytest.approx(0.01, rel=1e-9)
    assert h["mean"][0] == pytest.approx(0.002, rel=1e-9)


def test_analyze_missing_column_named(tmp_path, capsys):
    write_table(tmp_path / "probe_00.csv", ("t", "phi_eta"), [(0.0, 1.0), (1.0, 2.0)])
    code = main(["analyze", "probes", str(tmp_path / "probe_00.csv"), "--out", str(tmp_path), "--quiet"])
    assert code == EXIT_IO
    assert "eta" in capsys.readouterr().err


def test_convergence_small_sweep(tmp_path):
    study = _write(tmp_path, "[study]\nrel_steepness = 0.1\norders = 2\nrefinements = 2\np_orders = 2, 3\n", "s.ini")
    out = tmp_path / "conv"
    assert main(["convergence", "--config", study, "--out", str(out), "--quiet"]) == EXIT_OK
    h = read_table(out / "convergence_h.csv")
    assert len(h["error"]) == 3 and np.all(np.diff(h["h_max"]) < 0)
    p = read_table(out / "convergence_p.csv")
    assert p["error"][1] < p["error"][0]
    assert main(["analyze", "convergence", str(out / "convergence_h.csv"), "--out", str(out), "--quiet"]) == EXIT_OK
    rates = read_table(out / "convergence_rates.csv")
    assert rates["rate"][-1] == pytest.approx(2.0, abs=0.4)


def test_scaling_single_thread_gamma_one(tmp_path):
    out = tmp_path / "sc"
    assert main(["scaling", "--thread-list", "1", "--nx", "8", "--nz", "1", "--p", "2", "--steps", "1",
                 "--out", str(out), "--quiet"]) == EXIT_OK
    tab = read_table(out / "scaling_strong.csv")
    assert np.all(np.asarray(tab["gamma_s"]) == 1.0)
    assert set(tab["routine"]) >= {"LaplaceSolve", "wall"}
