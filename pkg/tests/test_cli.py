import csv
import json
import math

import pytest

from ionsim import cli


def write_cfg(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def run_kind(tmp_path, kind, cfg, *extra):
    out = tmp_path / f"out_{kind}"
    code = cli.main([kind, "--config", write_cfg(tmp_path, cfg), "--out", str(out), *extra])
    return code, out


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_critical_three_ions(tmp_path):
    code, out = run_kind(tmp_path, "critical", {"params": {"N": [3, 2, 10]}})
    assert code == 0
    rows = read_csv(out / "critical.csv")
    assert rows[0][:2] == ["N", "omega_c_over_omega_z"]
    assert [r[0] for r in rows[1:]] == ["2", "3", "10"]
    assert float(rows[2][1]) == pytest.approx(math.sqrt(12 / 5), abs=1e-9)
    assert "1.549193" in (out / "critical.csv").read_text()


def test_equilibrium_single_ion(tmp_path):
    code, out = run_kind(tmp_path, "equilibrium", {"params": {"N": 1}})
    assert code == 0
    rows = read_csv(out / "equilibrium.csv")
    assert len(rows) == 2
    assert all(float(v) == 0.0 for v in rows[1][1:])


def test_rerun_is_byte_identical(tmp_path):
    cfg = {"params": {"N": 3, "rx_values": [1.6, 2.0, 3.0], "slope_fit": False}, "seed": 7}
    _, out = run_kind(tmp_path, "entropy-gaussian", cfg)
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    _, out = run_kind(tmp_path, "entropy-gaussian", cfg)
    second = {p.name: p.read_bytes() for p in out.iterdir()}
    assert first == second


@pytest.mark.parametrize(
    "cfg, key",
    [
        ({"params": {"N": "three"}}, "params.N"),
        ({"params": {"N": 3, "bogus": 1}}, "params.bogus"),
        ({"params": {}}, "params.N"),
        ({"params": {"N": 3}, "colour": "red"}, "colour"),
        ({"params": {"N": 3}, "context": {"omega_z": True}}, "context.omega_z"),
        ({"params": {"N": 3}, "context": {"freq_convention": "degrees"}}, "context.freq_convention"),
        ({"params": {"N": 3, "rx": 1.6}, "kind": "modes"}, "kind"),
    ],
)
def test_strict_validation(tmp_path, capsys, cfg, key):
    code, _ = run_kind(tmp_path, "equilibrium", cfg)
    assert code == 2
    err = capsys.readouterr().err
    assert key in err


def test_error_names_expected_type():
    with pytest.raises(cli.ConfigError, match=r"params\.N: expected int"):
        cli.resolve_config("equilibrium", {"params": {"N": 2.5}})
    with pytest.raises(cli.ConfigError, match=r"params\.rx_values\[1\]: expected number"):
        cli.resolve_config("entropy-gaussian", {"params": {"N": 3, "rx_values": [1.6, "x"]}})
    with pytest.raises(cli.ConfigError, match=r"params\.potential\.a"):
        cli.resolve_config("doublewell-spectrum", {"params": {"potential": {"source": "explicit", "b": 1.0}}})


def test_missing_or_broken_file(tmp_path):
    assert cli.main(["critical", "--config", str(tmp_path / "none.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["critical", "--config", str(bad)]) == 2


def test_manifest(tmp_path):
    cfg = {"params": {"N": 3}, "context": {"freq_convention": "cyclic"}, "seed": 3}
    code, out = run_kind(tmp_path, "modes", cfg)
    assert code == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "ok"
    assert man["config"]["params"]["rx"] is None
    assert man["config"]["context"]["freq_convention"] == "cyclic"
    assert man["config"]["seed"] == 3
    assert {"ionsim", "numpy", "scipy", "python"} <= set(man["versions"])
    assert man["tolerances"]["fewbody_residual_hbar_omega_z"] > 0
    assert man["files"] == ["modes.csv"]
    assert man["results"]["landau"]["b_J_per_m4"] > 0


def test_output_dir_precedence(tmp_path, monkeypatch):
    cfg = {"params": {"N": 2}, "output_dir": str(tmp_path / "from_cfg")}
    path = write_cfg(tmp_path, cfg)
    monkeypatch.chdir(tmp_path)
    assert cli.main(["critical", "--config", path]) == 0
    assert (tmp_path / "from_cfg" / "critical.csv").exists()
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "from_env"))
    assert cli.main(["critical", "--config", path]) == 0
    assert (tmp_path / "from_env" / "critical.csv").exists()
    assert cli.main(["critical", "--config", path, "--out", str(tmp_path / "from_flag")]) == 0
    assert (tmp_path / "from_flag" / "critical.csv").exists()


def _plot_file(path):
    lines = path.read_text().splitlines()
    header = lines[0]
    data = [[float(v) for v in line.split()] for line in lines[1:]]
    return header, data


def test_emit_plot_data(tmp_path):
    p = cli.emit_plot_data(tmp_path / "s.dat", [("r_x", "omega_z"), ("S", "bits")], [[2.0, 0.05], [1.6, 0.33]])
    header, data = _plot_file(p)
    assert header == "# r_x [omega_z]  S [bits]"
    assert [r[0] for r in data] == [1.6, 2.0]
    with pytest.raises(ValueError):
        cli.emit_plot_data(tmp_path / "e.dat", [("x", "1")], [])


def test_entropy_gaussian_outputs(tmp_path):
    cfg = {"params": {"N": 3, "rx_range": {"start": 1.6, "stop": 2.0, "points": 5}}}
    code, out = run_kind(tmp_path, "entropy-gaussian", cfg)
    assert code == 0
    header, data = _plot_file(out / "entropy_gaussian.dat")
    assert "r_x [omega_z]" in header and "S [bits]" in header
    assert len(data) == 5
    man = json.loads((out / "manifest.json").read_text())
    assert man["results"]["slope_fit"]["slope_bits_per_log2_distance"] < 0


def test_sweep_and_rabi(tmp_path):
    pot = {"source": "optimal"}
    code, out = run_kind(tmp_path, "sweep", {"params": {"potential": pot}})
    assert code == 0
    header, data = _plot_file(out / "sweep.dat")
    assert header.startswith("# rate [J m^-2 s^-1]  fidelity [1]")
    assert len(data) >= 5
    assert all(a[0] < b[0] for a, b in zip(data, data[1:]))
    code, out = run_kind(tmp_path, "rabi", {"params": {"potential": pot, "samples": 201}})
    assert code == 0
    header, data = _plot_file(out / "rabi.dat")
    assert header == "# t [s]  P_L [1]  P_R [1]"
    assert max(r[2] for r in data) > 0.99
    man = json.loads((out / "manifest.json").read_text())
    assert man["results"]["rabi"]["norm_drift"] < 1e-9


def test_doublewell_spectrum_cubic(tmp_path):
    cfg = {"params": {"potential": {"source": "optimal", "cubic": 1e-10}, "levels": 4}}
    code, out = run_kind(tmp_path, "doublewell-spectrum", cfg)
    assert code == 0
    rows = read_csv(out / "spectrum.csv")
    assert rows[0] == ["level", "energy_J", "energy_over_hbar_rad_s", "residual_relative"]
    assert len(rows) == 5
    man = json.loads((out / "manifest.json").read_text())
    assert "cubic_asymmetry" in man["results"]["potential"]


def test_solver_error_exit_code(tmp_path, capsys):
    # a cubic this strong leaves one well unable to hold a level
    cfg = {"params": {"potential": {"source": "optimal", "cubic": 3e-10}}}
    code, out = run_kind(tmp_path, "doublewell-spectrum", cfg)
    assert code == 1
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "error"
    assert man["failures"][0].startswith("doublewell: NoDoubletError")
    assert "doublewell" in capsys.readouterr().err


def test_thresholds_kind(tmp_path):
    code, out = run_kind(tmp_path, "thresholds-3d", {"params": {"N": 4}})
    assert code == 0
    rows = read_csv(out / "thresholds.csv")
    assert rows[1][0] == "lower"
    assert float(rows[1][1]) == pytest.approx(0.822, abs=0.005)


@pytest.mark.slow
def test_entropy_full_parallel_matches_serial(tmp_path):
    cfg = {"params": {"rx_values": [1.7, 1.8, 2.0], "points": 48, "marginal_rx": [2.0]}}
    code, out1 = run_kind(tmp_path, "entropy-full", cfg)
    assert code == 0
    out2 = tmp_path / "parallel"
    assert cli.main(["entropy-full", "--config", write_cfg(tmp_path, cfg), "--out", str(out2), "--jobs", "2"]) == 0
    assert (out1 / "entropy_full.csv").read_bytes() == (out2 / "entropy_full.csv").read_bytes()
    rows = read_csv(out1 / "entropy_full.csv")
    assert [float(r[0]) for r in rows[1:]] == [1.7, 1.8, 2.0]
    assert sorted(p.name for p in (out1 / "points").iterdir()) == ["point_0000.csv", "point_0001.csv", "point_0002.csv"]
    assert (out1 / "marginal_rx2.000000.csv").exists()
    man = json.loads((out1 / "manifest.json").read_text())
    assert man["results"]["max_residual_hbar_omega_z"] < 1e-6


def test_entropy_full_rejects_unsorted(tmp_path, capsys):
    code, _ = run_kind(tmp_path, "entropy-full", {"params": {"rx_values": [2.0, 1.8]}})
    assert code == 2
    assert "rx_values" in capsys.readouterr().err
