"""Command-line front end: ``ionsim <kind> --config file.json [--jobs N] [--out DIR]``.

A config file is a JSON object with up to four blocks::

    {
      "context": {"species": "Ca-40", "omega_z": 1e6, "freq_convention": "angular"},
      "params": {...},
      "output_dir": "results",
      "seed": 0
    }

Unknown keys are rejected.  Every run writes ``manifest.json`` with the
resolved config, library versions and tolerances, one or more CSV files
with units in their headers, and gnuplot-ready ``.dat`` files.  The
output directory is ``--out`` if given, else ``$IONSIM_OUT_DIR``, else the
config's ``output_dir``, else ``ionsim_out``.  The exit code is 0 only when
every computation met its tolerance.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import platform
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import scipy
from scipy import constants as const

from . import __version__, crystal, doublewell, fewbody, gaussian, modes, units

KINDS = (
    "equilibrium",
    "critical",
    "modes",
    "entropy-gaussian",
    "entropy-full",
    "doublewell-spectrum",
    "sweep",
    "rabi",
    "thresholds-3d",
)
OUT_ENV = "IONSIM_OUT_DIR"
DEFAULT_OUT = "ionsim_out"

REQUIRED = object()
NUM = (int, float)


class ConfigError(ValueError):
    pass


# schema ------------------------------------------------------------------------

_POTENTIAL = {
    "source": (str, "optimal"),  # optimal | detuning | explicit
    "N": (int, 3),
    "detuning": (NUM, None),  # omega_c - omega_x, in the context's frequency convention
    "a": (NUM, None),  # J/m^2
    "b": (NUM, None),  # J/m^4
    "cubic": (NUM, 0.0),  # J/m^3
}

_RANGE = {"start": (NUM, REQUIRED), "stop": (NUM, REQUIRED), "points": (int, REQUIRED)}

SCHEMAS = {
    "equilibrium": {"N": (int, REQUIRED), "rx": (NUM, None), "ry": (NUM, None), "dim": (int, 1)},
    "critical": {"N": ((int, list), REQUIRED)},
    "modes": {"N": (int, REQUIRED), "rx": (NUM, None)},
    "entropy-gaussian": {
        "N": (int, REQUIRED),
        "rx_values": (list, None),
        "rx_range": (dict, None),
        "slope_fit": (bool, True),
        "d_min": (NUM, 1e-4),
        "d_max": (NUM, 1e-2),
        "fit_points": (int, 21),
    },
    "entropy-full": {
        "rx_values": (list, None),
        "rx_range": (dict, None),
        "site": (int, 0),
        "points": (int, 64),
        "marginal_rx": (list, []),
    },
    "doublewell-spectrum": {"potential": (dict, {}), "levels": (int, 4)},
    "sweep": {
        "potential": (dict, {}),
        "rates": (list, None),  # J m^-2 s^-1
        "a_start": (NUM, None),
        "a_end": (NUM, None),
    },
    "rabi": {
        "potential": (dict, {}),
        "amplitude": (NUM, None),  # J
        "amplitude_fraction": (NUM, 0.1),  # of the tunnelling splitting, used when amplitude is absent
        "omega": (NUM, None),  # rad/s, default on resonance
        "cycles": (NUM, 2.0),
        "samples": (int, 401),
    },
    "thresholds-3d": {"N": (int, 4)},
}

TOP_LEVEL = {"context": (dict, {}), "params": (dict, {}), "output_dir": (str, None), "seed": (int, 0), "kind": (str, None)}


def _typename(t) -> str:
    if t == NUM:
        return "number"
    if isinstance(t, tuple):
        return " or ".join(x.__name__ for x in t)
    return t.__name__


def _check_type(path: str, value, t):
    types = t if isinstance(t, tuple) else (t,)
    if not isinstance(value, types) or (isinstance(value, bool) and bool not in types):
        raise ConfigError(f"{path}: expected {_typename(t)}, got {type(value).__name__}")


def _validate(block: dict, schema: dict, prefix: str) -> dict:
    if not isinstance(block, dict):
        raise ConfigError(f"{prefix}: expected object, got {type(block).__name__}")
    unknown = sorted(set(block) - set(schema))
    if unknown:
        raise ConfigError(f"{prefix}.{unknown[0]}: unknown key (allowed: {', '.join(sorted(schema))})")
    out = {}
    for key, (t, default) in schema.items():
        path = f"{prefix}.{key}" if prefix else key
        if key in block and block[key] is not None:
            _check_type(path, block[key], t)
            out[key] = block[key]
        elif default is REQUIRED:
            raise ConfigError(f"{path}: required key missing (expected {_typename(t)})")
        else:
            out[key] = default
    return out


def _numbers(path: str, values) -> list[float]:
    for i, v in enumerate(values):
        _check_type(f"{path}[{i}]", v, NUM)
    return [float(v) for v in values]


def resolve_config(kind: str, raw: dict) -> dict:
    """Validate a raw config and fill every default; raises :class:`ConfigError`."""
    if kind not in KINDS:
        raise ConfigError(f"kind: expected one of {', '.join(KINDS)}, got {kind!r}")
    top = _validate(raw, TOP_LEVEL, "")
    if top["kind"] is not None and top["kind"] != kind:
        raise ConfigError(f"kind: config says {top['kind']!r} but the command line asks for {kind!r}")
    ctx_schema = {
        "species": (str, units.DEFAULT_SPECIES),
        "omega_z": (NUM, units.MATCHED_OMEGA_Z),
        "freq_convention": (str, "angular"),
        "mass_amu": (NUM, None),
        "charge": (NUM, 1),
    }
    ctx = _validate(top["context"], ctx_schema, "context")
    if ctx["freq_convention"] not in units.FREQ_CONVENTIONS:
        raise ConfigError(f"context.freq_convention: expected one of {', '.join(units.FREQ_CONVENTIONS)}")
    params = _validate(top["params"], SCHEMAS[kind], "params")
    if "potential" in params:
        params["potential"] = _validate(params["potential"], _POTENTIAL, "params.potential")
        src = params["potential"]["source"]
        if src not in ("optimal", "detuning", "explicit"):
            raise ConfigError("params.potential.source: expected one of optimal, detuning, explicit")
        need = {"detuning": ["detuning"], "explicit": ["a", "b"]}.get(src, [])
        for key in need:
            if params["potential"][key] is None:
                raise ConfigError(f"params.potential.{key}: required for source {src!r} (expected number)")
    for key in ("rx_values", "rates", "marginal_rx"):
        if params.get(key) is not None:
            params[key] = _numbers(f"params.{key}", params[key])
    if isinstance(params.get("N"), list):
        for i, v in enumerate(params["N"]):
            _check_type(f"params.N[{i}]", v, int)
    if params.get("rx_range") is not None:
        if params.get("rx_values") is not None:
            raise ConfigError("params.rx_range: give either rx_values or rx_range, not both")
        r = _validate(params["rx_range"], _RANGE, "params.rx_range")
        params["rx_values"] = [float(v) for v in np.linspace(r["start"], r["stop"], r["points"])]
        params["rx_range"] = r
    return {"kind": kind, "context": ctx, "params": params, "output_dir": top["output_dir"], "seed": top["seed"]}


def load_config(kind: str, path) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return resolve_config(kind, raw)


def context_from(cfg: dict) -> units.PhysicalContext:
    c = cfg["context"]
    return units.make_context(
        c["species"], c["omega_z"], mass_amu=c["mass_amu"], freq_convention=c["freq_convention"], charge=c["charge"]
    )


# output --------------------------------------------------------------------------


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return f"{float(v):.12e}"


def emit_plot_data(path, columns: list[tuple[str, str]], rows) -> Path:
    """Write whitespace-separated columns with ``#`` header lines naming each column and its unit.

    Rows are sorted on the first column so that it is monotone.
    """
    rows = [list(r) for r in rows]
    if not rows:
        raise ValueError("nothing to plot: the scan is empty")
    rows.sort(key=lambda r: float(r[0]))
    lines = ["# " + "  ".join(f"{name} [{unit}]" for name, unit in columns)]
    lines += ["  ".join(_fmt(v) for v in r) for r in rows]
    path = Path(path)
    _atomic_write(path, "\n".join(lines) + "\n")
    return path


class Run:
    def __init__(self, cfg: dict, out: Path, jobs: int):
        self.cfg = cfg
        self.out = out
        self.jobs = jobs
        self.ctx = context_from(cfg)
        self.files: list[str] = []
        self.results: dict = {}
        self.failures: list[str] = []

    def write_csv(self, name: str, header: list[str], rows) -> None:
        _atomic_write(self.out / name, _csv_text(header, rows))
        self.files.append(name)

    def plot(self, name: str, columns, rows) -> None:
        emit_plot_data(self.out / name, columns, rows)
        self.files.append(name)

    def manifest(self, status: str) -> dict:
        return {
            "kind": self.cfg["kind"],
            "config": self.cfg,
            "context": {
                **self.ctx.to_dict(),
                "omega_z_rad_s": self.ctx.omega_z,
                "mass_kg": self.ctx.mass,
                "length_scale_m": self.ctx.length_scale,
                "oscillator_length_m": self.ctx.oscillator_length,
                "nonlinearity": self.ctx.nonlinearity,
            },
            "versions": {
                "ionsim": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
            "tolerances": {
                "crystal_gradient": crystal.GRAD_TOL,
                "crystal_linear": crystal.LINEAR_TOL,
                "gaussian_heisenberg": gaussian.HEISENBERG_TOL,
                "fewbody_residual_hbar_omega_z": fewbody.RESIDUAL_TOL,
                "fewbody_density_cutoff": fewbody.DENSITY_CUTOFF,
                "doublewell_extent_widths": doublewell.EXTENT_WIDTHS,
            },
            "results": self.results,
            "files": sorted(self.files),
            "failures": self.failures,
            "status": status,
        }


# experiments -------------------------------------------------------------------


def _rx(value):
    return math.inf if value is None else float(value)


def run_equilibrium(run: Run) -> None:
    p = run.cfg["params"]
    cfg = crystal.find_equilibrium(p["N"], _rx(p["rx"]), _rx(p["ry"]), dim=p["dim"])
    xyz = cfg.xyz()
    L = run.ctx.length_scale
    run.write_csv(
        "equilibrium.csv",
        ["index", "x_over_ell", "y_over_ell", "z_over_ell", "x_m", "y_m", "z_m"],
        [[i] + [_fmt(v) for v in row] + [_fmt(v * L) for v in row] for i, row in enumerate(xyz)],
    )
    run.results["geometry"] = crystal.classify(cfg).label


def run_critical(run: Run) -> None:
    Ns = run.cfg["params"]["N"]
    Ns = Ns if isinstance(Ns, list) else [Ns]
    rows = []
    for N in sorted(Ns):
        rc = crystal.critical_frequency(N)
        law = 3 * N / (4 * math.sqrt(math.log(N))) if N > 1 else float("nan")
        rows.append([N, _fmt(rc), _fmt(law), _fmt(rc * run.ctx.omega_z)])
    run.write_csv("critical.csv", ["N", "omega_c_over_omega_z", "large_N_law_over_omega_z", "omega_c_rad_s"], rows)
    run.results["critical"] = {str(r[0]): float(r[1]) for r in rows}


def run_modes(run: Run) -> None:
    p = run.cfg["params"]
    N = p["N"]
    rc = crystal.critical_frequency(N)
    rx = rc if p["rx"] is None else float(p["rx"])
    coeffs = modes.chain_taylor(N, rx)
    nm = modes.normal_modes(coeffs)
    path = run.out / "modes.csv"
    nm.to_csv(path)
    run.files.append("modes.csv")
    a, b = modes.landau_coefficients(coeffs, nm)
    info = {
        "rx_over_omega_z": rx,
        "rc_over_omega_z": rc,
        "a_J_per_m2": a * run.ctx.mass * run.ctx.omega_z**2,
        "b_J_per_m4": run.ctx.quartic_to_si(b),
        "quartic_coefficient_J_per_m4": run.ctx.quartic_to_si(b / 4),
    }
    if b > 0:
        opt = modes.optimal_point(N, run.ctx)
        info["optimal_point"] = {
            "rx_over_omega_z": opt.rx,
            "a_J_per_m2": opt.potential.a,
            "soft_frequency_rad_s": opt.soft_frequency,
            "detuning_rad_s": opt.detuning,
        }
    run.results["landau"] = info


def run_entropy_gaussian(run: Run) -> None:
    p = run.cfg["params"]
    N = p["N"]
    rc = crystal.critical_frequency(N)
    rx = p["rx_values"] or [float(v) for v in np.linspace(rc * 1.001, 2 * rc, 50)]
    rx = sorted(rx)
    S = [gaussian.chain_entropies(N, r) for r in rx]
    run.write_csv(
        "entropy_gaussian.csv",
        ["r_x_over_omega_z"] + [f"S_bits_site{i}" for i in range(N)],
        [[_fmt(r)] + [_fmt(v) for v in s] for r, s in zip(rx, S)],
    )
    site = gaussian.soft_site(N)
    run.plot("entropy_gaussian.dat", [("r_x", "omega_z"), ("S", "bits")], [[r, s[site]] for r, s in zip(rx, S)])
    if p["slope_fit"]:
        fit = gaussian.fit_log_slope(N, p["d_min"], p["d_max"], p["fit_points"])
        run.results["slope_fit"] = {"site": fit.site, "slope_bits_per_log2_distance": fit.slope, "intercept_bits": fit.intercept}


def _full_point(args):
    rx, ctx_dict, site, points, folder, index = args
    ctx = units.PhysicalContext.from_dict(ctx_dict)
    rec = fewbody.scan_point(rx, ctx, site, points)
    text = _csv_text(fewbody.SCAN_COLUMNS, [fewbody.scan_row(rec)])
    _atomic_write(Path(folder) / f"point_{index:04d}.csv", text)
    return rec


def run_entropy_full(run: Run) -> None:
    p = run.cfg["params"]
    rx = p["rx_values"] or list(fewbody.DEFAULT_SCAN_RX)
    if any(b < a for a, b in zip(rx, rx[1:])):
        raise ConfigError("params.rx_values: expected an ascending list")
    folder = run.out / "points"
    folder.mkdir(parents=True, exist_ok=True)
    ctx_dict = {**run.ctx.to_dict(), "charge": run.ctx.charge / const.e}
    args = [(r, ctx_dict, p["site"], p["points"], str(folder), i) for i, r in enumerate(rx)]
    if run.jobs > 1:
        with ProcessPoolExecutor(max_workers=run.jobs) as pool:
            records = list(pool.map(_full_point, args))
    else:
        records = [_full_point(a) for a in args]
    # merge the per-point files in input order
    body = []
    for i in range(len(rx)):
        lines = (folder / f"point_{i:04d}.csv").read_text().splitlines()
        body.extend(lines[1:])
    _atomic_write(run.out / "entropy_full.csv", ",".join(fewbody.SCAN_COLUMNS) + "\n" + "\n".join(body) + "\n")
    run.files.append("entropy_full.csv")
    run.plot("entropy_full.dat", [("r_x", "omega_z"), ("S", "bits"), ("S_decoupled", "bits")], [[r.rx, r.S_bits, r.S_decoupled] for r in records])
    run.plot("sqrt_x2.dat", [("r_x", "omega_z"), ("sqrt_x2", "m"), ("sqrt_x2_decoupled", "m")], [[r.rx, r.sqrt_x2_m, r.sqrt_x2_decoupled_m] for r in records])
    best = max(records, key=lambda r: r.S_bits)
    run.results["maximum"] = {"rx_over_omega_z": best.rx, "S_bits": best.S_bits}
    run.results["max_residual_hbar_omega_z"] = max(max(r.residuals) for r in records)
    for r in p["marginal_rx"]:
        sol = fewbody.solve_point(r, run.ctx, p["points"])
        stats = fewbody.position_statistics(sol.H, sol.spectrum.states[0], p["site"]).in_si(run.ctx)
        name = f"marginal_rx{r:.6f}.csv"
        fewbody.marginal_csv(stats, run.out / name)
        run.files.append(name)


def potential_from(run: Run, spec: dict) -> tuple[doublewell.Potential1D, dict]:
    ctx = run.ctx
    src = spec["source"]
    info: dict = {"source": src}
    if src == "explicit":
        pot = doublewell.Potential1D(float(spec["a"]), float(spec["b"]), ctx.mass, float(spec["cubic"]), ctx.hbar)
    else:
        N = spec["N"]
        opt = modes.optimal_point(N, ctx)
        info["optimal_point"] = {"rx_over_omega_z": opt.rx, "a_J_per_m2": opt.potential.a, "detuning_rad_s": opt.detuning}
        if src == "optimal":
            lp = opt.potential
        else:
            delta = units.as_angular(float(spec["detuning"]), ctx) / ctx.omega_z
            rx = opt.rc - delta
            coeffs = modes.chain_taylor(N, opt.rc)
            nm = modes.normal_modes(coeffs)
            lp = modes.LandauPotential(
                a=(rx**2 - opt.rc**2) * ctx.mass * ctx.omega_z**2, b=opt.potential.b, mass=ctx.mass, hbar=ctx.hbar
            )
            info["detuning_point"] = {"rx_over_omega_z": rx, "a_J_per_m2": lp.a, "soft_mode": nm.soft_vector.tolist()}
        pot = doublewell.Potential1D.from_landau(lp, cubic=float(spec["cubic"]))
    info.update({"a_J_per_m2": pot.a, "b_J_per_m4": pot.b, "cubic_J_per_m3": pot.cubic, "mass_kg": pot.mass})
    return pot, info


def run_doublewell_spectrum(run: Run) -> None:
    p = run.cfg["params"]
    pot, info = potential_from(run, p["potential"])
    res = doublewell.eigenstates_1d(pot, k=p["levels"])
    hbar = pot.hbar
    run.write_csv(
        "spectrum.csv",
        ["level", "energy_J", "energy_over_hbar_rad_s", "residual_relative"],
        [[i, _fmt(E), _fmt(E / hbar), _fmt(r)] for i, (E, r) in enumerate(zip(res.energies, res.residuals))],
    )
    if np.any(res.residuals > 1e-8):
        run.failures.append("doublewell: eigen-residuals above 1e-8")
    if pot.a < 0:
        sym = pot.with_cubic(0.0)
        split = doublewell.tunneling_splitting(sym)
        info["splitting"] = {"delta_E_J": split.delta_E, "rate_Hz": split.rate_Hz, "angular_rad_s": split.angular}
        info["doublet_below_barrier"] = bool(doublewell.eigenstates_1d(sym, k=2).energies[1] < sym.barrier)
        if pot.cubic != 0:
            asym = doublewell.cubic_bias_gap(pot)
            info["cubic_asymmetry"] = {"energy_J": asym, "angular_rad_s": asym / hbar, "rate_Hz": asym / (2 * math.pi * hbar)}
    run.results["potential"] = info


def _default_sweep_rates(pot: doublewell.Potential1D) -> list[float]:
    return [float(r) for r in np.geomspace(abs(pot.a) * 2e2, abs(pot.a) * 2e5, 8)]


def run_sweep(run: Run) -> None:
    p = run.cfg["params"]
    pot, info = potential_from(run, p["potential"])
    a_end = pot.a if p["a_end"] is None else float(p["a_end"])
    a_start = -a_end if p["a_start"] is None else float(p["a_start"])
    rates = sorted(p["rates"] or _default_sweep_rates(pot.with_a(a_end)))
    results = doublewell.sweep_study(pot, a_start, a_end, rates)
    doublewell.sweep_csv(results, run.out / "sweep.csv")
    run.files.append("sweep.csv")
    run.plot("sweep.dat", [("rate", "J m^-2 s^-1"), ("fidelity", "1")], [[r.rate, r.fidelity] for r in results])
    info.update({"a_start_J_per_m2": a_start, "a_end_J_per_m2": a_end})
    run.results["potential"] = info
    run.results["fidelities"] = [r.fidelity for r in results]


def run_rabi(run: Run) -> None:
    p = run.cfg["params"]
    pot, info = potential_from(run, p["potential"])
    amp = p["amplitude"]
    if amp is None:
        amp = p["amplitude_fraction"] * doublewell.tunneling_splitting(pot).delta_E
    res = doublewell.rabi_scan(pot, float(amp), p["omega"], cycles=p["cycles"], samples=p["samples"])
    doublewell.rabi_csv(res, run.out / "rabi.csv")
    run.files.append("rabi.csv")
    run.plot("rabi.dat", [("t", "s"), ("P_L", "1"), ("P_R", "1")], [[t, a, b] for t, a, b in zip(res.times, res.P_L, res.P_R)])
    run.results["potential"] = info
    run.results["rabi"] = {
        "amplitude_J": float(amp),
        "contrast": res.contrast,
        "rabi_frequency_rad_s": res.rabi_frequency,
        "predicted_frequency_rad_s": res.predicted_frequency,
        "resonance_rad_s": res.resonance,
        "low_contrast": res.low_contrast,
    }
    drift = float(np.max(np.abs(res.trajectory.norm - 1)))
    run.results["rabi"]["norm_drift"] = drift
    if drift > 1e-9 * max(1.0, len(res.times) / 1000):
        run.failures.append(f"rabi: norm drift {drift:.2e}")


def run_thresholds(run: Run) -> None:
    N = run.cfg["params"]["N"]
    lower, upper = crystal.threshold_scan_3d(N)
    run.write_csv("thresholds.csv", ["boundary", "r_over_omega_z"], [["lower", _fmt(lower)], ["upper", _fmt(upper)]])
    run.results["thresholds"] = {"lower": lower, "upper": upper}


RUNNERS = {
    "equilibrium": run_equilibrium,
    "critical": run_critical,
    "modes": run_modes,
    "entropy-gaussian": run_entropy_gaussian,
    "entropy-full": run_entropy_full,
    "doublewell-spectrum": run_doublewell_spectrum,
    "sweep": run_sweep,
    "rabi": run_rabi,
    "thresholds-3d": run_thresholds,
}

MODULE_OF = {
    "equilibrium": "crystal",
    "critical": "crystal",
    "thresholds-3d": "crystal",
    "modes": "modes",
    "entropy-gaussian": "gaussian",
    "entropy-full": "fewbody",
    "doublewell-spectrum": "doublewell",
    "sweep": "doublewell",
    "rabi": "doublewell",
}


def output_dir(cli_out: str | None, cfg: dict) -> Path:
    return Path(cli_out or os.environ.get(OUT_ENV) or cfg["output_dir"] or DEFAULT_OUT)


def run(kind: str, config_path, *, jobs: int = 1, out: str | None = None) -> int:
    """Execute one experiment; returns the process exit code."""
    cfg = load_config(kind, config_path)
    folder = output_dir(out, cfg)
    folder.mkdir(parents=True, exist_ok=True)
    r = Run(cfg, folder, max(1, jobs))
    status, code = "ok", 0
    try:
        RUNNERS[kind](r)
    except ConfigError:
        raise
    except Exception as exc:  # solver errors propagate with module context
        r.failures.append(f"{MODULE_OF[kind]}: {type(exc).__name__}: {exc}")
        status, code = "error", 1
    if r.failures and code == 0:
        status, code = "tolerance-failure", 1
    _atomic_write(folder / "manifest.json", json.dumps(r.manifest(status), indent=2, sort_keys=True, default=float) + "\n")
    for msg in r.failures:
        print(f"ionsim: {msg}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ionsim", description="Ion-crystal transition experiments")
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--jobs", type=int, default=1, help="parallel scan points")
    parser.add_argument("--out", default=None, help=f"output directory (overrides ${OUT_ENV})")
    args = parser.parse_args(argv)
    try:
        return run(args.kind, args.config, jobs=args.jobs, out=args.out)
    except ConfigError as exc:
        print(f"ionsim: config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"ionsim: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
