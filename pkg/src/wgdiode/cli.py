"""Command-line front end: config parsing, dispatch, reproducible artifacts.

Run configurations come from an INI-style config file (``key = value`` under
sections) and/or command-line flags; every config key has a flag of the same
name (``[grid] delta_min`` <-> ``--delta-min``) and flags override file
values.  Unknown sections or keys are errors, not warnings.

Config grammar (all values in gamma = 1 units; lists are comma-separated)::

    [run]      mode, out, format, seed, workers, plot
    [device]   gamma, kl, delta, phases
    [drive]    amplitude, direction, noise
    [pulse]    bandwidth, delay, inverted, t_max, tol
    [grid]     delta_min, delta_max, delta_points, kl_min, kl_max,
               kl_points, delta2
    [optimize] ratios, gap_floor, starts, fatol, maxiter
    [ensemble] trajectories, dt, t_final, chunk

Subcommands: ``steady``, ``sweep-cw``, ``sweep-photon``, ``optimize-noise``,
``validate-noise``.  Every data artifact gets a ``<out>.meta.json`` sidecar
with the fully resolved configuration, tool version and wall time.  Exit
codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
import time
from pathlib import Path

import numpy as np
from scipy.linalg import expm

from . import __version__, cwdrive, fockpulse, model, stochastic, sweep
from .cwdrive import CwDrive, Direction
from .fockpulse import PulseSpec
from .stochastic import EnsembleSpec

MODES = ("steady", "sweep-cw", "sweep-photon", "optimize-noise", "validate-noise")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    pass


def _parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in str(text).replace("[", "").replace("]", "").split(","))
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from exc


def _parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


# (section, key, parser, default, help); flag name = key with underscores->dashes
SCHEMA = [
    ("run", "out", str, None, "output path (default <mode>.<format>)"),
    ("run", "format", str, "csv", "output format: csv or json"),
    ("run", "seed", int, 12345, "64-bit reproducibility seed"),
    ("run", "workers", int, 1, "worker processes for grid/ensemble evaluation"),
    ("run", "plot", _parse_bool, False, "also render a figure next to the data file"),
    ("device", "gamma", float, 1.0, "decay rate per direction (sets the unit scale)"),
    ("device", "kl", float, 1.0, "phase separation of the two emitters"),
    ("device", "delta", _parse_floats, (0.0, 0.0), "per-emitter detunings, comma list"),
    ("device", "phases", _parse_floats, None, "explicit phase list (overrides kl)"),
    ("drive", "amplitude", float, sweep.DEFAULT_AMPLITUDE, "coherent pump amplitude"),
    ("drive", "direction", str, "right", "pump direction: right or left"),
    ("drive", "noise", float, 0.0, "broadband noise intensity on the counter mode"),
    ("pulse", "bandwidth", float, 2.0, "single-photon packet bandwidth"),
    ("pulse", "delay", float, 0.0, "packet start time"),
    ("pulse", "inverted", _parse_bool, True, "start with the receiving emitter excited"),
    ("pulse", "t_max", float, 40.0, "integration horizon"),
    ("pulse", "tol", float, 1e-6, "integrator relative tolerance for sweeps"),
    ("grid", "delta_min", float, -3.0, "first detuning sample"),
    ("grid", "delta_max", float, 3.0, "last detuning sample"),
    ("grid", "delta_points", int, 61, "number of detuning samples"),
    ("grid", "kl_min", float, sweep.KL_MARGIN, "first kL sample"),
    ("grid", "kl_max", float, 2 * np.pi - sweep.KL_MARGIN, "last kL sample"),
    ("grid", "kl_points", int, 61, "number of kL samples"),
    ("grid", "delta2", float, 0.0, "fixed detuning of the second emitter"),
    ("optimize", "ratios", _parse_floats, (0.0, 0.25, 0.5, 1.0, 2.0, 4.0),
     "noise-to-signal ratios"),
    ("optimize", "gap_floor", float, 1e-3, "slowest admissible relaxation rate"),
    ("optimize", "starts", int, 5, "refinement starts from best coarse cells"),
    ("optimize", "fatol", float, 1e-4, "refinement tolerance in D"),
    ("optimize", "maxiter", int, 200, "refinement iteration cap"),
    ("ensemble", "trajectories", int, 10000, "number of stochastic trajectories"),
    ("ensemble", "dt", float, 1e-3, "fixed trajectory step"),
    ("ensemble", "t_final", float, 5.0, "trajectory horizon"),
    ("ensemble", "chunk", int, 250, "trajectories evolved per batch"),
]

_KEYS = {(s, k) for s, k, *_ in SCHEMA}


def parse_config(config_path: str | None, overrides: dict, mode: str) -> dict:
    """Resolve file values, apply flag overrides, validate all keys."""
    values = {key: default for _, key, _, default, _ in SCHEMA}
    if config_path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        read = parser.read(config_path)
        if not read:
            raise ConfigError(f"config file not found: {config_path}")
        for section in parser.sections():
            for key, raw in parser.items(section):
                if section == "run" and key == "mode":
                    if raw != mode:
                        raise ConfigError(
                            f"config mode {raw!r} does not match subcommand {mode!r}")
                    continue
                if (section, key) not in _KEYS:
                    raise ConfigError(f"unknown config key [{section}] {key}")
                parse = next(p for s, k, p, _, _ in SCHEMA if (s, k) == (section, key))
                try:
                    values[key] = parse(raw)
                except (ValueError, ConfigError) as exc:
                    raise ConfigError(f"bad value for [{section}] {key}: {exc}") from exc
    for key, val in overrides.items():
        if val is not None:
            values[key] = val
    values["mode"] = mode
    if values["format"] not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {values['format']!r}")
    if values["direction"] not in ("right", "left"):
        raise ConfigError(f"direction must be right or left, got {values['direction']!r}")
    if values["out"] is None:
        values["out"] = f"{mode}.{values['format']}"
    return values


def _device(cfg) -> model.EmitterArray:
    deltas = tuple(cfg["delta"])
    try:
        if cfg["phases"] is not None:
            return model.EmitterArray(gamma=cfg["gamma"], phases=tuple(cfg["phases"]),
                                      detunings=deltas)
        if len(deltas) != 2:
            raise ConfigError(
                f"two detunings required with kl geometry, got {len(deltas)}")
        return model.two_emitter(deltas[0], deltas[1], cfg["kl"], cfg["gamma"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _drive(cfg) -> CwDrive:
    direction = Direction.RIGHT if cfg["direction"] == "right" else Direction.LEFT
    try:
        return CwDrive(amplitude=cfg["amplitude"], direction=direction,
                       noise_intensity=cfg["noise"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _grid_axes(cfg):
    if cfg["delta_points"] < 1 or cfg["kl_points"] < 1:
        raise ConfigError("grid needs at least one point per axis")
    deltas = np.linspace(cfg["delta_min"], cfg["delta_max"], cfg["delta_points"])
    kls = np.linspace(cfg["kl_min"], cfg["kl_max"], cfg["kl_points"])
    if kls.min() <= 0.0 or kls.max() >= 2 * np.pi:
        raise ConfigError("kl samples must stay strictly inside (0, 2 pi); "
                          "colocated emitters have no distinct phases")
    return deltas, kls


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(float(x))
    return str(x)


def _grid_records(grid: sweep.SweepGrid):
    for d, kl, m in grid.cells():
        yield {
            "delta": d, "kl": kl, "n_r_out": m.n_r_out,
            "n_l_out_mirror": m.n_l_out_mirror, "R": m.rectification,
            "T": m.transmission, "D": m.efficiency,
            "D_clamped": m.efficiency_clamped, "flags": ";".join(m.flags),
        }


def _write_artifact(cfg, payload_csv: str, payload_obj, started: float) -> Path:
    out = Path(cfg["out"])
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    if cfg["format"] == "csv":
        out.write_text(payload_csv)
    else:
        out.write_text(json.dumps(payload_obj, indent=2, sort_keys=True,
                                  allow_nan=True) + "\n")
    meta = {
        "tool": "wgdiode",
        "version": __version__,
        "mode": cfg["mode"],
        "resolved_config": {k: (list(v) if isinstance(v, tuple) else v)
                            for k, v in sorted(cfg.items())},
        "wall_time_s": round(time.monotonic() - started, 3),
    }
    Path(str(out) + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return out


def _maybe_plot(cfg, out: Path, kind: str, **artifacts):
    if not cfg["plot"]:
        return
    from . import report
    fig_path = out.with_suffix(".png")
    if kind == "sweep":
        report.render_sweep(artifacts["grid"], fig_path,
                            clamped=artifacts.get("clamped", False))
    elif kind == "optimize":
        report.render_optimize(artifacts["results"], fig_path)
    elif kind == "validate":
        report.render_validate(artifacts["payload"], fig_path)
    print(f"figure written to {fig_path}")


def _run_steady(cfg) -> int:
    started = time.monotonic()
    arr = _device(cfg)
    drive = _drive(cfg)
    rho, flux = cwdrive.solve_cw(arr, drive)
    populations = [float(np.real(np.trace(
        (lambda s: s.conj().T @ s)(model.lowering_operator(i, arr.n_emitters)) @ rho)))
        for i in range(arr.n_emitters)]
    record = {
        "phi_r_out": flux.phi_r_out,
        "phi_l_out": flux.phi_l_out,
        "input_flux": abs(drive.amplitude) ** 2 + drive.noise_intensity,
        "excited_population": populations,
        "purity": float(np.real(np.trace(rho @ rho))),
    }
    header = "phi_r_out,phi_l_out,input_flux," + ",".join(
        f"p_excited_{i}" for i in range(arr.n_emitters)) + ",purity"
    row = [record["phi_r_out"], record["phi_l_out"], record["input_flux"],
           *populations, record["purity"]]
    csv_text = header + "\n" + ",".join(_fmt(float(x)) for x in row) + "\n"
    out = _write_artifact(cfg, csv_text, record, started)
    print(f"steady-state artifact written to {out}")
    return EXIT_OK


def _run_sweep_cw(cfg) -> int:
    started = time.monotonic()
    deltas, kls = _grid_axes(cfg)
    drive = _drive(cfg)
    grid = sweep.cw_sweep(drive=drive, delta_values=deltas, kl_values=kls,
                          delta2=cfg["delta2"], gamma=cfg["gamma"],
                          workers=cfg["workers"])
    out = _write_artifact(cfg, sweep.sweep_csv(grid), list(_grid_records(grid)), started)
    best = grid.max_efficiency()
    print(f"cw sweep written to {out}; max D = {best[0]:.6f} "
          f"at delta = {best[1]:.4f}, kL = {best[2]:.4f}")
    _maybe_plot(cfg, out, "sweep", grid=grid, clamped=False)
    return EXIT_OK


def _run_sweep_photon(cfg) -> int:
    started = time.monotonic()
    deltas, kls = _grid_axes(cfg)
    pulse = PulseSpec(direction=Direction.RIGHT, bandwidth=cfg["bandwidth"],
                      delay=cfg["delay"])
    grid = sweep.single_photon_sweep(pulse=pulse, delta_values=deltas, kl_values=kls,
                                     inverted=cfg["inverted"], delta2=cfg["delta2"],
                                     gamma=cfg["gamma"], t_max=cfg["t_max"],
                                     tol=cfg["tol"], workers=cfg["workers"])
    out = _write_artifact(cfg, sweep.sweep_csv(grid), list(_grid_records(grid)), started)
    best_r = max((m.rectification for _, _, m in grid.cells() if m.ok), default=float("nan"))
    best = grid.max_efficiency()
    print(f"single-photon sweep written to {out}; max R = {best_r:.6f}, "
          f"max D = {best[0]:.6f}")
    _maybe_plot(cfg, out, "sweep", grid=grid, clamped=True)
    return EXIT_OK


def _run_optimize(cfg) -> int:
    started = time.monotonic()
    deltas, kls = _grid_axes(cfg)
    results = []
    for ratio in cfg["ratios"]:
        if ratio < 0:
            raise ConfigError(f"noise ratios must be >= 0, got {ratio}")
        results.append(sweep.optimize_efficiency(
            ratio, amplitude=cfg["amplitude"], delta_values=deltas, kl_values=kls,
            gamma=cfg["gamma"], gap_floor=cfg["gap_floor"], n_starts=cfg["starts"],
            fatol=cfg["fatol"], max_iter=cfg["maxiter"], workers=cfg["workers"]))
    records = [{"noise_ratio": r.noise_ratio, "D_opt": r.d_opt, "delta_opt": r.delta_opt,
                "kl_opt": r.kl_opt, "coarse_D": r.coarse_d, "refined": r.refined,
                "flags": ";".join(r.flags)} for r in results]
    out = _write_artifact(cfg, sweep.optimize_csv(results), records, started)
    curve = ", ".join(f"{r.noise_ratio:g}: {r.d_opt:.5f}" for r in results)
    print(f"optimisation curve written to {out}; D_opt = {{{curve}}}")
    _maybe_plot(cfg, out, "optimize", results=results)
    return EXIT_OK


def _run_validate(cfg) -> int:
    started = time.monotonic()
    arr = _device(cfg)
    drive = _drive(cfg)
    spec = EnsembleSpec(n_trajectories=cfg["trajectories"], dt=cfg["dt"],
                        seed=cfg["seed"], t_final=cfg["t_final"],
                        chunk_size=cfg["chunk"])
    rho0 = model.ground_state(arr.n_emitters)
    liouv = cwdrive.assemble_generator(arr, drive)
    rho_det = (expm(liouv * spec.t_final) @ rho0.reshape(-1)).reshape(arr.dim, arr.dim)
    rho_mc = stochastic.ensemble_mean_state(arr, drive, spec, rho0)
    diff = 0.5 * (rho_mc - rho_det)
    diff = 0.5 * (diff + diff.conj().T)
    trace_distance = float(np.abs(np.linalg.eigvalsh(diff)).sum())
    bound = 3.0 / np.sqrt(spec.n_trajectories)

    ens = stochastic.ensemble_output_flux(arr, drive, spec)
    _, det_flux = cwdrive.solve_cw(arr, drive)
    payload = {
        "trace_distance": trace_distance,
        "trace_distance_bound": bound,
        "trace_distance_ok": trace_distance < bound,
        "ensemble": ens.as_dict(),
        "deterministic": {"phi_r_out": det_flux.phi_r_out,
                          "phi_l_out": det_flux.phi_l_out},
        "flux_deviation_sigmas": {
            "phi_r": abs(ens.phi_r_out - det_flux.phi_r_out) / ens.se_r if ens.se_r else None,
            "phi_l": abs(ens.phi_l_out - det_flux.phi_l_out) / ens.se_l if ens.se_l else None,
        },
    }
    csv_lines = ["quantity,ensemble,stderr,deterministic",
                 ",".join(["phi_r_out", _fmt(ens.phi_r_out), _fmt(ens.se_r),
                           _fmt(det_flux.phi_r_out)]),
                 ",".join(["phi_l_out", _fmt(ens.phi_l_out), _fmt(ens.se_l),
                           _fmt(det_flux.phi_l_out)]),
                 ",".join(["trace_distance", _fmt(trace_distance), _fmt(bound), ""])]
    out = _write_artifact(cfg, "\n".join(csv_lines) + "\n", payload, started)
    verdict = "ok" if payload["trace_distance_ok"] else "EXCEEDED"
    print(f"noise validation written to {out}; trace distance "
          f"{trace_distance:.4f} (bound {bound:.4f}: {verdict})")
    _maybe_plot(cfg, out, "validate", payload=payload)
    return EXIT_OK


_RUNNERS = {
    "steady": _run_steady,
    "sweep-cw": _run_sweep_cw,
    "sweep-photon": _run_sweep_photon,
    "optimize-noise": _run_optimize,
    "validate-noise": _run_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wgdiode",
        description="Photon-diode simulations of a driven two-emitter waveguide device.")
    parser.add_argument("--version", action="version", version=f"wgdiode {__version__}")
    subs = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        sub = subs.add_parser(mode, help=f"run the {mode} engine")
        sub.add_argument("--config", help="INI config file; flags override its values")
        for _, key, parse, _, help_text in SCHEMA:
            flag = "--" + key.replace("_", "-")
            if parse is _parse_bool:
                sub.add_argument(flag, dest=key, action="store_const", const=True,
                                 default=None, help=help_text)
            elif parse is _parse_floats:
                sub.add_argument(flag, dest=key, type=_parse_floats, default=None,
                                 help=help_text)
            else:
                sub.add_argument(flag, dest=key, type=parse, default=None, help=help_text)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {key: getattr(args, key) for _, key, _, _, _ in SCHEMA}
    try:
        cfg = parse_config(args.config, overrides, args.mode)
        return _RUNNERS[args.mode](cfg)
    except ConfigError as exc:
        json.dump({"error": "config", "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return EXIT_CONFIG
    except (cwdrive.NullSpaceDimensionError, fockpulse.IntegrationError,
            RuntimeError, np.linalg.LinAlgError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
