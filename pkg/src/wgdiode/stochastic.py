"""Trajectory-level treatment of classical broadband noise on one channel mode.

Each trajectory integrates the conditional master equation

    d rho = L_det[rho] dt + [J - J^dag, rho] o dW,      dW ~ Normal(0, Gamma dt)

with the noise term in Stratonovich form, using the Heun predictor-corrector
scheme, so the ensemble average converges to the dephasing master equation
without a hand-inserted Ito correction -- averaging trajectories therefore
*tests* the deterministic noise channel in :mod:`wgdiode.cwdrive` instead of
assuming it.  Output fluxes are accumulated along each trajectory, with the
noise-emitter cross term taken in midpoint form to match the integration
scheme.

Reproducibility: trajectory ``i`` draws its increments from a counter-based
Philox stream keyed by ``(seed, i)``, so results are independent of chunking
and of how trajectories are scheduled.  Reductions run in fixed chunk order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import cwdrive, model
from .cwdrive import CwDrive, Direction, FluxPair
from .model import EmitterArray

__all__ = [
    "EnsembleSpec",
    "EnsembleFlux",
    "sme_step",
    "noise_commutator",
    "ensemble_mean_state",
    "ensemble_output_flux",
    "dt_refinement_check",
]

MAX_DT = 0.01
TRACE_ABORT = 1e-6


@dataclass(frozen=True)
class EnsembleSpec:
    """Size, step and seed of a trajectory ensemble."""

    n_trajectories: int
    dt: float
    seed: int
    t_final: float = 5.0
    chunk_size: int = 250

    def __post_init__(self):
        if self.n_trajectories < 1:
            raise ValueError("need at least one trajectory")
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_final <= 0:
            raise ValueError(f"t_final must be positive, got {self.t_final}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))


@dataclass
class EnsembleFlux:
    """Monte-Carlo output-flux estimate with standard errors."""

    phi_r_out: float
    phi_l_out: float
    se_r: float
    se_l: float
    n_trajectories: int
    dt: float
    seed: int
    flags: list[str]

    def as_dict(self) -> dict:
        return {
            "phi_r_out": self.phi_r_out,
            "phi_l_out": self.phi_l_out,
            "se_r": self.se_r,
            "se_l": self.se_l,
            "n_trajectories": self.n_trajectories,
            "dt": self.dt,
            "seed": self.seed,
            "flags": list(self.flags),
        }


def noise_commutator(j: np.ndarray) -> np.ndarray:
    """Superoperator rho -> [J - J^dag, rho] multiplying the Wiener increment."""
    return model.commutator_super(j - j.conj().T)


def _deterministic_generator(arr: EmitterArray, drive: CwDrive) -> np.ndarray:
    """Conditional-equation drift: full generator minus the averaged noise channel."""
    base = CwDrive(amplitude=drive.amplitude, direction=drive.direction, noise_intensity=0.0)
    return cwdrive.assemble_generator(arr, base)


def sme_step(rho: np.ndarray, dw: float, liouv: np.ndarray, noise_sup: np.ndarray) -> np.ndarray:
    """One Stratonovich-Heun step of the conditional master equation."""
    d = rho.shape[0]
    y = rho.reshape(-1)
    drift = liouv @ y
    kick = noise_sup @ y
    pred = y + drift + dw * kick
    y1 = y + 0.5 * (drift + liouv @ pred) + 0.5 * dw * (kick + noise_sup @ pred)
    out = y1.reshape(d, d)
    drift_err = abs(np.trace(out).real - 1.0)
    if drift_err > TRACE_ABORT:
        raise RuntimeError(f"trace drift {drift_err:.2e} beyond {TRACE_ABORT}")
    return out


def _trace_row(op: np.ndarray) -> np.ndarray:
    return op.T.reshape(-1)


def _chunk_bounds(n: int, size: int) -> list[tuple[int, int]]:
    return [(a, min(a + size, n)) for a in range(0, n, size)]


def _draw_increments(seed: int, idx_lo: int, idx_hi: int, n_steps: int,
                     std: float, substeps: int = 1) -> np.ndarray:
    """Per-trajectory Wiener increments, shape (n_steps * substeps, chunk)."""
    cols = []
    for i in range(idx_lo, idx_hi):
        gen = np.random.Generator(np.random.Philox(key=np.array([seed, i], dtype=np.uint64)))
        cols.append(gen.standard_normal(n_steps * substeps) * std)
    return np.stack(cols, axis=1)


def _evolve_chunk(y0: np.ndarray, liouv_dt: np.ndarray, noise_sup: np.ndarray,
                  dws: np.ndarray, rows: dict, drive: CwDrive, dt: float,
                  collect_flux: bool):
    """Heun-evolve a chunk of trajectories; returns final states and flux windows.

    y0: (d2,) shared initial state; dws: (n_steps, chunk).  Flux samples are
    per-trajectory time averages over the four quarters of the run, combined
    by the caller into halves.
    """
    n_steps, chunk = dws.shape
    y = np.repeat(y0[:, None], chunk, axis=1)
    e = drive.amplitude
    gn = drive.noise_intensity

    if collect_flux:
        pump_sum = np.zeros((4, chunk))
        back_sum = np.zeros((4, chunk))
        cross_sum = np.zeros((4, chunk))
        counts = np.zeros(4, dtype=int)
        quarter = [min(n_steps, (n_steps * (k + 1)) // 4) for k in range(4)]

        def pump_inst(state):
            return (
                abs(e) ** 2
                + 2.0 * np.real(np.conj(e) * (rows["j_pump"] @ state))
                + np.real(rows["jdj_pump"] @ state)
            )

        def back_inst(state):
            return np.real(rows["jdj_back"] @ state)

        def quad_exp(state):
            return np.real(rows["quad_back"] @ state)

        a_prev = quad_exp(y)

    trace_row = rows["trace"]
    q = 0
    for step in range(n_steps):
        dw = dws[step]
        drift = liouv_dt @ y
        kick = noise_sup @ y
        pred = y + drift + dw * kick
        y = y + 0.5 * (drift + liouv_dt @ pred) + 0.5 * dw * (kick + noise_sup @ pred)
        if collect_flux:
            if step >= quarter[q] and q < 3:
                q += 1
            a_next = quad_exp(y)
            pump_sum[q] += pump_inst(y)
            back_sum[q] += back_inst(y)
            cross_sum[q] += 0.5 * (a_prev + a_next) * dw
            counts[q] += 1
            a_prev = a_next
        if step % 200 == 199:
            drift_err = np.abs(np.real(trace_row @ y) - 1.0).max()
            if drift_err > TRACE_ABORT:
                raise RuntimeError(f"trace drift {drift_err:.2e} beyond {TRACE_ABORT}")

    out = {"y_final_sum": y.sum(axis=1)}
    if collect_flux:
        # per-quarter time averages; the cross term divides by window duration
        pump_avg = pump_sum / counts[:, None]
        back_avg = back_sum / counts[:, None] + gn
        cross_avg = cross_sum / (counts[:, None] * dt)
        out["pump"] = pump_avg
        out["back"] = back_avg + cross_avg
    return out


def _prepare(arr: EmitterArray, drive: CwDrive, spec: EnsembleSpec):
    if spec.dt > MAX_DT / arr.gamma:
        raise ValueError(f"dt = {spec.dt} exceeds {MAX_DT}/gamma")
    liouv = _deterministic_generator(arr, drive)
    j_r, j_l = model.jump_operators(arr)
    j_pump, j_back = (j_r, j_l) if drive.direction is Direction.RIGHT else (j_l, j_r)
    rows = {
        "j_pump": _trace_row(j_pump),
        "jdj_pump": _trace_row(j_pump.conj().T @ j_pump),
        "jdj_back": _trace_row(j_back.conj().T @ j_back),
        "quad_back": _trace_row(j_back + j_back.conj().T),
        "trace": _trace_row(np.eye(arr.dim, dtype=complex)),
    }
    noise_sup = noise_commutator(j_back)
    return liouv, noise_sup, rows


def ensemble_mean_state(arr: EmitterArray, drive: CwDrive, spec: EnsembleSpec,
                        initial: np.ndarray) -> np.ndarray:
    """Ensemble-averaged conditional state at t_final."""
    model.check_density_matrix(initial, "initial state")
    liouv, noise_sup, rows = _prepare(arr, drive, spec)
    liouv_dt = liouv * spec.dt
    std = np.sqrt(drive.noise_intensity * spec.dt)
    y0 = initial.reshape(-1)
    total = np.zeros_like(y0)
    for lo, hi in _chunk_bounds(spec.n_trajectories, spec.chunk_size):
        dws = _draw_increments(spec.seed, lo, hi, spec.n_steps, std)
        part = _evolve_chunk(y0, liouv_dt, noise_sup, dws, rows, drive, spec.dt,
                             collect_flux=False)
        total = total + part["y_final_sum"]
    rho = (total / spec.n_trajectories).reshape(arr.dim, arr.dim)
    return 0.5 * (rho + rho.conj().T)


def ensemble_output_flux(arr: EmitterArray, drive: CwDrive, spec: EnsembleSpec,
                         initial: np.ndarray | None = None) -> EnsembleFlux:
    """Monte-Carlo estimate of both output fluxes, time-averaged at stationarity.

    By default trajectories start from the deterministic noisy steady state so
    the run is stationary from t = 0; fluxes average over the second half of
    the run.  The run is flagged when first- and second-half means disagree by
    more than three combined standard errors.
    """
    if initial is None:
        initial = cwdrive.steady_state(cwdrive.assemble_generator(arr, drive))
    model.check_density_matrix(initial, "initial state")
    liouv, noise_sup, rows = _prepare(arr, drive, spec)
    liouv_dt = liouv * spec.dt
    std = np.sqrt(drive.noise_intensity * spec.dt)
    y0 = initial.reshape(-1)

    pump_parts, back_parts = [], []
    for lo, hi in _chunk_bounds(spec.n_trajectories, spec.chunk_size):
        dws = _draw_increments(spec.seed, lo, hi, spec.n_steps, std)
        part = _evolve_chunk(y0, liouv_dt, noise_sup, dws, rows, drive, spec.dt,
                             collect_flux=True)
        pump_parts.append(part["pump"])
        back_parts.append(part["back"])
    pump = np.concatenate(pump_parts, axis=1)  # (4, n_traj) quarter averages
    back = np.concatenate(back_parts, axis=1)

    def halves(quarters):
        first = 0.5 * (quarters[0] + quarters[1])
        second = 0.5 * (quarters[2] + quarters[3])
        return first, second

    flags = []
    results = {}
    n = spec.n_trajectories
    for name, quarters in (("pump", pump), ("back", back)):
        first, second = halves(quarters)
        mean = second.mean()
        se = second.std(ddof=1) / np.sqrt(n) if n > 1 else np.inf
        se1 = first.std(ddof=1) / np.sqrt(n) if n > 1 else np.inf
        drift = abs(first.mean() - mean)
        floor = 1e-10 * max(1.0, abs(mean))  # zero-variance runs are stationary
        if n > 1 and drift > 3.0 * np.hypot(se, se1) and drift > floor:
            flags.append(f"nonstationary:{name}")
        results[name] = (float(mean), float(se))

    if drive.direction is Direction.RIGHT:
        (phi_r, se_r), (phi_l, se_l) = results["pump"], results["back"]
    else:
        (phi_l, se_l), (phi_r, se_r) = results["pump"], results["back"]
    return EnsembleFlux(phi_r_out=phi_r, phi_l_out=phi_l, se_r=se_r, se_l=se_l,
                        n_trajectories=n, dt=spec.dt, seed=spec.seed, flags=flags)


def dt_refinement_check(arr: EmitterArray, drive: CwDrive, spec: EnsembleSpec,
                        initial: np.ndarray) -> dict:
    """Weak-convergence self-test on common Brownian paths.

    Runs every trajectory once at ``dt`` and once at ``dt/2`` with the coarse
    increments obtained by summing fine pairs, so the difference of the two
    ensemble means isolates discretisation bias from Monte-Carlo noise.
    Returns the mean final excitation under both resolutions and its standard
    error across trajectories.
    """
    model.check_density_matrix(initial, "initial state")
    liouv, noise_sup, rows = _prepare(arr, drive, spec)
    std_fine = np.sqrt(drive.noise_intensity * spec.dt / 2)
    y0 = initial.reshape(-1)
    num_row = _trace_row(model.number_operator(arr.n_emitters))

    coarse_vals, fine_vals = [], []
    for lo, hi in _chunk_bounds(spec.n_trajectories, spec.chunk_size):
        fine = _draw_increments(spec.seed, lo, hi, spec.n_steps, std_fine, substeps=2)
        coarse = fine[0::2] + fine[1::2]
        pc = _evolve_chunk_states(y0, liouv * spec.dt, noise_sup, coarse)
        pf = _evolve_chunk_states(y0, liouv * (spec.dt / 2), noise_sup, fine)
        coarse_vals.append(np.real(num_row @ pc))
        fine_vals.append(np.real(num_row @ pf))
    coarse_vals = np.concatenate(coarse_vals)
    fine_vals = np.concatenate(fine_vals)
    n = spec.n_trajectories
    return {
        "coarse_mean": float(coarse_vals.mean()),
        "fine_mean": float(fine_vals.mean()),
        "coarse_se": float(coarse_vals.std(ddof=1) / np.sqrt(n)),
        "fine_se": float(fine_vals.std(ddof=1) / np.sqrt(n)),
    }


def _evolve_chunk_states(y0, liouv_dt, noise_sup, dws):
    """Bare Heun evolution returning the final state of every trajectory."""
    _, chunk = dws.shape
    y = np.repeat(y0[:, None], chunk, axis=1)
    for step in range(dws.shape[0]):
        dw = dws[step]
        drift = liouv_dt @ y
        kick = noise_sup @ y
        pred = y + drift + dw * kick
        y = y + 0.5 * (drift + liouv_dt @ pred) + 0.5 * dw * (kick + noise_sup @ pred)
    return y
