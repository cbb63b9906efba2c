"""Steady state and mean output photon fluxes under continuous-wave pumping.

The drive displaces one propagation direction by a coherent amplitude E (in
sqrt-rate units).  An optional broadband classical noise of intensity Gamma_n
rides on the counter-propagating mode; after averaging over its realisations
it acts as a dephasing channel in the Hermitian quadrature
``X = i (J - J^dag)`` of that mode and injects a photon flux Gamma_n.

The mean output fluxes follow from input-output bookkeeping.  On the pumped
(right, say) side::

    phi_r_out = |E|^2 + 2 Re(E^* <J_R>) + <J_R^dag J_R>

On the noisy side the flux picks up, besides the pass-through Gamma_n and the
emission term <J_L^dag J_L>, a cross term between the noise and the emitters.
Averaging the trajectory expression ``<J_L + J_L^dag> o dW`` in midpoint
(Stratonovich) form gives

    cross = -Gamma_n * <[J_L, J_L^dag]>,

which is exactly what total-flux conservation demands and what the trajectory
ensemble in :mod:`wgdiode.stochastic` reproduces.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import model
from .model import EmitterArray, commutator_super, dissipator_super

__all__ = [
    "Direction",
    "CwDrive",
    "FluxPair",
    "NullSpaceDimensionError",
    "drive_term",
    "dephasing_term",
    "assemble_generator",
    "steady_state",
    "liouvillian_gap",
    "output_fluxes",
    "solve_cw",
]

UNIQUENESS_RATIO = 1e6
NULL_FLOOR = 1e-13
RESIDUAL_TOL = 1e-10


class Direction(enum.Enum):
    RIGHT = "right"
    LEFT = "left"


@dataclass(frozen=True)
class CwDrive:
    """Continuous-wave coherent pump plus optional counter-propagating noise."""

    amplitude: complex
    direction: Direction = Direction.RIGHT
    noise_intensity: float = 0.0

    def __post_init__(self):
        if self.noise_intensity < 0:
            raise ValueError(f"noise intensity must be >= 0, got {self.noise_intensity}")


@dataclass(frozen=True)
class FluxPair:
    """Mean output photon fluxes (photons per unit time) in both directions."""

    phi_r_out: float
    phi_l_out: float

    def __post_init__(self):
        for name in ("phi_r_out", "phi_l_out"):
            v = getattr(self, name)
            if v < -1e-9:
                raise ValueError(f"{name} = {v} below the numerical floor")


class NullSpaceDimensionError(RuntimeError):
    """The generator's null space is not one-dimensional."""


def drive_term(amplitude: complex, j: np.ndarray) -> np.ndarray:
    """Generator contribution of a coherent displacement on the mode of ``j``.

    Acts as rho -> [E^* J - E J^dag, rho]; equivalently a Hermitian drive
    Hamiltonian i(E^* J - E J^dag).
    """
    op = np.conj(amplitude) * j - amplitude * j.conj().T
    return commutator_super(op)


def dephasing_term(noise_intensity: float, j: np.ndarray) -> np.ndarray:
    """Noise-averaged dephasing channel of broadband noise on the mode of ``j``.

    Lindblad channel with the Hermitian jump X = i(J - J^dag) at rate
    ``noise_intensity``; trace- and Hermiticity-preserving.
    """
    if noise_intensity < 0:
        raise ValueError(f"noise intensity must be >= 0, got {noise_intensity}")
    x = 1j * (j - j.conj().T)
    return noise_intensity * dissipator_super(x)


def assemble_generator(arr: EmitterArray, drive: CwDrive) -> np.ndarray:
    """Full averaged generator: emitters + channel + pump + noise dephasing."""
    j_r, j_l = model.jump_operators(arr)
    h = model.bare_hamiltonian(arr) + model.exchange_hamiltonian(arr)
    liouv = model.build_liouvillian(h, [j_r, j_l])
    j_pump, j_noise = (j_r, j_l) if drive.direction is Direction.RIGHT else (j_l, j_r)
    liouv += drive_term(drive.amplitude, j_pump)
    if drive.noise_intensity > 0:
        liouv += dephasing_term(drive.noise_intensity, j_noise)
    return liouv


def steady_state(liouv: np.ndarray) -> np.ndarray:
    """Unique stationary density matrix of a trace-preserving generator.

    Extracted as the right-singular vector of the smallest singular value.
    Raises :class:`NullSpaceDimensionError` when the second-smallest singular
    value is not well separated (degenerate stationary manifolds, e.g. a dark
    state decoupled from pump and decay, must surface loudly).
    """
    d = int(round(np.sqrt(liouv.shape[0])))
    _, s, vh = np.linalg.svd(liouv)
    # the ratio test alone is vacuous when several singular values sit at
    # roundoff zero, so the runner-up must also clear an absolute floor
    if (s[-2] / max(s[-1], np.finfo(float).tiny) < UNIQUENESS_RATIO
            or s[-2] < NULL_FLOOR * s[0]):
        raise NullSpaceDimensionError(
            f"null space not one-dimensional (sigma ratio {s[-2] / max(s[-1], 1e-300):.2e}, "
            f"runner-up {s[-2] / s[0]:.2e} of norm)"
        )
    rho = vh[-1].conj().reshape(d, d)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    residual = np.linalg.norm(liouv @ rho.reshape(-1))
    if residual > RESIDUAL_TOL * s[0] * max(1.0, np.linalg.norm(rho)):
        raise NullSpaceDimensionError(f"stationary residual too large ({residual:.2e})")
    return model.check_density_matrix(rho, "steady state")


def liouvillian_gap(liouv: np.ndarray) -> float:
    """Slowest nonzero relaxation rate, min |Re eig| over the nonstationary spectrum."""
    rates = np.sort(np.abs(np.linalg.eigvals(liouv).real))
    return float(rates[1])


def output_fluxes(rho: np.ndarray, drive: CwDrive, j_r: np.ndarray, j_l: np.ndarray) -> FluxPair:
    """Mean output fluxes for a state ``rho`` under the given pump configuration."""
    j_pump, j_back = (j_r, j_l) if drive.direction is Direction.RIGHT else (j_l, j_r)
    e = drive.amplitude

    def expect(op):
        return np.trace(op @ rho)

    phi_pump = (
        abs(e) ** 2
        + 2.0 * np.real(np.conj(e) * expect(j_pump))
        + np.real(expect(j_pump.conj().T @ j_pump))
    )
    phi_back = np.real(expect(j_back.conj().T @ j_back))
    gn = drive.noise_intensity
    if gn > 0:
        comm = j_back @ j_back.conj().T - j_back.conj().T @ j_back  # [J, J^dag]
        phi_back += gn - gn * np.real(expect(comm))
    if drive.direction is Direction.RIGHT:
        return FluxPair(phi_r_out=float(phi_pump), phi_l_out=float(phi_back))
    return FluxPair(phi_r_out=float(phi_back), phi_l_out=float(phi_pump))


def solve_cw(arr: EmitterArray, drive: CwDrive) -> tuple[np.ndarray, FluxPair]:
    """Steady state and output fluxes of a driven array in one call."""
    liouv = assemble_generator(arr, drive)
    rho = steady_state(liouv)
    j_r, j_l = model.jump_operators(arr)
    return rho, output_fluxes(rho, drive, j_r, j_l)
