"""Quantum simulation of a photon diode: two emitters coupled to a 1D channel.

The package models steady-state transport under continuous-wave pumping
(optionally with broadband counter-propagating noise), stochastic trajectories
of the noisy device, and single-photon pulse scattering with an optionally
inverted emitter, plus the sweep and optimisation drivers that turn those into
diode figures of merit.
"""

from .model import (
    EmitterArray,
    two_emitter,
    mirror,
    lowering_operator,
    jump_operators,
    exchange_hamiltonian,
    bare_hamiltonian,
    build_liouvillian,
    ground_state,
)
from .cwdrive import (
    CwDrive,
    Direction,
    FluxPair,
    NullSpaceDimensionError,
    assemble_generator,
    steady_state,
    output_fluxes,
    solve_cw,
)
from .fockpulse import PulseSpec, HierarchyState, PulseResult, integrate_pulse, inverted_initial
from .stochastic import EnsembleSpec, EnsembleFlux, ensemble_mean_state, ensemble_output_flux
from .sweep import (
    DiodeMetrics,
    SweepGrid,
    OptimizeResult,
    diode_metrics,
    cw_sweep,
    single_photon_sweep,
    optimize_efficiency,
)

__version__ = "0.1.0"

__all__ = [
    "EmitterArray", "two_emitter", "mirror", "lowering_operator", "jump_operators",
    "exchange_hamiltonian", "bare_hamiltonian", "build_liouvillian", "ground_state",
    "CwDrive", "Direction", "FluxPair", "NullSpaceDimensionError",
    "assemble_generator", "steady_state", "output_fluxes", "solve_cw",
    "PulseSpec", "HierarchyState", "PulseResult", "integrate_pulse", "inverted_initial",
    "EnsembleSpec", "EnsembleFlux", "ensemble_mean_state", "ensemble_output_flux",
    "DiodeMetrics", "SweepGrid", "OptimizeResult", "diode_metrics",
    "cw_sweep", "single_photon_sweep", "optimize_efficiency",
    "__version__",
]
