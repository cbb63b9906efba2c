"""Operators and generators for two-level emitters coupled to a 1D photonic channel.

Every emitter couples with rate ``gamma`` to each of the two propagation
directions of the channel.  The collective coupling operators carry the
position of each emitter as a dimensionless phase ``phi_i = k * x_i``, so the
only geometric parameter of a two-emitter device is the phase difference
``kL = phi_2 - phi_1``.

Basis convention (fixed here, used everywhere):

* per site, index 0 is the ground state ``|g>`` and index 1 the excited
  state ``|e>``; the single-site lowering matrix is ``[[0, 1], [0, 0]]``;
* site 0 (the leftmost emitter, smallest phase) is the first tensor factor,
  so basis index ``b`` of the 2**n space has bit ``n-1-i`` set when emitter
  ``i`` is excited (e.g. for n=2, ``|eg>`` is index 2 and ``|ge>`` index 1);
* density matrices are vectorised row-major (``rho.reshape(-1)``), hence
  ``vec(A @ rho @ B) = kron(A, B.T) @ vec(rho)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "EmitterArray",
    "two_emitter",
    "mirror",
    "lowering_operator",
    "number_operator",
    "jump_operators",
    "exchange_hamiltonian",
    "bare_hamiltonian",
    "build_liouvillian",
    "spre",
    "spost",
    "commutator_super",
    "dissipator_super",
    "check_density_matrix",
    "ground_state",
    "HERMITICITY_TOL",
    "TRACE_TOL",
    "PSD_FLOOR",
]

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_FLOOR = -1e-8

_SIGMA = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
_ID2 = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class EmitterArray:
    """A chain of two-level emitters along the channel.

    gamma      -- decay rate into each propagation direction (time scale; 1.0
                  fixes the unit system)
    phases     -- propagation phases k*x_i, strictly increasing along the chain
    detunings  -- emitter transition frequency minus the input carrier, per site
    """

    gamma: float
    phases: tuple[float, ...]
    detunings: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(float(p) for p in self.phases))
        object.__setattr__(self, "detunings", tuple(float(d) for d in self.detunings))
        if self.n_emitters < 1:
            raise ValueError("need at least one emitter")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if len(self.detunings) != self.n_emitters:
            raise ValueError(
                f"got {len(self.detunings)} detunings for {self.n_emitters} emitters"
            )
        if any(b <= a for a, b in zip(self.phases, self.phases[1:])):
            raise ValueError("phases must be distinct and increasing along the channel")

    @property
    def n_emitters(self) -> int:
        return len(self.phases)

    @property
    def dim(self) -> int:
        return 2 ** self.n_emitters


def two_emitter(delta1: float, delta2: float, kl: float, gamma: float = 1.0) -> EmitterArray:
    """Standard two-emitter device: phases (0, kL), detunings (delta1, delta2)."""
    return EmitterArray(gamma=gamma, phases=(0.0, kl), detunings=(delta1, delta2))


def mirror(arr: EmitterArray) -> EmitterArray:
    """Spatially reflected device: emitter order reversed, phase offsets kept.

    Pumping the mirrored device with a right-going input is equivalent to
    pumping the original device with a left-going one.  Phases are shifted so
    the first emitter sits at phase 0 again, which makes the mirror of a
    detuning-symmetric device bit-identical to the original.
    """
    top = arr.phases[-1]
    phases = tuple(top - p for p in reversed(arr.phases))
    return EmitterArray(gamma=arr.gamma, phases=phases, detunings=tuple(reversed(arr.detunings)))


def lowering_operator(i: int, n: int) -> np.ndarray:
    """Lowering operator of emitter i embedded in the 2**n product space."""
    if not 0 <= i < n:
        raise IndexError(f"emitter index {i} out of range for {n} emitters")
    out = _SIGMA if i == 0 else _ID2
    for j in range(1, n):
        out = np.kron(out, _SIGMA if j == i else _ID2)
    return out


def number_operator(n: int) -> np.ndarray:
    """Total excitation number, sum of sigma_i^dag sigma_i."""
    out = np.zeros((2 ** n, 2 ** n), dtype=complex)
    for i in range(n):
        s = lowering_operator(i, n)
        out += s.conj().T @ s
    return out


def jump_operators(arr: EmitterArray) -> tuple[np.ndarray, np.ndarray]:
    """Collective coupling operators (J_right, J_left) of the array.

    J_right = sqrt(gamma) * sum_i exp(-i phi_i) sigma_i and J_left is its
    phase conjugate; interference between emitters enters through the phases.
    """
    n = arr.n_emitters
    root = np.sqrt(arr.gamma)
    j_r = np.zeros((arr.dim, arr.dim), dtype=complex)
    j_l = np.zeros((arr.dim, arr.dim), dtype=complex)
    for i, phi in enumerate(arr.phases):
        s = lowering_operator(i, n)
        j_r += root * np.exp(-1j * phi) * s
        j_l += root * np.exp(+1j * phi) * s
    return j_r, j_l


def exchange_hamiltonian(arr: EmitterArray) -> np.ndarray:
    """Channel-mediated coherent coupling, gamma * sin|phi_i - phi_j| flip-flop terms."""
    n = arr.n_emitters
    h = np.zeros((arr.dim, arr.dim), dtype=complex)
    for i in range(n):
        si = lowering_operator(i, n)
        for j in range(i + 1, n):
            sj = lowering_operator(j, n)
            g = arr.gamma * np.sin(abs(arr.phases[i] - arr.phases[j]))
            h += g * (si.conj().T @ sj + sj.conj().T @ si)
    return h


def bare_hamiltonian(arr: EmitterArray) -> np.ndarray:
    """Detuning Hamiltonian, diagonal in the product basis."""
    h = np.zeros((arr.dim, arr.dim), dtype=complex)
    for i, delta in enumerate(arr.detunings):
        s = lowering_operator(i, arr.n_emitters)
        h += delta * (s.conj().T @ s)
    return h


def spre(op: np.ndarray) -> np.ndarray:
    """Superoperator for left multiplication, vec(op @ rho)."""
    d = op.shape[0]
    return np.kron(op, np.eye(d, dtype=complex))


def spost(op: np.ndarray) -> np.ndarray:
    """Superoperator for right multiplication, vec(rho @ op)."""
    d = op.shape[0]
    return np.kron(np.eye(d, dtype=complex), op.T)


def commutator_super(op: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> [op, rho]."""
    return spre(op) - spost(op)


def dissipator_super(j: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> J rho J^dag - (J^dag J rho + rho J^dag J)/2."""
    jd = j.conj().T
    jdj = jd @ j
    return np.kron(j, jd.T) - 0.5 * (spre(jdj) + spost(jdj))


def build_liouvillian(h_total: np.ndarray, jumps: list[np.ndarray] | tuple = ()) -> np.ndarray:
    """Generator of the averaged master equation on vectorised density matrices.

    ``h_total`` must be Hermitian; each entry of ``jumps`` contributes a
    trace-preserving dissipator.  The result acts on row-major vectorised
    states, and the vectorised identity is always a left null vector.
    """
    dev = np.abs(h_total - h_total.conj().T).max()
    if dev > HERMITICITY_TOL:
        raise ValueError(f"Hamiltonian not Hermitian (max deviation {dev:.2e})")
    liouv = -1j * commutator_super(h_total)
    for j in jumps:
        liouv += dissipator_super(j)
    return liouv


def ground_state(n: int) -> np.ndarray:
    """Density matrix |g...g><g...g|."""
    rho = np.zeros((2 ** n, 2 ** n), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def check_density_matrix(rho: np.ndarray, context: str = "state") -> np.ndarray:
    """Validate Hermiticity, unit trace and positivity; returns rho unchanged."""
    dev = np.abs(rho - rho.conj().T).max()
    if dev > HERMITICITY_TOL:
        raise ValueError(f"{context}: not Hermitian (max deviation {dev:.2e})")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValueError(f"{context}: trace {tr!r} differs from 1")
    lo = np.linalg.eigvalsh(rho).min()
    if lo < PSD_FLOOR:
        raise ValueError(f"{context}: negative eigenvalue {lo:.2e}")
    return rho
