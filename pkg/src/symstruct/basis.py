"""Eigenoperator bases of a free Hamiltonian and Bohr-spectrum tooling.

The transition operators F_nm = |n><m| (n != m) and the energy projectors
Pi_j = |j><j| of a non-degenerate free Hamiltonian diagonalize, respectively
block-diagonalize, every superoperator that commutes with the free evolution.
This module builds that basis, checks and lifts Bohr-frequency degeneracies,
splits operators into frequency modes, and measures how far a superoperator is
from the block structure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import Superoperator, hs_inner, vec

__all__ = [
    "BlockResiduals",
    "BohrSpectrum",
    "DegenerateSpectrumError",
    "EigenoperatorBasis",
    "FreeHamiltonian",
    "LiftReport",
    "bohr_spectrum",
    "build_basis",
    "lift_degeneracy",
    "mode_decompose",
    "superop_in_basis",
    "verify_block_structure",
]

#: default relative tolerance used to call two Bohr frequencies degenerate
DEGENERACY_RTOL = 1e-9


class DegenerateSpectrumError(ValueError):
    """Raised when a construction requires a non-degenerate spectrum."""


@dataclass(frozen=True)
class FreeHamiltonian:
    """Hermitian Hamiltonian with sorted spectrum and phase-fixed eigenvectors."""

    matrix: np.ndarray
    energies: np.ndarray  # ascending
    vectors: np.ndarray  # columns, orthonormal

    @classmethod
    def from_matrix(cls, h: np.ndarray, herm_tol: float = 1e-12) -> "FreeHamiltonian":
        h = np.asarray(h, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError(f"Hamiltonian must be square, got {h.shape}")
        herm = float(np.max(np.abs(h - h.conj().T)))
        if herm > herm_tol:
            raise ValueError(f"Hamiltonian not Hermitian: residual {herm:.3e}")
        w, v = np.linalg.eigh(h)
        # fix each eigenvector's phase: largest-magnitude component real positive
        for k in range(v.shape[1]):
            idx = int(np.argmax(np.abs(v[:, k])))
            z = v[idx, k]
            if np.abs(z) > 0:
                v[:, k] *= np.conj(z) / np.abs(z)
        return cls(h, w, v)

    @property
    def dim(self) -> int:
        return self.energies.size

    def spectral_width(self) -> float:
        return float(self.energies[-1] - self.energies[0])

    def propagator(self, t: float) -> np.ndarray:
        """U_S(t) = exp(-i H t)."""
        return (self.vectors * np.exp(-1j * self.energies * t)) @ self.vectors.conj().T


@dataclass(frozen=True)
class BohrSpectrum:
    """All ordered transition frequencies w_nm = e_n - e_m, n != m."""

    transitions: tuple  # ((n, m), ...) in basis order
    frequencies: np.ndarray
    min_gap: float  # smallest |w_a - w_b| over distinct transition pairs

    def is_degenerate(self, tol: float) -> bool:
        return self.min_gap < tol


@dataclass(frozen=True)
class EigenoperatorBasis:
    """Ordered operator basis {F_1..F_{N(N-1)}, Pi_1..Pi_N} plus the traceless
    diagonal set {P_1..P_{N-1}, P_N = I/sqrt(N)} spanning the same invariant
    subspace as the projectors."""

    dim: int
    energies: np.ndarray
    transitions: tuple  # ordered (n, m) pairs, n != m
    bohr_frequencies: np.ndarray  # per transition
    f_ops: np.ndarray  # [N(N-1), N, N]
    projectors: np.ndarray  # [N, N, N]
    diag_ops: np.ndarray  # [N, N, N], P_N = I/sqrt(N) last

    @property
    def n_transitions(self) -> int:
        return self.dim * (self.dim - 1)

    def elements(self) -> np.ndarray:
        """The {S} basis: transition operators first, then projectors."""
        return np.concatenate([self.f_ops, self.projectors], axis=0)

    def t_elements(self) -> np.ndarray:
        """The {T} basis: transition operators, then traceless diagonal set."""
        return np.concatenate([self.f_ops, self.diag_ops], axis=0)

    def transition_index(self, n: int, m: int) -> int:
        return self.transitions.index((n, m))

    def diag_overlap_matrix(self) -> np.ndarray:
        """Real orthogonal W with P_k = sum_i W[k, i] Pi_i."""
        return np.real(np.einsum("kii->ki", self.diag_ops))


def _pairs(n: int) -> list[tuple[int, int]]:
    return [(a, b) for a in range(n) for b in range(n) if a != b]


def bohr_spectrum(h: FreeHamiltonian, tol: float | None = None) -> tuple[BohrSpectrum, bool]:
    """All N(N-1) transition frequencies and a degeneracy verdict.

    Returns (spectrum, degenerate); degenerate is True when the smallest gap
    between distinct transition frequencies is below tol (default: relative
    DEGENERACY_RTOL of the spectral width, with an absolute floor).
    """
    e = h.energies
    pairs = _pairs(h.dim)
    freqs = np.array([e[n] - e[m] for n, m in pairs])
    if len(freqs) < 2:
        min_gap = np.inf
    else:
        diff = np.abs(freqs[:, None] - freqs[None, :])
        min_gap = float(np.min(diff[~np.eye(len(freqs), dtype=bool)]))
    if tol is None:
        tol = DEGENERACY_RTOL * max(h.spectral_width(), 1.0)
    spec = BohrSpectrum(tuple(pairs), freqs, min_gap)
    return spec, spec.is_degenerate(tol)


def build_basis(h: FreeHamiltonian) -> EigenoperatorBasis:
    """Construct the full ordered eigenoperator basis of a free Hamiltonian.

    Degenerate energy levels are rejected: the spectral construction assumes a
    non-degenerate spectrum (lift first).
    """
    n = h.dim
    e = h.energies
    if n > 1:
        level_gap = float(np.min(np.diff(e)))
        if level_gap < DEGENERACY_RTOL * max(h.spectral_width(), 1.0):
            raise DegenerateSpectrumError(
                f"degenerate energy levels (smallest gap {level_gap:.3e}); "
                "use lift_degeneracy first"
            )
    v = h.vectors
    pairs = _pairs(n)
    f_ops = np.array([np.outer(v[:, a], v[:, b].conj()) for a, b in pairs])
    freqs = np.array([e[a] - e[b] for a, b in pairs])
    projectors = np.array([np.outer(v[:, j], v[:, j].conj()) for j in range(n)])
    diag_ops = np.zeros((n, n, n), dtype=complex)
    for j in range(1, n):
        # normalized diagonal Gell-Mann operator on levels 0..j
        op = sum(projectors[l] for l in range(j)) - j * projectors[j]
        diag_ops[j - 1] = op / np.sqrt(j * (j + 1))
    diag_ops[n - 1] = np.eye(n) / np.sqrt(n)
    return EigenoperatorBasis(n, e.copy(), tuple(pairs), freqs, f_ops, projectors, diag_ops)


@dataclass(frozen=True)
class LiftReport:
    n_shifts: int
    operator_distance: float  # ||H - H'||_2 = max level shift
    level_shifts: np.ndarray


def lift_degeneracy(h: FreeHamiltonian, epsilon: float, max_rounds: int = 10000):
    """Shift colliding energy levels upward by multiples of epsilon until all
    Bohr frequencies are separated by at least epsilon/2.

    Returns (lifted FreeHamiltonian, LiftReport). Raises if epsilon is so
    large that the shifts reorder the spectrum.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    n = h.dim
    e = h.energies.copy()
    pairs = _pairs(n)
    shifts = 0
    for _ in range(max_rounds):
        freqs = np.array([e[a] - e[b] for a, b in pairs])
        collision = None
        for i in range(len(pairs)):
            for j in range(i + 1, len(pairs)):
                if abs(freqs[i] - freqs[j]) < epsilon / 2:
                    collision = (i, j)
                    break
            if collision:
                break
        if collision is None:
            break
        i, j = collision
        levels = set(pairs[i]) | set(pairs[j])
        top = max(levels, key=lambda k: (e[k], k))
        e[top] += epsilon
        shifts += 1
    else:
        raise RuntimeError("degeneracy lifting did not converge")
    if np.any(np.diff(e) <= 0):
        raise ValueError("epsilon too large: lifted spectrum is reordered")
    level_shifts = e - h.energies
    h_new = (h.vectors * e) @ h.vectors.conj().T
    lifted = FreeHamiltonian(h_new, e, h.vectors)
    report = LiftReport(shifts, float(np.max(np.abs(level_shifts))), level_shifts)
    return lifted, report


def mode_decompose(
    x: np.ndarray, basis: EigenoperatorBasis, tol: float | None = None
) -> dict[float, np.ndarray]:
    """Split an operator into asymmetry modes, keyed by Bohr frequency.

    Transitions whose frequencies agree within tol share a mode; the diagonal
    (invariant) part is the omega = 0 mode. The modes sum back to x.
    """
    x = np.asarray(x, dtype=complex)
    if x.shape != (basis.dim, basis.dim):
        raise ValueError(f"operator shape {x.shape} != basis dim {basis.dim}")
    if tol is None:
        spread = float(np.max(np.abs(basis.bohr_frequencies))) if basis.n_transitions else 1.0
        tol = DEGENERACY_RTOL * max(spread, 1.0)
    modes: dict[float, np.ndarray] = {}
    zero = np.zeros_like(x)
    for j in range(basis.dim):
        pi = basis.projectors[j]
        zero = zero + hs_inner(pi, x) * pi
    modes[0.0] = zero
    order = np.argsort(basis.bohr_frequencies, kind="stable")
    current_key = None
    for idx in order:
        w = float(basis.bohr_frequencies[idx])
        comp = hs_inner(basis.f_ops[idx], x) * basis.f_ops[idx]
        if current_key is not None and abs(w - current_key) <= tol:
            modes[current_key] = modes[current_key] + comp
        else:
            current_key = w
            modes[w] = modes.get(w, np.zeros_like(x)) + comp
    return modes


def superop_in_basis(s, elements: np.ndarray) -> np.ndarray:
    """Matrix elements M[a, b] = <E_a, S[E_b]> in an orthonormal operator basis."""
    m = s.matrix if isinstance(s, Superoperator) else np.asarray(s, dtype=complex)
    vecs = np.stack([vec(e) for e in elements])  # [K, N^2]
    return vecs.conj() @ m @ vecs.T


@dataclass(frozen=True)
class BlockResiduals:
    """Deviations from the symmetric block structure (F-block diagonal,
    no F <-> Pi coupling, arbitrary invariant block)."""

    f_offdiag: float
    coupling: float
    invariant_block: np.ndarray

    def ok(self, tol: float) -> bool:
        return self.f_offdiag <= tol and self.coupling <= tol


def verify_block_structure(s, basis: EigenoperatorBasis) -> BlockResiduals:
    m = superop_in_basis(s, basis.elements())
    k = basis.n_transitions
    f_block = m[:k, :k]
    f_off = float(np.max(np.abs(f_block - np.diag(np.diag(f_block))))) if k else 0.0
    coupling = 0.0
    if k:
        coupling = max(float(np.max(np.abs(m[:k, k:]))), float(np.max(np.abs(m[k:, :k]))))
    return BlockResiduals(f_off, coupling, m[k:, k:])
