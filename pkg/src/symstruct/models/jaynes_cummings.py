"""Resonant Jaynes-Cummings qubit: closed-form maps, rates and joint matrices.

A qubit exchanging excitations with a single bosonic mode on resonance under
the rotating-wave approximation. With the environment diagonal in the Fock
basis, the reduced dynamics is phase covariant and everything reduces to
Fock-weighted sums of w(n, t) = cos(g sqrt(n) t).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..linalg import Superoperator, TimeGrid, tensor_product
from .common import EYE2, SIGMA_M, SIGMA_P, SIGMA_Z, bloch_superop, singular_flags

__all__ = [
    "JCBlochFunctions",
    "JCConfig",
    "JCRates",
    "jc_bloch_functions",
    "jc_exact_map",
    "jc_joint_hamiltonian",
    "jc_rates",
]


@dataclass(frozen=True)
class JCConfig:
    """Coupling g, qubit/mode frequency omega, Fock-diagonal environment."""

    g: float
    omega: float
    env_populations: tuple

    def __post_init__(self):
        p = np.asarray(self.env_populations, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("env_populations must be a non-empty 1d sequence")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("env_populations must be nonnegative and sum to one")
        object.__setattr__(self, "env_populations", tuple(float(x) for x in p))

    @classmethod
    def vacuum(cls, g: float, omega: float, n_trunc: int = 1) -> "JCConfig":
        return cls(g, omega, (1.0,) + (0.0,) * n_trunc)

    @classmethod
    def fock(cls, k: int, g: float, omega: float, n_trunc: int | None = None) -> "JCConfig":
        n_trunc = k + 1 if n_trunc is None else n_trunc
        p = [0.0] * (n_trunc + 1)
        p[k] = 1.0
        return cls(g, omega, tuple(p))

    @property
    def n_trunc(self) -> int:
        return len(self.env_populations) - 1

    @property
    def max_populated(self) -> int:
        p = np.asarray(self.env_populations)
        return int(np.max(np.nonzero(p)[0]))


@dataclass(frozen=True)
class JCBlochFunctions:
    """Bloch-ball contraction/translation functions and their derivatives."""

    grid: TimeGrid
    eta_par: np.ndarray
    eta_perp: np.ndarray
    r: np.ndarray
    d_eta_par: np.ndarray
    d_eta_perp: np.ndarray
    d_r: np.ndarray


@dataclass(frozen=True)
class JCRates:
    grid: TimeGrid
    eta_par: np.ndarray
    eta_perp: np.ndarray
    r: np.ndarray
    gamma_plus: np.ndarray
    gamma_minus: np.ndarray
    gamma_z: np.ndarray
    singular: np.ndarray  # bool per grid point


def jc_bloch_functions(cfg: JCConfig, grid: TimeGrid) -> JCBlochFunctions:
    """eta_par, eta_perp, r and their analytic time derivatives.

    All are finite Fock sums over w(n, t) = cos(g sqrt(n) t), differentiated
    term by term (no numerical differentiation anywhere).
    """
    t = grid.points
    g = cfg.g
    eta_par = -np.ones_like(t)
    r = np.zeros_like(t)
    eta_perp = np.zeros_like(t)
    d_eta_par = np.zeros_like(t)
    d_r = np.zeros_like(t)
    d_eta_perp = np.zeros_like(t)
    for n, p in enumerate(cfg.env_populations):
        if p == 0.0:
            continue
        sn = np.sqrt(n)
        sn1 = np.sqrt(n + 1.0)
        wn = np.cos(g * sn * t)
        wn1 = np.cos(g * sn1 * t)
        eta_par += p * (wn**2 + wn1**2)
        r += p * (wn1**2 - wn**2)
        eta_perp += p * wn * wn1
        s2n = np.sin(2 * g * sn * t)
        s2n1 = np.sin(2 * g * sn1 * t)
        d_eta_par += p * (-g * sn * s2n - g * sn1 * s2n1)
        d_r += p * (-g * sn1 * s2n1 + g * sn * s2n)
        d_eta_perp += p * (
            -g * sn * np.sin(g * sn * t) * wn1 - g * sn1 * wn * np.sin(g * sn1 * t)
        )
    return JCBlochFunctions(grid, eta_par, eta_perp, r, d_eta_par, d_eta_perp, d_r)


def jc_rates(cfg: JCConfig, grid: TimeGrid) -> JCRates:
    """Phase-covariant rates gamma_+, gamma_-, gamma_z on the grid.

    Flagged SINGULAR wherever eta_par or eta_perp vanishes (pointwise or by a
    sign change between neighbouring grid points); the rates diverge there.
    """
    f = jc_bloch_functions(cfg, grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_par = f.d_eta_par / f.eta_par
        gamma_plus = 0.5 * (f.d_r - (1.0 + f.r) * log_par)
        gamma_minus = 0.5 * (-f.d_r - (1.0 - f.r) * log_par)
        gamma_z = 0.25 * (log_par - 2.0 * f.d_eta_perp / f.eta_perp)
    flags = singular_flags([f.eta_par, f.eta_perp])
    return JCRates(grid, f.eta_par, f.eta_perp, f.r, gamma_plus, gamma_minus, gamma_z, flags)


def jc_exact_map(cfg: JCConfig, t: float, picture: str = "interaction") -> Superoperator:
    """Exact qubit map: Bloch action (x, y, z) -> (eta_perp x, eta_perp y,
    eta_par z + r); the Schroedinger picture adds the free coherence phase."""
    grid = TimeGrid(np.array([max(t, 0.0)]))
    f = jc_bloch_functions(cfg, grid)
    eta_par, eta_perp, r = f.eta_par[0], f.eta_perp[0], f.r[0]
    phase = np.exp(-1j * cfg.omega * t) if picture == "schrodinger" else 1.0
    if picture not in ("interaction", "schrodinger"):
        raise ValueError(f"unknown picture {picture!r}")
    images = {
        "id": (EYE2 + r * SIGMA_Z) / np.sqrt(2.0),
        "z": eta_par * SIGMA_Z / np.sqrt(2.0),
        "p": eta_perp * phase * SIGMA_P,
        "m": eta_perp * np.conj(phase) * SIGMA_M,
    }
    return Superoperator(2, bloch_superop(images))


def jc_joint_hamiltonian(cfg: JCConfig, order: int = 0):
    """Joint matrices H_S, H_E, H_SE and the environment state as a JointSystem.

    order is the polynomial-series order the system will be used with; the
    Fock truncation must leave that much headroom above the highest populated
    level, otherwise commutators leak past the cut and results are wrong.
    """
    from ..extraction import JointSystem

    headroom = max(int(order), 1)
    if cfg.n_trunc < cfg.max_populated + headroom:
        raise ValueError(
            f"insufficient truncation: n_trunc={cfg.n_trunc} < "
            f"max populated ({cfg.max_populated}) + headroom ({headroom}); "
            "extend env_populations with zeros"
        )
    ne = cfg.n_trunc + 1
    n_op = np.diag(np.arange(ne, dtype=float)).astype(complex)
    b = np.diag(np.sqrt(np.arange(1, ne, dtype=float)), k=1).astype(complex)
    h_sys = 0.5 * cfg.omega * SIGMA_Z
    h_env = cfg.omega * n_op
    h_int = cfg.g * (tensor_product(SIGMA_P, b) + tensor_product(SIGMA_M, b.conj().T))
    rho_env = np.diag(np.asarray(cfg.env_populations, dtype=complex))
    return JointSystem.build(h_sys, h_env, h_int, rho_env)
