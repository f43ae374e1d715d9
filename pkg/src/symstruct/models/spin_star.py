"""Central spin in a bath of K resonant spins with XY coupling.

The environment starts fully mixed, so the reduced dynamics is exactly
solvable through the angular-momentum decomposition of the bath: every
quantity is a binomially weighted sum over (j, m) sectors with ladder
eigenvalues h(j, m) = sqrt(j(j+1) - m(m-1)).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from ..generator import Trajectory
from ..linalg import Superoperator, TimeGrid, tensor_product
from .common import EYE2, SIGMA_M, SIGMA_P, SIGMA_X, SIGMA_Y, SIGMA_Z, bloch_superop, singular_flags

__all__ = [
    "SpinStarConfig",
    "SpinStarGenerator",
    "spinstar_exact_generator",
    "spinstar_exact_map",
    "spinstar_exact_trajectory",
    "spinstar_interaction",
    "spinstar_joint_hamiltonian",
    "spinstar_kappas",
    "spinstar_moments",
]

MAX_K_CLOSED_FORM = 30
MAX_K_JOINT = 12


@dataclass(frozen=True)
class SpinStarConfig:
    k: int
    g: float
    omega: float

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("need at least one environment spin")


def _jm_sectors(k: int):
    """(weight, h(j, m), h(j, -m)) for every (j, m); weights sum to one.

    j runs K/2, K/2 - 1, ... down to 0 or 1/2; the multiplicity of a j sector
    is d(j) = C(K, K/2 - j) - C(K, K/2 - j - 1).
    """
    if k > MAX_K_CLOSED_FORM:
        raise ValueError(f"K = {k} exceeds the closed-form limit {MAX_K_CLOSED_FORM}")
    weights, h_plus, h_minus = [], [], []
    two_j = k
    norm = 2.0**k
    while two_j >= 0:
        j = two_j / 2.0
        r = (k - two_j) // 2
        d = comb(k, r) - (comb(k, r - 1) if r >= 1 else 0)
        two_m = -two_j
        while two_m <= two_j:
            m = two_m / 2.0
            weights.append(d / norm)
            h_plus.append(np.sqrt(j * (j + 1) - m * (m - 1)))
            h_minus.append(np.sqrt(j * (j + 1) - m * (m + 1)))
            two_m += 2
        two_j -= 2
    return np.array(weights), np.array(h_plus), np.array(h_minus)


def spinstar_kappas(cfg: SpinStarConfig, grid: TimeGrid):
    """kappa_z(t) and kappa(t), the exact z- and coherence-damping factors."""
    w, hp, hm = _jm_sectors(cfg.k)
    t = grid.points[:, None]
    kappa_z = np.sum(w * np.cos(4.0 * hp * cfg.g * t), axis=1)
    kappa = np.sum(w * np.cos(2.0 * hp * cfg.g * t) * np.cos(2.0 * hm * cfg.g * t), axis=1)
    return kappa_z, kappa


def _kappa_derivatives(cfg: SpinStarConfig, grid: TimeGrid):
    w, hp, hm = _jm_sectors(cfg.k)
    g = cfg.g
    t = grid.points[:, None]
    d_kappa_z = np.sum(w * (-4.0 * hp * g) * np.sin(4.0 * hp * g * t), axis=1)
    d_kappa = np.sum(
        w
        * (
            -2.0 * hp * g * np.sin(2.0 * hp * g * t) * np.cos(2.0 * hm * g * t)
            - 2.0 * hm * g * np.cos(2.0 * hp * g * t) * np.sin(2.0 * hm * g * t)
        ),
        axis=1,
    )
    return d_kappa_z, d_kappa


def _bloch_components(rho0: np.ndarray):
    rho0 = np.asarray(rho0, dtype=complex)
    rz = float(np.real(rho0[0, 0] - rho0[1, 1]))
    rp = complex(rho0[0, 1])
    rm = complex(rho0[1, 0])
    return rz, rp, rm


def spinstar_exact_trajectory(cfg: SpinStarConfig, rho0: np.ndarray, grid: TimeGrid) -> Trajectory:
    """Exact reduced trajectory rho(t) = I/2 + kappa_z r_z sigma_z / 2
    + exp(-2 i omega t) kappa r_+ sigma_+ + h.c. (Schroedinger picture;
    the free splitting of H_S = omega sigma_z is 2 omega)."""
    rz0, rp0, rm0 = _bloch_components(rho0)
    kappa_z, kappa = spinstar_kappas(cfg, grid)
    phase = np.exp(-2j * cfg.omega * grid.points)
    states = (
        0.5 * EYE2[None, :, :]
        + 0.5 * (kappa_z * rz0)[:, None, None] * SIGMA_Z
        + (kappa * phase * rp0)[:, None, None] * SIGMA_P
        + (kappa * phase.conj() * rm0)[:, None, None] * SIGMA_M
    )
    obs = {
        "sigma_z": np.real(np.einsum("ij,tji->t", SIGMA_Z, states)),
        "sigma_x": np.real(np.einsum("ij,tji->t", SIGMA_X, states)),
        "sigma_y": np.real(np.einsum("ij,tji->t", SIGMA_Y, states)),
    }
    return Trajectory(grid, states, obs)


def spinstar_exact_map(cfg: SpinStarConfig, t: float, picture: str = "interaction") -> Superoperator:
    """Closed-form dynamical map, diagonal in the Bloch basis:
    I -> I, sigma_z -> kappa_z sigma_z, sigma_+- -> kappa sigma_+- (times the
    free phase exp(-+ 2 i omega t) in the Schroedinger picture)."""
    if picture not in ("interaction", "schrodinger"):
        raise ValueError(f"unknown picture {picture!r}")
    grid = TimeGrid(np.array([max(t, 0.0)]))
    kappa_z, kappa = spinstar_kappas(cfg, grid)
    phase = np.exp(-2j * cfg.omega * t) if picture == "schrodinger" else 1.0
    images = {
        "id": EYE2 / np.sqrt(2.0),
        "z": kappa_z[0] * SIGMA_Z / np.sqrt(2.0),
        "p": kappa[0] * phase * SIGMA_P,
        "m": kappa[0] * np.conj(phase) * SIGMA_M,
    }
    return Superoperator(2, bloch_superop(images))


@dataclass(frozen=True)
class SpinStarGenerator:
    """Exact generator data: L = (eta_z D_z - eta (D_+ + D_-)) / 2 in the
    interaction picture, with D_z[X] = sigma_z X sigma_z - X and D_+- the
    usual sigma_+- dissipators."""

    grid: TimeGrid
    eta_z: np.ndarray
    eta: np.ndarray
    kappa_z: np.ndarray
    kappa: np.ndarray
    singular: np.ndarray


def spinstar_exact_generator(cfg: SpinStarConfig, grid: TimeGrid) -> SpinStarGenerator:
    """Analytic generator rates eta(t) = kdot_z / kappa_z and
    eta_z(t) = kdot_z / (2 kappa_z) - kdot / kappa.

    Derived from L = (dLambda/dt) Lambda^{-1} with Lambda = diag(1, kappa,
    kappa, kappa_z) in the Bloch basis; singular wherever kappa or kappa_z
    vanishes.
    """
    kappa_z, kappa = spinstar_kappas(cfg, grid)
    d_kappa_z, d_kappa = _kappa_derivatives(cfg, grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        eta = d_kappa_z / kappa_z
        eta_z = 0.5 * d_kappa_z / kappa_z - d_kappa / kappa
    flags = singular_flags([kappa_z, kappa])
    return SpinStarGenerator(grid, eta_z, eta, kappa_z, kappa, flags)


def spinstar_moments(cfg: SpinStarConfig, n: int, m: int):
    """Environment moments Q_n = 2^-K <(J+ J-)^n> and
    R = 2^-K <(J+ J-)^(n-m) (J- J+)^m>."""
    if n > 12:
        raise ValueError("moment order limited to n <= 12")
    if not 0 <= m <= n:
        raise ValueError("need 0 <= m <= n")
    w, hp, hm = _jm_sectors(cfg.k)
    q_n = float(np.sum(w * hp ** (2 * n)))
    r_nm = float(np.sum(w * hp ** (2 * (n - m)) * hm ** (2 * m)))
    return q_n, r_nm


def spinstar_interaction(k: int) -> np.ndarray:
    """Unit-coupling interaction 2 (sigma_+ J_- + sigma_- J_+); multiply by g."""
    ne = 2**k
    j_minus = np.zeros((ne, ne), dtype=complex)
    for site in range(k):
        left = np.eye(2**site, dtype=complex)
        right = np.eye(2 ** (k - site - 1), dtype=complex)
        j_minus += np.kron(left, np.kron(SIGMA_M, right))
    return 2.0 * (tensor_product(SIGMA_P, j_minus) + tensor_product(SIGMA_M, j_minus.conj().T))


def spinstar_joint_hamiltonian(cfg: SpinStarConfig):
    """JointSystem with H_S = omega sigma_z, H_E = omega sum_k sigma_z^(k),
    H_SE = 2g (sigma_+ J_- + sigma_- J_+) and a fully mixed bath."""
    from ..extraction import JointSystem

    if cfg.k > MAX_K_JOINT:
        raise ValueError(f"K = {cfg.k} exceeds the joint-space limit {MAX_K_JOINT}")
    ne = 2**cfg.k
    h_sys = cfg.omega * SIGMA_Z
    diag = np.zeros(ne)
    for site in range(cfg.k):
        pattern = np.array([1.0, -1.0])
        diag += np.kron(
            np.kron(np.ones(2**site), pattern), np.ones(2 ** (cfg.k - site - 1))
        )
    h_env = cfg.omega * np.diag(diag).astype(complex)
    h_int = cfg.g * spinstar_interaction(cfg.k)
    rho_env = np.eye(ne, dtype=complex) / ne
    return JointSystem.build(h_sys, h_env, h_int, rho_env)
