"""First-principles kinetic coefficients from the joint Hamiltonian.

Strict energy conservation makes the interaction picture of H_SE
time-independent, so the joint propagator is exp(-i C t) with the fixed
commutator superoperator C = [H_SE, . ]. Truncating its Maclaurin or
Chebyshev expansion gives an order-M generator whose traces against the
eigenoperator basis yield the kinetic coefficients.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import jv

from .basis import (
    DegenerateSpectrumError,
    EigenoperatorBasis,
    FreeHamiltonian,
    bohr_spectrum,
    build_basis,
)
from .generator import (
    KineticCoefficients,
    SourceDrainRaw,
    kinetic_from_fit,
    solve_structure_equations,
    FitResult,
)
from .linalg import TimeGrid, is_hermitian, partial_trace_env, tensor_product

__all__ = [
    "ConvergenceWarning",
    "JointSystem",
    "SeriesSpec",
    "SpectralKernel",
    "chebychev_generator_action",
    "chebyshev_weights",
    "extract_kinetic_coefficients",
    "maclaurin_generator_action",
]

POSTULATE_RTOL = 1e-10
CENTERING_TOL = 1e-12


class ConvergenceWarning(UserWarning):
    """The polynomial order is too small for the requested time window."""


@dataclass(frozen=True)
class JointSystem:
    """System + environment + strictly energy-conserving interaction."""

    h_sys: np.ndarray
    h_env: np.ndarray
    h_int: np.ndarray
    rho_env: np.ndarray
    n_sys: int
    n_env: int
    free: FreeHamiltonian

    @classmethod
    def build(
        cls,
        h_sys: np.ndarray,
        h_env: np.ndarray,
        h_int: np.ndarray,
        rho_env: np.ndarray,
        postulate_rtol: float = POSTULATE_RTOL,
    ) -> "JointSystem":
        h_sys = np.asarray(h_sys, dtype=complex)
        h_env = np.asarray(h_env, dtype=complex)
        h_int = np.asarray(h_int, dtype=complex)
        rho_env = np.asarray(rho_env, dtype=complex)
        n_sys = h_sys.shape[0]
        n_env = h_env.shape[0]
        if h_int.shape != (n_sys * n_env,) * 2:
            raise ValueError(
                f"interaction has shape {h_int.shape}, expected {(n_sys * n_env,) * 2}"
            )
        for name, h in (("h_sys", h_sys), ("h_env", h_env), ("h_int", h_int)):
            scale = max(1.0, float(np.max(np.abs(h))) if h.size else 1.0)
            if not is_hermitian(h, 1e-12 * scale):
                raise ValueError(f"{name} is not Hermitian")
        # mean-field centering: tr_E(H_SE (I x rho_env)) is absorbed into H_S
        mean_field = partial_trace_env(h_int @ tensor_product(np.eye(n_sys), rho_env), n_sys, n_env)
        int_scale = max(1.0, float(np.max(np.abs(h_int))) if h_int.size else 1.0)
        if float(np.max(np.abs(mean_field))) > CENTERING_TOL * int_scale:
            warnings.warn(
                "interaction has a nonzero environment average; absorbing the "
                "mean-field part into the system Hamiltonian",
                stacklevel=2,
            )
            h_sys = h_sys + mean_field
            h_int = h_int - tensor_product(mean_field, np.eye(n_env))
        h_free = tensor_product(h_sys, np.eye(n_env)) + tensor_product(np.eye(n_sys), h_env)
        int_norm = float(np.linalg.norm(h_int))
        p1 = float(np.linalg.norm(h_free @ h_int - h_int @ h_free))
        if int_norm > 0 and p1 > postulate_rtol * int_norm:
            raise ValueError(
                f"strict energy conservation violated: ||[H_S + H_E, H_SE]|| = {p1:.3e} "
                f"(relative {p1 / int_norm:.3e})"
            )
        p2 = float(np.linalg.norm(rho_env @ h_env - h_env @ rho_env))
        if p2 > postulate_rtol * max(1.0, float(np.linalg.norm(h_env))):
            raise ValueError(f"environment state is not stationary: ||[rho_E, H_E]|| = {p2:.3e}")
        free = FreeHamiltonian.from_matrix(h_sys)
        return cls(h_sys, h_env, h_int, rho_env, n_sys, n_env, free)

    @property
    def h_joint(self) -> np.ndarray:
        return (
            tensor_product(self.h_sys, np.eye(self.n_env))
            + tensor_product(np.eye(self.n_sys), self.h_env)
            + self.h_int
        )

    def interaction_bound(self) -> float:
        """lambda_B = 2 ||H_SE||_2, a bound on the commutator spectrum."""
        if not hasattr(self, "_lam_b"):
            vals = np.linalg.eigvalsh(self.h_int)
            object.__setattr__(self, "_lam_b", 2.0 * float(np.max(np.abs(vals))))
        return self._lam_b

    def spectral_kernel(self) -> "SpectralKernel":
        if not hasattr(self, "_kernel"):
            object.__setattr__(self, "_kernel", SpectralKernel.from_joint(self))
        return self._kernel


@dataclass(frozen=True)
class SeriesSpec:
    kind: str  # "maclaurin" | "chebychev"
    order: int
    interval: float = 0.0  # [0, T] normalization window, chebychev only

    def __post_init__(self):
        if self.kind not in ("maclaurin", "chebychev"):
            raise ValueError(f"unknown series kind {self.kind!r}")
        if self.order < 1:
            raise ValueError("series order must be >= 1")
        if self.kind == "chebychev" and self.interval <= 0:
            raise ValueError("chebychev series needs a positive interval")


def _commutator(h: np.ndarray, y: np.ndarray) -> np.ndarray:
    return h @ y - y @ h


def maclaurin_generator_action(js: JointSystem, order: int, t: float, x: np.ndarray) -> np.ndarray:
    """Action of the order-M Maclaurin generator on a system operator.

    sum_{n=1..M} (-i)^n t^(n-1) / (n-1)! tr_E(ad_{H_SE}^n [x (x) rho_env]);
    the nested commutators are evaluated literally in the joint space.
    """
    y = tensor_product(np.asarray(x, dtype=complex), js.rho_env)
    out = np.zeros((js.n_sys, js.n_sys), dtype=complex)
    coef = 1.0 + 0.0j
    for n in range(1, order + 1):
        y = _commutator(js.h_int, y)
        coef *= -1j
        if n > 1:
            coef *= t / (n - 1)
        out += coef * partial_trace_env(y, js.n_sys, js.n_env)
    return out


def chebyshev_weights(order: int, r: float, lam_b: float) -> np.ndarray:
    """w_m = d/dt [(2 - delta_m0) (-i)^m J_m(r(t))] for m = 0..order."""
    ms = np.arange(order + 1)
    j = jv(np.arange(order + 2), r)
    jprime = np.empty(order + 1)
    jprime[0] = -j[1]
    if order >= 1:
        jm1 = jv(np.arange(0, order), r)
        jprime[1:] = 0.5 * (jm1 - j[2 : order + 2])
    return lam_b * (2.0 - (ms == 0)) * (-1j) ** ms * jprime


def chebychev_generator_action(
    js: JointSystem, order: int, interval: float, t: float, x: np.ndarray
) -> np.ndarray:
    """Action of the order-M Chebyshev generator on a system operator.

    Expands the joint propagator derivative in Chebyshev polynomials of the
    normalized commutator superoperator C / lambda_B via the three-term
    recurrence, with Bessel-derivative coefficients evaluated analytically.
    """
    if not 0.0 <= t <= interval + 1e-12:
        raise ValueError(f"t = {t} outside the expansion window [0, {interval}]")
    lam_b = js.interaction_bound()
    if lam_b == 0.0:
        return np.zeros((js.n_sys, js.n_sys), dtype=complex)
    if order < lam_b * interval + 10:
        warnings.warn(
            f"CONVERGENCE: order {order} < lambda_B T + 10 = {lam_b * interval + 10:.1f}; "
            "the Bessel tail is not yet negligible",
            ConvergenceWarning,
            stacklevel=2,
        )
    w = chebyshev_weights(order, lam_b * t, lam_b)
    y_prev = tensor_product(np.asarray(x, dtype=complex), js.rho_env)
    y_cur = _commutator(js.h_int, y_prev) / lam_b
    out = w[0] * partial_trace_env(y_prev, js.n_sys, js.n_env)
    if order >= 1:
        out += w[1] * partial_trace_env(y_cur, js.n_sys, js.n_env)
    for m in range(2, order + 1):
        y_next = 2.0 * _commutator(js.h_int, y_cur) / lam_b - y_prev
        out += w[m] * partial_trace_env(y_next, js.n_sys, js.n_env)
        y_prev, y_cur = y_cur, y_next
    return out


# ---------------------------------------------------------------------------
# batched extraction through the interaction spectrum
# ---------------------------------------------------------------------------


class SpectralKernel:
    """Eigenbasis of H_SE with precomputed trace weights.

    In the eigenbasis of H_SE the commutator superoperator acts elementwise
    as Delta_ab = w_a - w_b, so every polynomial of C reduces to elementwise
    functions of Delta. This is mathematically identical to the literal
    operator recurrences (cross-checked in the tests) and turns a whole-grid
    extraction into one diagonalization plus a handful of rotations.
    """

    def __init__(self, evals, vectors, n_sys, n_env, rho_env, scale=1.0):
        self.evals = evals
        self.vectors = vectors
        self.n_sys = n_sys
        self.n_env = n_env
        self.rho_env = rho_env
        self.scale = scale  # physical H_SE = scale * diagonalized matrix
        self._pair_cache: dict = {}

    @classmethod
    def from_joint(cls, js: JointSystem) -> "SpectralKernel":
        w, v = np.linalg.eigh(js.h_int)
        return cls(w, v, js.n_sys, js.n_env, js.rho_env)

    def rescaled(self, factor: float) -> "SpectralKernel":
        """Kernel for the same interaction scaled by a coupling factor."""
        k = SpectralKernel(
            self.evals, self.vectors, self.n_sys, self.n_env, self.rho_env, self.scale * factor
        )
        k._pair_cache = self._pair_cache  # pair weights are scale independent
        return k

    @property
    def lam_b(self) -> float:
        return 2.0 * float(np.max(np.abs(self.evals))) * abs(self.scale)

    def _rotate_out(self, s: np.ndarray) -> np.ndarray:
        """V^dag (S x I) V via a row reshuffle plus one matrix product."""
        v4 = self.vectors.reshape(self.n_sys, self.n_env, -1)
        sv = np.einsum("ij,jed->ied", s, v4).reshape(self.vectors.shape)
        return self.vectors.conj().T @ sv

    def _rotate_in(self, s: np.ndarray) -> np.ndarray:
        """V^dag (S x rho_env) V."""
        rho = self.rho_env
        v4 = self.vectors.reshape(self.n_sys, self.n_env, -1)
        if np.max(np.abs(rho - np.diag(np.diag(rho)))) < 1e-14:
            sv = np.einsum("ij,e,jed->ied", s, np.diag(rho), v4).reshape(self.vectors.shape)
        else:
            sv = np.einsum("ij,ef,jfd->ied", s, rho, v4).reshape(self.vectors.shape)
        return self.vectors.conj().T @ sv

    def pair_weights(self, basis: EigenoperatorBasis):
        """Elementwise weights K_ab for every harvested (out, in) trace pair.

        Ordered as: (F_a, F_a) for each transition, then (Pi_i, Pi_n) for all
        i, n. The harvested trace is sum_ab K_ab f(Delta_ab) for a polynomial
        term f of the commutator spectrum.
        """
        key = id(basis)
        if key in self._pair_cache:
            return self._pair_cache[key]
        outs = {}
        ins = {}
        pairs = []
        for idx, f in enumerate(basis.f_ops):
            outs[("f", idx)] = self._rotate_out(f)
            ins[("f", idx)] = self._rotate_in(f)
            pairs.append((("f", idx), ("f", idx)))
        for i, pi in enumerate(basis.projectors):
            outs[("pi", i)] = self._rotate_out(pi)
            ins[("pi", i)] = self._rotate_in(pi)
        for i in range(basis.dim):
            for n in range(basis.dim):
                pairs.append((("pi", i), ("pi", n)))
        weights = [outs[o].conj() * ins[i] for o, i in pairs]
        self._pair_cache[key] = (pairs, weights)
        return self._pair_cache[key]

    def series_traces(self, basis: EigenoperatorBasis, spec: SeriesSpec, grid: TimeGrid):
        """Harvested traces a[T, K] and b[T, N, N] of the truncated generator."""
        pairs, weights = self.pair_weights(basis)
        delta = (self.evals[:, None] - self.evals[None, :]) * self.scale
        n_pairs = len(pairs)
        t = grid.points
        if spec.kind == "maclaurin":
            moments = np.empty((spec.order, n_pairs), dtype=complex)
            phi = np.ones_like(delta)
            for n in range(1, spec.order + 1):
                phi = phi * delta
                for p in range(n_pairs):
                    moments[n - 1, p] = np.sum(weights[p] * phi)
            ns = np.arange(1, spec.order + 1)
            factorials = np.array([float(np.math.factorial(n - 1)) for n in ns])
            coefs = ((-1j) ** ns) * np.power(t[:, None], ns - 1) / factorials  # [T, M]
            traces = coefs @ moments  # [T, n_pairs]
        else:
            lam_b = self.lam_b
            if lam_b == 0.0:
                traces = np.zeros((len(t), n_pairs), dtype=complex)
            else:
                if spec.order < lam_b * spec.interval + 10:
                    warnings.warn(
                        f"CONVERGENCE: order {spec.order} < lambda_B T + 10 = "
                        f"{lam_b * spec.interval + 10:.1f}",
                        ConvergenceWarning,
                        stacklevel=2,
                    )
                if t[-1] > spec.interval + 1e-12:
                    raise ValueError("grid extends past the Chebyshev window")
                x = delta / lam_b
                cheb = np.empty((spec.order + 1, n_pairs), dtype=complex)
                t_prev = np.ones_like(x)
                t_cur = x
                for p in range(n_pairs):
                    cheb[0, p] = np.sum(weights[p] * t_prev)
                if spec.order >= 1:
                    for p in range(n_pairs):
                        cheb[1, p] = np.sum(weights[p] * t_cur)
                for m in range(2, spec.order + 1):
                    t_prev, t_cur = t_cur, 2.0 * x * t_cur - t_prev
                    for p in range(n_pairs):
                        cheb[m, p] = np.sum(weights[p] * t_cur)
                wmat = np.stack([chebyshev_weights(spec.order, lam_b * ti, lam_b) for ti in t])
                traces = wmat @ cheb
        n = basis.dim
        k = basis.n_transitions
        a = traces[:, :k]
        b = traces[:, k:].reshape(len(t), n, n)
        return a, b


def extract_kinetic_coefficients(
    js: JointSystem,
    spec: SeriesSpec,
    grid: TimeGrid,
    kernel: SpectralKernel | None = None,
    basis: EigenoperatorBasis | None = None,
):
    """Kinetic coefficients of the order-M generator on a time grid.

    Returns (KineticCoefficients, SourceDrainRaw). The free Hamiltonian must
    have a non-degenerate Bohr spectrum; lift it first otherwise.
    """
    _, degenerate = bohr_spectrum(js.free)
    if degenerate:
        raise DegenerateSpectrumError(
            "Bohr spectrum of the system Hamiltonian is degenerate; lift it first"
        )
    if basis is None:
        basis = build_basis(js.free)
    if kernel is None:
        kernel = js.spectral_kernel()
    a, b = kernel.series_traces(basis, spec, grid)
    t = len(grid)
    cs = np.zeros((t, basis.n_transitions))
    ps = np.zeros((t, basis.dim, basis.dim), dtype=complex)
    resid = np.zeros(t)
    for k in range(t):
        cs[k], ps[k], resid[k] = solve_structure_equations(a[k], b[k], basis)
    fit = FitResult(cs, ps, resid)
    return kinetic_from_fit(grid, fit, basis)
