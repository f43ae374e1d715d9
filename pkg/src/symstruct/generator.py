"""Assembly, propagation and extraction of time-local generators.

The generator structure used throughout:

    L(t)[X] = -i [Hbar(t), X]
              + sum_a c_a(t) (F_a X F_a^dag - {F_a^dag F_a, X}/2)
              + sum_ij d_ij(t) (P_i X P_j^dag - {P_j^dag P_i, X}/2)

with F_a the transition eigenoperators, P_i the traceless diagonal set, c
real (possibly negative), d Hermitian, Hbar Hermitian traceless. Everything
here is picture-agnostic: the coefficients define the generator, nothing
more.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .basis import EigenoperatorBasis, superop_in_basis, verify_block_structure
from .linalg import (
    Superoperator,
    TimeGrid,
    choi_matrix,
    is_hermitian,
    partial_trace_env,
    tensor_product,
    unvec,
    vec,
)

__all__ = [
    "ExtractionReport",
    "FitResult",
    "KineticCoefficients",
    "SourceDrainRaw",
    "SymmetryError",
    "TraceDriftError",
    "Trajectory",
    "assemble_generator",
    "assemble_generator_values",
    "dissipator_matrix",
    "extract_generator",
    "fit_coefficients_from_generator",
    "kinetic_from_fit",
    "map_from_joint_unitary",
    "propagate",
    "propagate_map",
    "raw_to_gkls",
]

#: target for ||L|| * h per integrator substep
RK4_STEP_TARGET = 0.05


class SymmetryError(ValueError):
    """A superoperator does not have the symmetric block structure."""


class TraceDriftError(RuntimeError):
    """Trace preservation was lost during propagation (step too large)."""


@dataclass(frozen=True)
class KineticCoefficients:
    """Time-sampled kinetic coefficients of the symmetric generator."""

    grid: TimeGrid
    c: np.ndarray  # [T, N(N-1)] real transition rates
    d: np.ndarray  # [T, N-1, N-1] complex Hermitian
    hbar: np.ndarray  # [T, N, N] Hermitian traceless effective Hamiltonian

    def __post_init__(self):
        t = len(self.grid)
        c = np.asarray(self.c, dtype=float)
        d = np.asarray(self.d, dtype=complex)
        hb = np.asarray(self.hbar, dtype=complex)
        if c.shape[0] != t or d.shape[0] != t or hb.shape[0] != t:
            raise ValueError("coefficient arrays must match the grid length")
        if not np.all(np.isfinite(c)):
            raise ValueError("c contains non-finite entries")
        if float(np.max(np.abs(d - d.conj().transpose(0, 2, 1)), initial=0.0)) > 1e-12:
            raise ValueError("d is not Hermitian at every grid point")
        if float(np.max(np.abs(hb - hb.conj().transpose(0, 2, 1)), initial=0.0)) > 1e-12:
            raise ValueError("hbar is not Hermitian at every grid point")
        if float(np.max(np.abs(np.trace(hb, axis1=1, axis2=2)), initial=0.0)) > 1e-12:
            raise ValueError("hbar is not traceless at every grid point")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "hbar", hb)

    @classmethod
    def zeros(cls, grid: TimeGrid, dim: int) -> "KineticCoefficients":
        t = len(grid)
        return cls(
            grid,
            np.zeros((t, dim * (dim - 1))),
            np.zeros((t, dim - 1, dim - 1), dtype=complex),
            np.zeros((t, dim, dim), dtype=complex),
        )


@dataclass(frozen=True)
class SourceDrainRaw:
    """Raw Hermitian coefficient matrices p_ij of the projector-sandwich term."""

    grid: TimeGrid
    p: np.ndarray  # [T, N, N]

    def __post_init__(self):
        p = np.asarray(self.p, dtype=complex)
        if p.shape[0] != len(self.grid):
            raise ValueError("p must match the grid length")
        if float(np.max(np.abs(p - p.conj().transpose(0, 2, 1)), initial=0.0)) > 1e-12:
            raise ValueError("p is not Hermitian at every grid point")
        object.__setattr__(self, "p", p)


@dataclass(frozen=True)
class Trajectory:
    grid: TimeGrid
    states: np.ndarray  # [T, N, N]
    observables: dict = field(default_factory=dict)


def dissipator_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix of X -> A X B^dag - {B^dag A, X}/2 under column stacking."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    n = a.shape[0]
    ba = b.conj().T @ a
    eye = np.eye(n)
    return np.kron(b.conj(), a) - 0.5 * (np.kron(eye, ba) + np.kron(ba.T, eye))


def assemble_generator_values(
    c: np.ndarray, d: np.ndarray, hbar: np.ndarray, basis: EigenoperatorBasis
) -> Superoperator:
    """Assemble the generator from single-time coefficient values."""
    n = basis.dim
    c = np.asarray(c, dtype=float)
    d = np.asarray(d, dtype=complex)
    hbar = np.asarray(hbar, dtype=complex)
    if c.shape != (basis.n_transitions,):
        raise ValueError(f"c has shape {c.shape}, expected ({basis.n_transitions},)")
    if d.shape != (n - 1, n - 1):
        raise ValueError(f"d has shape {d.shape}, expected {(n - 1, n - 1)}")
    if not is_hermitian(d):
        raise ValueError("d must be Hermitian")
    eye = np.eye(n)
    m = -1j * (np.kron(eye, hbar) - np.kron(hbar.T, eye))
    for a, f in zip(c, basis.f_ops):
        if a != 0.0:
            m = m + a * dissipator_matrix(f, f)
    for i in range(n - 1):
        for j in range(n - 1):
            if d[i, j] != 0.0:
                m = m + d[i, j] * dissipator_matrix(basis.diag_ops[i], basis.diag_ops[j])
    return Superoperator(n, m)


def assemble_generator(
    coeffs: KineticCoefficients, basis: EigenoperatorBasis, t_index: int
) -> Superoperator:
    return assemble_generator_values(
        coeffs.c[t_index], coeffs.d[t_index], coeffs.hbar[t_index], basis
    )


def raw_to_gkls(p: np.ndarray, basis: EigenoperatorBasis):
    """Split the raw projector-sandwich term into (d block, Hbar).

    Rotates p from the projector basis to the traceless diagonal set and peels
    off the row/column belonging to P_N = I/sqrt(N); the anticommutator part
    is fixed by trace preservation, the anti-Hermitian remainder is Hbar.
    """
    p = np.asarray(p, dtype=complex)
    n = basis.dim
    if p.shape != (n, n):
        raise ValueError(f"p has shape {p.shape}, expected {(n, n)}")
    if not is_hermitian(p, 1e-10):
        raise ValueError("p must be Hermitian")
    w = basis.diag_overlap_matrix()
    d_full = w @ p @ w.T
    d = d_full[: n - 1, : n - 1]
    p_hat = np.zeros((n, n), dtype=complex)
    for i in range(n - 1):
        p_hat += d_full[i, n - 1] * basis.diag_ops[i]
    p_hat /= np.sqrt(n)
    hbar = (p_hat.conj().T - p_hat) / 2j
    return d, hbar


def _harvest(l_matrix: np.ndarray, basis: EigenoperatorBasis):
    """Diagonal F-block entries a_alpha and invariant block B[i, n] = tr(Pi_i L[Pi_n])."""
    m = superop_in_basis(l_matrix, basis.elements())
    k = basis.n_transitions
    return np.diag(m[:k, :k]).copy(), m[k:, k:].copy()


def solve_structure_equations(a: np.ndarray, b: np.ndarray, basis: EigenoperatorBasis):
    """Recover transition rates c and raw p from harvested traces.

    a[alpha] = tr(F_alpha^dag L[F_alpha]), b[i, n] = tr(Pi_i L[Pi_n]).
    The invariant-block off-diagonals give the rates directly; the diagonal
    equations then give the source-drain coefficients.
    """
    n = basis.dim
    c = np.zeros(basis.n_transitions)
    imag_resid = 0.0
    for idx, (i, nn) in enumerate(basis.transitions):
        val = b[i, nn]
        c[idx] = val.real
        imag_resid = max(imag_resid, abs(val.imag))
    colsum = np.zeros(n)
    for idx, (i, nn) in enumerate(basis.transitions):
        colsum[nn] += c[idx]
    p = np.zeros((n, n), dtype=complex)
    for idx, (nn, mm) in enumerate(basis.transitions):
        p[nn, mm] = a[idx] + 0.5 * (colsum[nn] + colsum[mm])
    for nn in range(n):
        p[nn, nn] = b[nn, nn].real + colsum[nn]
        imag_resid = max(imag_resid, abs(b[nn, nn].imag))
    herm_resid = float(np.max(np.abs(p - p.conj().T)))
    p = (p + p.conj().T) / 2.0
    return c, p, max(imag_resid, herm_resid / 2.0)


@dataclass(frozen=True)
class FitResult:
    c: np.ndarray  # [T, N(N-1)] real
    p: np.ndarray  # [T, N, N] Hermitian
    residuals: np.ndarray  # [T] reassembly sup-error


def _p_superop(p: np.ndarray, basis: EigenoperatorBasis) -> np.ndarray:
    n = basis.dim
    m = np.zeros((n * n, n * n), dtype=complex)
    for i in range(n):
        for j in range(n):
            if p[i, j] != 0.0:
                m += p[i, j] * np.kron(basis.projectors[j].conj(), basis.projectors[i])
    return m


def fit_coefficients_from_generator(
    generators, basis: EigenoperatorBasis, block_tol: float = 1e-6
) -> FitResult:
    """Harvest kinetic coefficients from time-local generators.

    Each generator must pass the block-structure check at block_tol, else the
    dynamics does not carry the assumed symmetry and the fit is meaningless.
    """
    if isinstance(generators, Superoperator):
        generators = [generators]
    t = len(generators)
    cs = np.zeros((t, basis.n_transitions))
    ps = np.zeros((t, basis.dim, basis.dim), dtype=complex)
    residuals = np.zeros(t)
    for k, gen in enumerate(generators):
        res = verify_block_structure(gen, basis)
        if not res.ok(block_tol):
            raise SymmetryError(
                f"block-structure residuals (f_offdiag={res.f_offdiag:.3e}, "
                f"coupling={res.coupling:.3e}) exceed {block_tol:.1e} at index {k}"
            )
        a, b = _harvest(gen.matrix, basis)
        c, p, solve_resid = solve_structure_equations(a, b, basis)
        cs[k] = c
        ps[k] = p
        # reassemble in the raw (Eq.-17 style) form and compare
        m = _p_superop(p, basis)
        for idx, f in enumerate(basis.f_ops):
            m = m + c[idx] * dissipator_matrix(f, f)
        residuals[k] = max(float(np.max(np.abs(m - gen.matrix))), solve_resid)
    return FitResult(cs, ps, residuals)


def kinetic_from_fit(grid: TimeGrid, fit: FitResult, basis: EigenoperatorBasis):
    """Convert fitted (c, p) series into (KineticCoefficients, SourceDrainRaw)."""
    t = len(grid)
    n = basis.dim
    d = np.zeros((t, n - 1, n - 1), dtype=complex)
    hb = np.zeros((t, n, n), dtype=complex)
    for k in range(t):
        d[k], hb[k] = raw_to_gkls(fit.p[k], basis)
    coeffs = KineticCoefficients(grid, fit.c, d, hb)
    return coeffs, SourceDrainRaw(grid, fit.p)


# ---------------------------------------------------------------------------
# propagation
# ---------------------------------------------------------------------------


def _grid_superops(coeffs: KineticCoefficients, basis: EigenoperatorBasis) -> np.ndarray:
    return np.stack(
        [assemble_generator(coeffs, basis, k).matrix for k in range(len(coeffs.grid))]
    )


def _rk4_sweep(ls: np.ndarray, grid: TimeGrid, y0: np.ndarray, monitor, drift_tol: float):
    """Integrate dy/dt = L(t) y with L linear between grid samples.

    The generator is linear in its coefficients, so linear interpolation of
    the coefficients equals linear interpolation of the assembled matrices.
    """
    points = grid.points
    norms = np.linalg.norm(ls, axis=(1, 2))
    y = y0.astype(complex)
    out = [y.copy()]
    for k in range(len(points) - 1):
        h_full = points[k + 1] - points[k]
        scale = max(norms[k], norms[k + 1])
        n_sub = max(1, int(np.ceil(scale * h_full / RK4_STEP_TARGET)))
        h = h_full / n_sub
        l0, l1 = ls[k], ls[k + 1]

        def l_at(s: float):
            return l0 + (s / h_full) * (l1 - l0) if h_full > 0 else l0

        for j in range(n_sub):
            s = j * h
            la, lm, lb = l_at(s), l_at(s + h / 2), l_at(s + h)
            k1 = la @ y
            k2 = lm @ (y + 0.5 * h * k1)
            k3 = lm @ (y + 0.5 * h * k2)
            k4 = lb @ (y + h * k3)
            y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        drift = monitor(y)
        if drift > drift_tol:
            raise TraceDriftError(
                f"trace drift {drift:.3e} > {drift_tol:.1e} at t = {points[k + 1]:.6g}; "
                "refine the coefficient grid"
            )
        out.append(y.copy())
    return np.stack(out)


def propagate(
    coeffs: KineticCoefficients,
    basis: EigenoperatorBasis,
    rho0: np.ndarray,
    observables: dict | None = None,
    drift_tol: float = 1e-6,
    state_tol: float = 1e-8,
    validate_states: bool = True,
) -> Trajectory:
    """Integrate drho/dt = L(t)[rho] over the coefficient grid with RK4."""
    n = basis.dim
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (n, n):
        raise ValueError(f"rho0 has shape {rho0.shape}, expected {(n, n)}")
    ls = _grid_superops(coeffs, basis)
    ys = _rk4_sweep(ls, coeffs.grid, vec(rho0), lambda y: abs(np.sum(y[:: n + 1]) - 1.0), drift_tol)
    states = np.stack([unvec(y, (n, n)) for y in ys])
    if validate_states:
        herm = float(np.max(np.abs(states - states.conj().transpose(0, 2, 1))))
        min_eig = min(
            float(np.linalg.eigvalsh((s + s.conj().T) / 2).min()) for s in states
        )
        if herm > state_tol or min_eig < -state_tol:
            raise TraceDriftError(
                f"propagated states leave the physical set "
                f"(hermiticity {herm:.3e}, min eigenvalue {min_eig:.3e})"
            )
    obs = {}
    for name, op in (observables or {}).items():
        obs[name] = np.real(np.einsum("ij,tji->t", np.asarray(op, dtype=complex), states))
    return Trajectory(coeffs.grid, states, obs)


def propagate_map(
    coeffs: KineticCoefficients,
    basis: EigenoperatorBasis,
    drift_tol: float = 1e-6,
) -> list:
    """Integrate dLambda/dt = L(t) Lambda from the identity map."""
    n = basis.dim
    ls = _grid_superops(coeffs, basis)
    tr_row = vec(np.eye(n)).conj()

    def monitor(lam):
        return float(np.max(np.abs(tr_row @ lam - tr_row)))

    ys = _rk4_sweep(ls, coeffs.grid, np.eye(n * n, dtype=complex), monitor, drift_tol)
    return [Superoperator(n, lam) for lam in ys]


# ---------------------------------------------------------------------------
# exact maps from small joint systems
# ---------------------------------------------------------------------------


def map_from_joint_unitary(
    h_joint: np.ndarray,
    rho_env: np.ndarray,
    n_sys: int,
    grid: TimeGrid,
    validate: bool = True,
    cptp_tol: float = 1e-10,
    threads: int | None = None,
) -> list:
    """Dynamical maps Lambda(t)[X] = tr_E(U(t) (X x rho_env) U(t)^dag).

    Built column by column over the elementary system operators; optionally
    validated to be CPTP at every grid point through the Choi matrix.
    """
    h_joint = np.asarray(h_joint, dtype=complex)
    d = h_joint.shape[0]
    rho_env = np.asarray(rho_env, dtype=complex)
    n_env = rho_env.shape[0]
    if d != n_sys * n_env:
        raise ValueError(f"dimension mismatch: joint dim {d} != {n_sys} * {n_env}")
    if not is_hermitian(h_joint, 1e-10 * max(1.0, float(np.max(np.abs(h_joint))))):
        raise ValueError("joint Hamiltonian must be Hermitian")
    w, v = np.linalg.eigh(h_joint)
    vh = v.conj().T
    # rotate each elementary input into the eigenbasis once
    gs = []
    for j in range(n_sys):
        for i in range(n_sys):
            e_ij = np.zeros((n_sys, n_sys), dtype=complex)
            e_ij[i, j] = 1.0
            gs.append(vh @ tensor_product(e_ij, rho_env) @ v)

    def one_time(t: float) -> Superoperator:
        phase = np.exp(-1j * w * t)
        outer = np.outer(phase, phase.conj())
        cols = np.empty((n_sys * n_sys, n_sys * n_sys), dtype=complex)
        for col, g in enumerate(gs):
            joint = v @ (outer * g) @ vh
            cols[:, col] = vec(partial_trace_env(joint, n_sys, n_env))
        s = Superoperator(n_sys, cols)
        if validate:
            choi = choi_matrix(s)
            min_eig = float(np.linalg.eigvalsh((choi + choi.conj().T) / 2).min())
            tp = float(np.max(np.abs(partial_trace_env(choi, n_sys, n_sys) - np.eye(n_sys))))
            if min_eig < -cptp_tol or tp > 100 * cptp_tol:
                raise RuntimeError(
                    f"traced map is not CPTP at t={t:.6g}: "
                    f"Choi min eig {min_eig:.3e}, TP residual {tp:.3e}"
                )
        return s

    ts = list(grid.points)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(one_time, ts))
    return [one_time(t) for t in ts]


# ---------------------------------------------------------------------------
# generator extraction from maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExtractionReport:
    generators: list  # Superoperator or None where singular
    cond_numbers: np.ndarray
    singular: np.ndarray  # bool per time


def _derivative_stack(fs: np.ndarray, h: float) -> np.ndarray:
    """Finite-difference time derivative of a stack of matrices.

    Fourth order (five-point) stencils when possible, one-sided at the ends;
    second order for 3..4 point inputs.
    """
    t = fs.shape[0]
    out = np.empty_like(fs)
    if t >= 5:
        out[2:-2] = (-fs[4:] + 8 * fs[3:-1] - 8 * fs[1:-3] + fs[:-4]) / (12 * h)
        w0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12 * h)
        w1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / (12 * h)
        out[0] = np.tensordot(w0, fs[:5], axes=1)
        out[1] = np.tensordot(w1, fs[:5], axes=1)
        out[-1] = -np.tensordot(w0, fs[-1:-6:-1], axes=1)
        out[-2] = -np.tensordot(w1, fs[-1:-6:-1], axes=1)
    else:
        out[1:-1] = (fs[2:] - fs[:-2]) / (2 * h)
        out[0] = (-3 * fs[0] + 4 * fs[1] - fs[2]) / (2 * h)
        out[-1] = (3 * fs[-1] - 4 * fs[-2] + fs[-3]) / (2 * h)
    return out


def extract_generator(
    maps, grid: TimeGrid, cond_threshold: float = 1e12
) -> ExtractionReport:
    """Time-local generators L = (dLambda/dt) Lambda^{-1} from a map series.

    Times where Lambda is numerically singular (condition number above the
    threshold) are flagged and omitted rather than regularized.
    """
    if len(maps) != len(grid) or len(maps) < 3:
        raise ValueError("need at least 3 maps matching the grid")
    h = grid.step
    n = maps[0].dim
    stack = np.stack([m.matrix for m in maps])
    dstack = _derivative_stack(stack, h)
    conds = np.array([float(np.linalg.cond(m)) for m in stack])
    singular = ~np.isfinite(conds) | (conds > cond_threshold)
    gens = []
    for k in range(len(maps)):
        if singular[k]:
            gens.append(None)
            continue
        l = np.linalg.solve(stack[k].T, dstack[k].T).T
        gens.append(Superoperator(n, l))
    return ExtractionReport(gens, conds, singular)
