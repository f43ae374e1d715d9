"""Dense complex operator and superoperator arithmetic.

Conventions, fixed once and used everywhere in this package:

* hbar = 1; Hamiltonian entries are angular frequencies, times are 1/energy.
* Vectorization is column-stacking: ``vec(A @ X @ B) = (B.T kron A) @ vec(X)``.
* Composite spaces are ordered system (x) environment, system factor first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

__all__ = [
    "DensityOperator",
    "Superoperator",
    "TimeGrid",
    "apply_superop",
    "choi_matrix",
    "hs_inner",
    "is_hermitian",
    "matrix_exponential",
    "partial_trace_env",
    "superop_conjugation",
    "superop_left",
    "superop_right",
    "superop_sandwich",
    "tensor_product",
    "trace_norm",
    "unvec",
    "vec",
]

HERMITICITY_TOL = 1e-12


def _as_square(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    return a


def is_hermitian(a: np.ndarray, tol: float = HERMITICITY_TOL) -> bool:
    a = np.asarray(a)
    return bool(np.max(np.abs(a - a.conj().T)) <= tol)


def tensor_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product, system factor first."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def vec(x: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(x, dtype=complex).reshape(-1, order="F")


def unvec(v: np.ndarray, shape: tuple[int, int] | None = None) -> np.ndarray:
    v = np.asarray(v).reshape(-1)
    if shape is None:
        n = int(round(np.sqrt(v.size)))
        if n * n != v.size:
            raise ValueError(f"cannot unvec length-{v.size} vector to a square matrix")
        shape = (n, n)
    return v.reshape(shape, order="F")


def partial_trace_env(rho: np.ndarray, n_sys: int, n_env: int) -> np.ndarray:
    """Trace over the environment factor of a system (x) environment operator."""
    rho = _as_square(rho, "rho")
    if rho.shape[0] != n_sys * n_env:
        raise ValueError(
            f"dimension mismatch: operator has dim {rho.shape[0]}, expected {n_sys}*{n_env}"
        )
    r4 = rho.reshape(n_sys, n_env, n_sys, n_env)
    return np.einsum("iaja->ij", r4)


def hs_inner(a: np.ndarray, b: np.ndarray) -> complex:
    """Hilbert-Schmidt inner product tr(a^dag b)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def trace_norm(a: np.ndarray) -> float:
    """Sum of singular values."""
    return float(np.sum(scipy.linalg.svdvals(np.asarray(a, dtype=complex))))


def matrix_exponential(a: np.ndarray, scale: complex = 1.0) -> np.ndarray:
    """exp(scale * a).

    Hermitian inputs go through the eigendecomposition (a unitary result for
    imaginary scale stays unitary to ~1e-12); anything else falls back to
    scipy's Pade scaling-and-squaring.
    """
    a = _as_square(a)
    if is_hermitian(a):
        w, v = np.linalg.eigh(a)
        return (v * np.exp(scale * w)) @ v.conj().T
    return scipy.linalg.expm(scale * a)


def superop_sandwich(a: np.ndarray, b: np.ndarray) -> "Superoperator":
    """Matrix of the map X -> A X B^dag, i.e. (B^* kron A)."""
    a = _as_square(a, "A")
    b = _as_square(b, "B")
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return Superoperator(a.shape[0], np.kron(b.conj(), a))


def superop_left(a: np.ndarray) -> np.ndarray:
    """Matrix of X -> A X."""
    a = _as_square(a, "A")
    return np.kron(np.eye(a.shape[0]), a)


def superop_right(b: np.ndarray) -> np.ndarray:
    """Matrix of X -> X B."""
    b = _as_square(b, "B")
    return np.kron(b.T, np.eye(b.shape[0]))


def superop_conjugation(u: np.ndarray) -> "Superoperator":
    """Matrix of the unitary channel X -> U X U^dag."""
    u = _as_square(u, "U")
    return Superoperator(u.shape[0], np.kron(u.conj(), u))


def apply_superop(s: np.ndarray, x: np.ndarray) -> np.ndarray:
    return unvec(np.asarray(s) @ vec(x), np.asarray(x).shape)


def choi_matrix(s) -> np.ndarray:
    """Choi representation C = sum_ij |i><j| (x) L[|i><j|] of a superoperator.

    The map is completely positive iff C >= 0 and trace preserving iff the
    partial trace of C over the output (second) factor is the identity.
    """
    m = s.matrix if isinstance(s, Superoperator) else np.asarray(s, dtype=complex)
    n = int(round(np.sqrt(m.shape[0])))
    # m[k + n*l, i + n*j] = <k| L[|i><j|] |l>; reshuffle to C[i*n+k, j*n+l]
    return np.einsum("lkji->ikjl", m.reshape(n, n, n, n)).reshape(n * n, n * n)


@dataclass(frozen=True)
class Superoperator:
    """An N^2 x N^2 matrix acting on column-stacked N x N operators."""

    dim: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.dim**2, self.dim**2):
            raise ValueError(f"superoperator matrix shape {m.shape} != {(self.dim**2,) * 2}")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls, dim: int) -> "Superoperator":
        return cls(dim, np.eye(dim**2, dtype=complex))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return apply_superop(self.matrix, x)

    def compose(self, other: "Superoperator") -> "Superoperator":
        return Superoperator(self.dim, self.matrix @ other.matrix)

    def choi(self) -> np.ndarray:
        return choi_matrix(self.matrix)


@dataclass(frozen=True)
class DensityOperator:
    """A density matrix validated to tolerance on construction."""

    matrix: np.ndarray
    tol: float = 1e-9

    def __post_init__(self):
        m = _as_square(self.matrix, "density operator")
        herm = float(np.max(np.abs(m - m.conj().T)))
        if herm > self.tol:
            raise ValueError(f"not Hermitian: max|rho - rho^dag| = {herm:.3e} > {self.tol:.1e}")
        tr_dev = abs(np.trace(m) - 1.0)
        if tr_dev > self.tol:
            raise ValueError(f"trace deviates from one by {tr_dev:.3e} > {self.tol:.1e}")
        min_eig = float(np.linalg.eigvalsh((m + m.conj().T) / 2.0).min())
        if min_eig < -self.tol:
            raise ValueError(f"not positive semidefinite: min eigenvalue {min_eig:.3e}")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing time points, first point >= 0."""

    points: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float).reshape(-1)
        if p.size == 0:
            raise ValueError("empty time grid")
        if p[0] < 0:
            raise ValueError("time grid must start at t >= 0")
        if p.size > 1 and np.any(np.diff(p) <= 0):
            raise ValueError("time grid must be strictly increasing")
        object.__setattr__(self, "points", p)

    @classmethod
    def linspace(cls, t_max: float, n_points: int, t_min: float = 0.0) -> "TimeGrid":
        if n_points == 1:
            return cls(np.array([t_min]))
        return cls(np.linspace(t_min, t_max, n_points))

    def __len__(self) -> int:
        return self.points.size

    @property
    def step(self) -> float:
        """Uniform step size; raises for non-uniform grids."""
        if len(self) < 2:
            raise ValueError("grid has no step")
        d = np.diff(self.points)
        h = float(d[0])
        if np.max(np.abs(d - h)) > 1e-9 * max(h, 1e-300):
            raise ValueError("grid is not uniform")
        return h
