"""Shared helpers for the closed-form models."""

from __future__ import annotations

import numpy as np

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SIGMA_P = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # |e><g| with e = index 0
SIGMA_M = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
EYE2 = np.eye(2, dtype=complex)

#: absolute threshold below which a denominator function is called singular
SINGULAR_ABS_TOL = 1e-10


def singular_flags(series, abs_tol: float = SINGULAR_ABS_TOL) -> np.ndarray:
    """Flag grid points where any of the given functions vanishes.

    A point is flagged when a value is below abs_tol in magnitude or when the
    function changes sign across an adjacent grid interval (a zero crossing
    never lands exactly on a grid point, so the pointwise rule alone would
    miss every divergence).
    """
    series = [np.asarray(s, dtype=float) for s in series]
    flags = np.zeros(series[0].shape, dtype=bool)
    for s in series:
        flags |= np.abs(s) < abs_tol
        if s.size > 1:
            crossing = s[:-1] * s[1:] < 0
            flags[:-1] |= crossing
            flags[1:] |= crossing
    return flags


def bloch_superop(images: dict) -> np.ndarray:
    """Superoperator matrix from images of the orthonormal qubit basis.

    images maps each of "id", "z", "p", "m" to the image operator of
    I/sqrt(2), sigma_z/sqrt(2), sigma_+, sigma_- respectively.
    """
    basis = {
        "id": EYE2 / np.sqrt(2.0),
        "z": SIGMA_Z / np.sqrt(2.0),
        "p": SIGMA_P,
        "m": SIGMA_M,
    }
    m = np.zeros((4, 4), dtype=complex)
    for key, e in basis.items():
        img = np.asarray(images[key], dtype=complex)
        m += np.outer(img.reshape(-1, order="F"), e.reshape(-1, order="F").conj())
    return m
