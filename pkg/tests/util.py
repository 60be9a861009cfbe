"""Shared test oracles, kept independent of the library's own numerics."""

import numpy as np


def random_spd(rng, m, jitter=1.0):
    """Well-conditioned random SPD matrix."""
    A = rng.standard_normal((m, m))
    return A @ A.T + jitter * np.eye(m)


def expm_sym(A):
    """Matrix exponential of a symmetric matrix via numpy's eigensolver."""
    w, V = np.linalg.eigh(A)
    return (V * np.exp(w)) @ V.T


def min_eig_ratio(K):
    """Smallest eigenvalue relative to the trace (PSD check oracle)."""
    K = np.asarray(K, dtype=float)
    return float(np.linalg.eigvalsh(K).min()), float(np.trace(K))
