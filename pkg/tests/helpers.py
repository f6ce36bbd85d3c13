"""Shared construction helpers for the test suite."""

import numpy as np

from iball.linalg import SparsePerturbation


def random_symmetric(rng, n, scale=1.0):
    m = rng.normal(size=(n, n)) * scale
    return (m + m.T) / 2.0


def random_orthonormal(rng, n, r):
    q, _ = np.linalg.qr(rng.normal(size=(n, max(r, 1))))
    return q[:, :r]


def dense_to_perturbation(dense, affected):
    """Triplets of a dense symmetric matrix restricted to its nonzeros."""
    dense = np.asarray(dense, dtype=float)
    rows, cols = np.nonzero(dense)
    return SparsePerturbation(
        dense.shape[0], rows, cols, dense[rows, cols], np.asarray(affected, dtype=int)
    )


def bordered_update(rng, s_old, m, scale=0.3, diag_boost=1.0):
    """Grow a symmetric matrix by m appended rows/cols with a random border.

    Returns (s_new, delta_dense, affected) where delta_dense is the update in
    the enlarged coordinates (old block zero).
    """
    n = s_old.shape[0]
    n1 = n + m
    s_new = np.zeros((n1, n1))
    s_new[:n, :n] = s_old
    border = rng.normal(size=(m, n)) * scale
    corner = random_symmetric(rng, m, scale) + np.eye(m) * diag_boost
    s_new[n:, :n] = border
    s_new[:n, n:] = border.T
    s_new[n:, n:] = corner
    delta = np.zeros((n1, n1))
    delta[n:, :n] = border
    delta[:n, n:] = border.T
    delta[n:, n:] = corner
    return s_new, delta, np.arange(n, n1)
