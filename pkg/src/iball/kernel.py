"""Gaussian kernel evaluation and Gram-block construction.

Within-domain and cross-domain Gram blocks share one distance routine so
that transposition identities hold exactly in floating point:
``gram(X, Z).entries`` is the bitwise transpose of ``gram(Z, X).entries``
and same-matrix blocks carry an exact unit diagonal.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class KernelParams:
    """Gaussian kernel with bandwidth ``sigma``: exp(-||x-z||^2 / (2 sigma^2))."""

    kind: str = "gaussian"
    sigma: float = 5.1

    def __post_init__(self):
        if self.kind != "gaussian":
            raise ValidationError(f"unsupported kernel kind {self.kind!r}")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValidationError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class GramBlock:
    """A block of kernel evaluations tagged by the sample groups it relates."""

    entries: np.ndarray
    role: str  # within | cross | new-vs-old | new-vs-new

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        object.__setattr__(self, "entries", entries)
        if entries.ndim != 2:
            raise ValidationError("Gram block must be 2-D")
        if self.role not in ("within", "cross", "new-vs-old", "new-vs-new"):
            raise ValidationError(f"unknown Gram role {self.role!r}")

    @property
    def rows(self):
        return self.entries.shape[0]

    @property
    def cols(self):
        return self.entries.shape[1]


def _as_features(x, name):
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be a 2-D sample-by-feature matrix")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


def kernel_fn(x, z, params):
    """Kernel value between two feature vectors."""
    xv = np.asarray(x, dtype=float).ravel()
    zv = np.asarray(z, dtype=float).ravel()
    if xv.shape != zv.shape:
        raise ValidationError(f"dimension mismatch: {xv.shape} vs {zv.shape}")
    if not (np.all(np.isfinite(xv)) and np.all(np.isfinite(zv))):
        raise ValidationError("kernel inputs must be finite")
    diff = xv - zv
    return float(np.exp(-(diff @ diff) / (2.0 * params.sigma**2)))


def _sq_dists(x, z, sq_x=None, sq_z=None):
    # ||x-z||^2 via the inner-product expansion; clamped at zero so rounding
    # never produces a negative distance.
    if sq_x is None:
        sq_x = np.einsum("ij,ij->i", x, x)
    if sq_z is None:
        sq_z = np.einsum("ij,ij->i", z, z)
    d2 = sq_x[:, None] + sq_z[None, :] - 2.0 * (x @ z.T)
    return np.maximum(d2, 0.0)


def gram(x, z, params):
    """Gram block between two sample sets.

    Entry ``(a, b)`` equals ``kernel_fn(x[a], z[b], params)``.  Passing the
    same array object for both arguments yields a symmetric within-domain
    block with an exact unit diagonal.
    """
    xm = _as_features(x, "x")
    same = z is x
    zm = xm if same else _as_features(z, "z")
    if xm.shape[1] != zm.shape[1]:
        raise ValidationError(
            f"feature dimension mismatch: {xm.shape[1]} vs {zm.shape[1]}"
        )
    denom = 2.0 * params.sigma**2
    if same:
        g = xm @ xm.T
        sq = np.diagonal(g).copy()
        d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * g, 0.0)
        np.fill_diagonal(d2, 0.0)
        return GramBlock(np.exp(-d2 / denom), "within")
    return GramBlock(np.exp(-_sq_dists(xm, zm) / denom), "cross")


@dataclass(frozen=True)
class IncrementalBlocks:
    """The five kernel blocks introduced by a batch of new samples.

    For a domain pair (i, j) with old/new sample splits, these are exactly
    the pieces needed to grow the stored Gram blocks:

    - ``k_new_old``: new_i vs old_i
    - ``h_new_new``: new_i vs new_i
    - ``k_new_i_old_j``: new_i vs old_j
    - ``k_old_i_new_j``: old_i vs new_j
    - ``h_new_i_new_j``: new_i vs new_j
    """

    k_new_old: GramBlock
    h_new_new: GramBlock
    k_new_i_old_j: GramBlock
    k_old_i_new_j: GramBlock
    h_new_i_new_j: GramBlock


def incremental_blocks(old_i, new_i, old_j, new_j, params):
    """Compute the five new-sample kernel blocks for one domain pair."""
    mats = {
        "old_i": _as_features(old_i, "old_i"),
        "new_i": _as_features(new_i, "new_i"),
        "old_j": _as_features(old_j, "old_j"),
        "new_j": _as_features(new_j, "new_j"),
    }
    dims = {m.shape[1] for m in mats.values()}
    if len(dims) > 1:
        raise ValidationError(f"inconsistent feature dimensions: {sorted(dims)}")
    oi, ni, oj, nj = mats["old_i"], mats["new_i"], mats["old_j"], mats["new_j"]
    return IncrementalBlocks(
        k_new_old=GramBlock(gram(ni, oi, params).entries, "new-vs-old"),
        h_new_new=GramBlock(gram(ni, ni, params).entries, "new-vs-new"),
        k_new_i_old_j=GramBlock(gram(ni, oj, params).entries, "new-vs-old"),
        k_old_i_new_j=GramBlock(gram(oi, nj, params).entries, "new-vs-old"),
        h_new_i_new_j=GramBlock(gram(ni, nj, params).entries, "new-vs-new"),
    )


def assemble_within(k_old, blocks):
    """Grown within-domain Gram matrix: old block bordered by the new rows."""
    k = np.asarray(k_old, dtype=float)
    knew = blocks.k_new_old.entries
    h = blocks.h_new_new.entries
    return np.block([[k, knew.T], [knew, h]])


def assemble_cross(k_old_ij, blocks):
    """Grown cross-domain Gram matrix for rows [old_i; new_i], cols [old_j; new_j]."""
    k = np.asarray(k_old_ij, dtype=float)
    return np.block(
        [
            [k, blocks.k_old_i_new_j.entries],
            [blocks.k_new_i_old_j.entries, blocks.h_new_i_new_j.entries],
        ]
    )
