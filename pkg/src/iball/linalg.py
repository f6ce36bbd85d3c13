"""Dense symmetric eigensolves, partial QR, and the low-rank eigen update.

The central object is an :class:`EigenPair` ``(U, values)`` representing a
symmetric matrix as ``U @ diag(values) @ U.T``.  When a symmetric matrix grows
by a handful of rows/columns and is perturbed on the touched entries,
:func:`eigen_update` refreshes the eigenpair without ever materializing the
full matrix: the perturbation is eigendecomposed on a compressed subspace,
the old basis is extended by partial QR, and a small core problem is solved
densely.  If the input pair is an exact factorization, the output is exact
too (up to the requested rank).
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import NumericError, ValidationError

# Relative symmetry tolerance for matrices entering the eigensolvers.
SYM_TOL = 1e-12
# Orthonormality tolerance for eigenvector blocks (Frobenius).
ORTHO_TOL = 1e-8
# Columns whose norm shrinks below this factor during orthogonalization are
# treated as linearly dependent and dropped.
DROP_TOL = 1e-10


def validate_symmetric(matrix, tol=SYM_TOL, name="matrix"):
    """Raise unless ``matrix`` is square, finite, and symmetric within ``tol``."""
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError(f"{name} contains non-finite entries")
    scale = np.linalg.norm(m)
    if np.linalg.norm(m - m.T) > tol * (1.0 + scale):
        raise ValidationError(f"{name} is not symmetric within {tol:g} relative")
    return m


def _canonical_order(values, vectors):
    """Sort by descending |eigenvalue| and make each vector's first
    significant component positive, for reproducible outputs."""
    order = np.argsort(-np.abs(values), kind="stable")
    values = values[order]
    vectors = vectors[:, order]
    for j in range(vectors.shape[1]):
        col = vectors[:, j]
        big = np.abs(col) > 1e-12 * max(np.abs(col).max(), 1e-300)
        idx = np.argmax(big)
        if big[idx] and col[idx] < 0:
            vectors[:, j] = -col
    return values, vectors


@dataclass(frozen=True)
class EigenPair:
    """Orthonormal eigenvectors plus eigenvalues of a symmetric matrix.

    ``vectors`` is n-by-r with orthonormal columns; ``values`` holds the r
    eigenvalues sorted by descending absolute value.
    """

    vectors: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.vectors, dtype=float)
        val = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "vectors", vec)
        object.__setattr__(self, "values", val)
        if vec.ndim != 2 or val.ndim != 1 or vec.shape[1] != val.shape[0]:
            raise ValidationError(
                f"eigenpair shape mismatch: vectors {vec.shape}, values {val.shape}"
            )
        if vec.shape[1] > vec.shape[0]:
            raise ValidationError("more eigenvectors than dimensions")
        if not (np.all(np.isfinite(vec)) and np.all(np.isfinite(val))):
            raise ValidationError("eigenpair contains non-finite entries")
        r = vec.shape[1]
        if r:
            drift = np.linalg.norm(vec.T @ vec - np.eye(r))
            if drift > ORTHO_TOL:
                raise ValidationError(
                    f"eigenvectors not orthonormal (Frobenius drift {drift:.2e})"
                )
            absval = np.abs(val)
            if np.any(absval[:-1] < absval[1:] - 1e-12 * (1 + absval.max())):
                raise ValidationError("eigenvalues not sorted by descending magnitude")

    @property
    def dim(self):
        return self.vectors.shape[0]

    @property
    def rank(self):
        return self.vectors.shape[1]

    def reconstruct(self):
        """Dense ``U diag(values) U'`` (test/diagnostic sizes only)."""
        return (self.vectors * self.values) @ self.vectors.T


@dataclass(frozen=True)
class SparsePerturbation:
    """Symmetric sparse update touching only rows/columns in ``affected``."""

    n: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    affected: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=int).ravel()
        cols = np.asarray(self.cols, dtype=int).ravel()
        vals = np.asarray(self.vals, dtype=float).ravel()
        affected = np.unique(np.asarray(self.affected, dtype=int).ravel())
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "vals", vals)
        object.__setattr__(self, "affected", affected)
        if not (rows.shape == cols.shape == vals.shape):
            raise ValidationError("triplet arrays must share a common length")
        if self.n < 0:
            raise ValidationError("dimension must be nonnegative")
        for name, idx in (("row", rows), ("col", cols), ("affected", affected)):
            if idx.size and (idx.min() < 0 or idx.max() >= self.n):
                raise ValidationError(f"{name} index out of range for n={self.n}")
        if not np.all(np.isfinite(vals)):
            raise ValidationError("perturbation values must be finite")
        if vals.size:
            mask = np.isin(rows, affected) | np.isin(cols, affected)
            if not mask.all():
                raise ValidationError(
                    "nonzero entries outside the affected rows/columns"
                )
        m = self.matrix()
        asym = abs(m - m.T)
        scale = abs(m).max() if vals.size else 0.0
        if asym.data.size and asym.max() > SYM_TOL * (1.0 + scale):
            raise ValidationError("perturbation triplets are not symmetric")

    def matrix(self):
        """CSR view of the perturbation (duplicate triplets are summed)."""
        return sp.coo_matrix(
            (self.vals, (self.rows, self.cols)), shape=(self.n, self.n)
        ).tocsr()


def sym_eig_topr(matrix, r):
    """Eigenpairs of largest magnitude of a symmetric matrix.

    Parameters
    ----------
    matrix : (n, n) array_like, symmetric
    r : int
        Number of eigenpairs to keep, ``1 <= r <= n``.

    Returns
    -------
    EigenPair
        The r eigenpairs of largest ``|eigenvalue|``; the reconstruction is
        the best rank-r symmetric approximation in Frobenius norm.
    """
    m = validate_symmetric(matrix)
    n = m.shape[0]
    if not (isinstance(r, (int, np.integer)) and 1 <= r <= n):
        raise ValidationError(f"rank must satisfy 1 <= r <= {n}, got {r}")
    try:
        values, vectors = np.linalg.eigh((m + m.T) / 2.0)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - eigh rarely fails
        raise NumericError(f"eigendecomposition failed: {exc}") from exc
    values, vectors = _canonical_order(values, vectors)
    return EigenPair(vectors[:, :r].copy(), values[:r].copy())


def partial_qr(basis, cols, drop_tol=DROP_TOL):
    """Extend an orthonormal basis by the new directions in ``cols``.

    Gram-Schmidt with one re-orthogonalization pass, starting from the first
    appended column; columns already in the span (post-projection norm below
    ``drop_tol`` times the original norm) are dropped.

    Returns ``(delta_q, R)`` with ``delta_q`` the accepted new orthonormal
    columns and ``R`` upper-trapezoidal such that
    ``hstack([basis, delta_q]) @ R == hstack([basis, cols])``.
    """
    u = np.asarray(basis, dtype=float)
    p_mat = np.asarray(cols, dtype=float)
    if u.ndim != 2 or p_mat.ndim != 2:
        raise ValidationError("basis and cols must be 2-D")
    if u.shape[0] != p_mat.shape[0]:
        raise ValidationError(
            f"row mismatch: basis has {u.shape[0]} rows, cols has {p_mat.shape[0]}"
        )
    n, r = u.shape
    p = p_mat.shape[1]
    if r:
        drift = np.linalg.norm(u.T @ u - np.eye(r))
        if drift > ORTHO_TOL:
            raise ValidationError(
                f"basis columns not orthonormal (Frobenius drift {drift:.2e})"
            )

    work = np.empty((n, r + p), dtype=float)
    work[:, :r] = u
    n_acc = r
    coeff_cols = []
    accepted = []
    for j in range(p):
        v = p_mat[:, j].copy()
        pre = np.linalg.norm(v)
        coef = np.zeros(r + p)
        for _ in range(2):  # one re-orthogonalization pass
            if n_acc:
                c = work[:, :n_acc].T @ v
                v -= work[:, :n_acc] @ c
                coef[:n_acc] += c
        nv = np.linalg.norm(v)
        if pre > 0.0 and nv > drop_tol * pre:
            work[:, n_acc] = v / nv
            coef[n_acc] = nv
            accepted.append(j)
            n_acc += 1
        coeff_cols.append(coef)

    p_eff = n_acc - r
    delta_q = work[:, r:n_acc].copy()
    r_mat = np.zeros((n_acc, r + p))
    r_mat[:r, :r] = np.eye(r)
    for j, coef in enumerate(coeff_cols):
        r_mat[:, r + j] = coef[:n_acc]
    return delta_q, r_mat


def _expand_positions(n_old, insertions):
    """Map old row indices to their positions after inserting rows.

    ``insertions`` is a list of ``(position, count)`` pairs in old-index
    coordinates, ``0 <= position <= n_old``; inserted rows land immediately
    before the old row at ``position``.
    """
    counts = np.zeros(n_old + 1, dtype=int)
    for pos, count in insertions:
        if not (0 <= pos <= n_old):
            raise ValidationError(f"insertion position {pos} outside [0, {n_old}]")
        if count < 0:
            raise ValidationError("insertion count must be nonnegative")
        counts[pos] += count
    inserted = []
    new_of_old = np.zeros(n_old, dtype=int)
    cur = 0
    for pos in range(n_old + 1):
        for _ in range(counts[pos]):
            inserted.append(cur)
            cur += 1
        if pos < n_old:
            new_of_old[pos] = cur
            cur += 1
    return new_of_old, np.asarray(inserted, dtype=int), cur


def _perturbation_eig(delta):
    """Exact eigendecomposition of the perturbation on its compressed range.

    The perturbation is nonzero only on rows/columns in ``affected``, so its
    range lies in span{affected unit vectors} + span{perturbation columns at
    the affected indices}.  An exact dense eigensolve on that subspace
    (dimension at most twice |affected|) yields ``P, sigma`` with
    ``P @ diag(sigma) @ P.T`` equal to the perturbation; zero eigenvalues are
    dropped.
    """
    a = delta.affected
    n = delta.n
    if a.size == 0 or delta.vals.size == 0:
        return np.zeros((n, 0)), np.zeros(0)
    mat = delta.matrix()
    e_a = np.zeros((n, a.size))
    e_a[a, np.arange(a.size)] = 1.0
    extra, _ = partial_qr(e_a, mat @ e_a)
    basis = np.hstack([e_a, extra])
    core = basis.T @ (mat @ basis)
    core = (core + core.T) / 2.0
    try:
        sigma, w = np.linalg.eigh(core)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"perturbation eigendecomposition failed: {exc}") from exc
    keep = np.abs(sigma) > 1e-12 * max(np.abs(sigma).max(), 1e-300)
    return basis @ w[:, keep], sigma[keep]


def eigen_update(eig, insertions, delta, rank=None):
    """Update an eigenpair after inserting rows/columns and perturbing entries.

    Parameters
    ----------
    eig : EigenPair
        Eigenpair of the current symmetric matrix (n-by-n, rank r).
    insertions : list of (position, count)
        Where new rows/columns are inserted, in old-index coordinates.
    delta : SparsePerturbation
        Symmetric perturbation in the enlarged coordinate system; its
        dimension must equal ``eig.dim`` plus the total inserted count.
    rank : int, optional
        Truncate the result to this many eigenpairs of largest magnitude.
        By default all computed pairs are kept, which preserves exactness
        when the input pair is an exact factorization.

    Returns
    -------
    EigenPair
        Eigenpair of the enlarged, perturbed matrix.  Exact whenever the
        input reconstruction equals the old matrix exactly.
    """
    new_of_old, inserted, n_new = _expand_positions(eig.dim, insertions)
    if delta.n != n_new:
        raise ValidationError(
            f"perturbation dimension {delta.n} != expanded dimension {n_new}"
        )
    if inserted.size and not np.isin(inserted, delta.affected).all():
        raise ValidationError(
            "inserted rows must be contained in the perturbation's affected set"
        )

    r = eig.rank
    u_pad = np.zeros((n_new, r))
    u_pad[new_of_old, :] = eig.vectors

    p_mat, sigma = _perturbation_eig(delta)
    delta_q, r_mat = partial_qr(u_pad, p_mat)
    core_diag = np.concatenate([eig.values, sigma])
    z = (r_mat * core_diag) @ r_mat.T
    z = (z + z.T) / 2.0
    try:
        values, v = np.linalg.eigh(z)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"core eigendecomposition failed: {exc}") from exc
    vectors = np.hstack([u_pad, delta_q]) @ v
    values, vectors = _canonical_order(values, vectors)
    if rank is not None:
        if rank < 1:
            raise ValidationError(f"rank must be positive, got {rank}")
        keep = min(rank, values.size)
        values, vectors = values[:keep], vectors[:, :keep]
    return EigenPair(np.ascontiguousarray(vectors), values.copy())


def apply_inverse(eig, y, floor=None):
    """Apply the (pseudo-)inverse represented by an eigenpair to a vector.

    Eigenvalues with magnitude below ``floor`` contribute zero, as in a
    pseudo-inverse; the default floor is ``1e-10 * max|eigenvalue|``.
    """
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != eig.dim:
        raise ValidationError(
            f"vector length {y.shape[0]} != eigenpair dimension {eig.dim}"
        )
    if eig.rank == 0:
        return np.zeros_like(y)
    absval = np.abs(eig.values)
    if floor is None:
        floor = 1e-10 * absval.max()
    inv = np.where(absval >= max(floor, 0.0), 1.0, 0.0)
    safe = np.where(eig.values == 0.0, 1.0, eig.values)
    inv = inv / safe
    return eig.vectors @ (inv * (eig.vectors.T @ y))
