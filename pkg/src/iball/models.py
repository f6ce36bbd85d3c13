"""Coupled multi-domain regression models and the streaming fast path.

Two closed-form formulations share one solver: a linear model whose joint
block system has d-by-d blocks, and a kernelized model whose blocks are
per-domain Gram matrices.  Domains are tied together through a nonnegative
relation matrix; the coupling strength and ridge weight enter the block
system's diagonal scaling.  The fast variant keeps a rank-r eigenpair of the
kernel block system and refreshes it per batch with the low-rank eigen
update instead of refitting.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from . import linalg
from .errors import BoundNotApplicableError, NumericError, ValidationError
from .kernel import KernelParams, gram, incremental_blocks

# Systems whose reciprocal condition estimate falls below this are rejected.
RCOND_MIN = 1e-12

BASELINE_METHODS = (
    "predict0",
    "sum3",
    "linear-combine",
    "linear-separate",
    "kernel-combine",
    "kernel-separate",
)
JOINT_METHODS = ("iball-linear", "iball-kernel", "iball-fast")
ALL_METHODS = BASELINE_METHODS + JOINT_METHODS


@dataclass(frozen=True)
class Hyperparams:
    """Model knobs: coupling weight, ridge weight, fast-path rank, kernel."""

    theta: float = 0.01
    lam: float = 0.01
    rank: int = 50
    kernel: KernelParams = field(default_factory=KernelParams)

    def __post_init__(self):
        if not (np.isfinite(self.theta) and self.theta >= 0):
            raise ValidationError(f"theta must be nonnegative, got {self.theta}")
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise ValidationError(f"lam must be positive, got {self.lam}")
        if self.rank < 1:
            raise ValidationError(f"rank must be >= 1, got {self.rank}")


@dataclass(frozen=True)
class JointSystem:
    """Assembled block system: symmetric matrix, stacked targets, offsets."""

    matrix: np.ndarray
    targets: np.ndarray
    offsets: np.ndarray
    formulation: str  # linear | kernel
    features: tuple = ()
    kernel_params: KernelParams | None = None

    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def n_domains(self):
        return len(self.offsets) - 1

    def block_slice(self, i):
        return slice(int(self.offsets[i]), int(self.offsets[i + 1]))


@dataclass(frozen=True)
class StreamBatch:
    """New per-domain samples arriving at one time step."""

    features: tuple
    targets: tuple

    def __post_init__(self):
        feats = tuple(np.asarray(f, dtype=float) for f in self.features)
        targs = tuple(np.asarray(t, dtype=float).ravel() for t in self.targets)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "targets", targs)
        if len(feats) != len(targs):
            raise ValidationError("features/targets domain counts differ")
        for f, t in zip(feats, targs):
            if f.ndim != 2 or f.shape[0] != t.shape[0]:
                raise ValidationError("per-domain feature/target rows differ")

    @property
    def counts(self):
        return np.array([f.shape[0] for f in self.features], dtype=int)

    @property
    def total(self):
        return int(self.counts.sum())


# Models -----------------------------------------------------------------


@dataclass(frozen=True)
class LinearModel:
    """One weight vector per domain."""

    weights: tuple

    def predict_one(self, x, domain):
        return float(np.asarray(x, dtype=float) @ self.weights[domain])


@dataclass(frozen=True)
class PooledLinearModel:
    """Single ridge weight vector shared by all domains."""

    w: np.ndarray

    def predict_one(self, x, domain):
        return float(np.asarray(x, dtype=float) @ self.w)


@dataclass(frozen=True)
class KernelModel:
    """Per-domain dual coefficients over retained training samples."""

    coefs: tuple
    features: tuple
    params: KernelParams

    def predict_one(self, x, domain):
        feats = self.features[domain]
        if feats.shape[0] == 0:
            return 0.0
        block = gram(np.asarray(x, dtype=float)[None, :], feats, self.params)
        return float(block.entries[0] @ self.coefs[domain])


@dataclass(frozen=True)
class PooledKernelModel:
    """Kernel ridge over the pooled training samples."""

    coefs: np.ndarray
    features: np.ndarray
    params: KernelParams

    def predict_one(self, x, domain):
        block = gram(np.asarray(x, dtype=float)[None, :], self.features, self.params)
        return float(block.entries[0] @ self.coefs)


@dataclass(frozen=True)
class ZeroModel:
    """Always predicts zero."""

    def predict_one(self, x, domain):
        return 0.0


@dataclass(frozen=True)
class SumFeaturesModel:
    """Predicts the label-normalized sum of the feature values.

    The same normalization applied to the training labels is applied here so
    the prediction lives on the label scale.
    """

    normalizer: object

    def predict_one(self, x, domain):
        return float(self.normalizer.apply(float(np.sum(x))))


@dataclass(frozen=True)
class FastModel:
    """Rank-r eigenpair of the kernel block system plus update state."""

    eig: linalg.EigenPair
    targets: np.ndarray
    features: tuple
    offsets: np.ndarray
    hp: Hyperparams
    weights: tuple

    def predict_one(self, x, domain):
        feats = self.features[domain]
        if feats.shape[0] == 0:
            return 0.0
        block = gram(np.asarray(x, dtype=float)[None, :], feats, self.hp.kernel)
        return float(block.entries[0] @ self.weights[domain])


# Assembly ----------------------------------------------------------------


def _adjacency(a):
    mat = np.asarray(getattr(a, "adjacency", a), dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValidationError("adjacency must be square")
    if not np.allclose(mat, mat.T, atol=1e-10):
        raise ValidationError("adjacency must be symmetric")
    if mat.size and mat.min() < 0:
        raise ValidationError("adjacency must be nonnegative")
    return mat


def _check_domain_data(xs, ys, n_d):
    if len(xs) != n_d or len(ys) != n_d:
        raise ValidationError(
            f"expected {n_d} domains, got {len(xs)} feature / {len(ys)} target sets"
        )
    xs = [np.asarray(x, dtype=float) for x in xs]
    ys = [np.asarray(y, dtype=float).ravel() for y in ys]
    dims = {x.shape[1] for x in xs if x.ndim == 2}
    if any(x.ndim != 2 for x in xs) or len(dims) != 1:
        raise ValidationError("per-domain features must be 2-D with a common width")
    for x, y in zip(xs, ys):
        if x.shape[0] != y.shape[0]:
            raise ValidationError("feature/target row mismatch within a domain")
    return xs, ys, dims.pop()


def coupling_scale(adjacency, hp):
    """Per-domain diagonal scaling: one plus theta times the relation row sum."""
    return 1.0 + hp.theta * _adjacency(adjacency).sum(axis=1)


def assemble_linear_system(xs, ys, adjacency, hp):
    """Joint linear block system with d-by-d blocks.

    Diagonal block i is ``X_i' X_i + (theta * row_sum_i + lam) I``; block
    (i, j) is ``-theta * A_ij * I``; target block i is ``X_i' y_i``.
    """
    a = _adjacency(adjacency)
    n_d = a.shape[0]
    xs, ys, d = _check_domain_data(xs, ys, n_d)
    dim = n_d * d
    s = np.zeros((dim, dim))
    t = np.zeros(dim)
    eye = np.eye(d)
    row_sum = a.sum(axis=1)
    for i in range(n_d):
        sl = slice(i * d, (i + 1) * d)
        s[sl, sl] = xs[i].T @ xs[i] + (hp.theta * row_sum[i] + hp.lam) * eye
        t[sl] = xs[i].T @ ys[i]
        for j in range(i + 1, n_d):
            if hp.theta * a[i, j] == 0.0:
                continue
            sj = slice(j * d, (j + 1) * d)
            s[sl, sj] = -hp.theta * a[i, j] * eye
            s[sj, sl] = s[sl, sj]
    offsets = np.arange(n_d + 1) * d
    return JointSystem(s, t, offsets, "linear", tuple(xs))


def assemble_kernel_system(xs, ys, adjacency, hp):
    """Joint kernel block system with Gram blocks.

    Diagonal block i is ``(1 + theta * row_sum_i) K_i + lam I``; block (i, j)
    is ``-theta * A_ij * K_ij``; the target vector stacks the raw labels.
    Symmetry is exact because cross blocks are mirrored by transpose.
    """
    a = _adjacency(adjacency)
    n_d = a.shape[0]
    xs, ys, _ = _check_domain_data(xs, ys, n_d)
    sizes = np.array([x.shape[0] for x in xs], dtype=int)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    dim = int(offsets[-1])
    s = np.zeros((dim, dim))
    alpha = 1.0 + hp.theta * a.sum(axis=1)
    slices = [slice(int(offsets[i]), int(offsets[i + 1])) for i in range(n_d)]
    for i in range(n_d):
        if sizes[i] == 0:
            continue
        k_i = gram(xs[i], xs[i], hp.kernel).entries
        block = alpha[i] * k_i
        block[np.diag_indices_from(block)] += hp.lam
        s[slices[i], slices[i]] = block
        for j in range(i + 1, n_d):
            if sizes[j] == 0 or hp.theta * a[i, j] == 0.0:
                continue
            k_ij = gram(xs[i], xs[j], hp.kernel).entries
            s[slices[i], slices[j]] = -hp.theta * a[i, j] * k_ij
            s[slices[j], slices[i]] = s[slices[i], slices[j]].T
    t = np.concatenate(ys) if dim else np.zeros(0)
    return JointSystem(s, t, offsets, "kernel", tuple(xs), hp.kernel)


# Solving ------------------------------------------------------------------


def _solve_guarded(s, y):
    """Dense solve with a cheap reciprocal-condition estimate.

    Tries a Cholesky factorization first (the assembled systems are positive
    definite for moderate coupling), falling back to LU; either way the
    LAPACK condition estimator guards against near-singular systems.
    """
    if s.shape[0] == 0:
        return np.zeros(0)
    anorm = np.linalg.norm(s, 1)
    try:
        c, low = sla.cho_factor(s, lower=True, check_finite=False)
        rcond, info = lapack.dpocon(c, anorm, uplo="L")
        if info != 0:
            raise NumericError(f"condition estimation failed (info={info})")
        if rcond < RCOND_MIN:
            raise NumericError(
                f"system too ill-conditioned (rcond estimate {rcond:.2e})"
            )
        return sla.cho_solve((c, low), y, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    try:
        with warnings.catch_warnings():
            # singularity is reported through the rcond guard below
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(s, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"factorization failed: {exc}") from exc
    rcond, info = lapack.dgecon(lu, anorm, norm="1")
    if info != 0:
        raise NumericError(f"condition estimation failed (info={info})")
    if rcond < RCOND_MIN:
        raise NumericError(f"system too ill-conditioned (rcond estimate {rcond:.2e})")
    return sla.lu_solve((lu, piv), y, check_finite=False)


def _split(vec, offsets):
    return tuple(
        vec[int(offsets[i]) : int(offsets[i + 1])].copy()
        for i in range(len(offsets) - 1)
    )


def fit_closed_form(system):
    """Solve the assembled block system and unstack per-domain parameters."""
    w = _solve_guarded(system.matrix, system.targets)
    parts = _split(w, system.offsets)
    if system.formulation == "linear":
        return LinearModel(parts)
    if system.formulation == "kernel":
        if not system.features:
            raise ValidationError("kernel system lacks retained features")
        return KernelModel(parts, system.features, system.kernel_params)
    raise ValidationError(f"unknown formulation {system.formulation!r}")


# Fast path ----------------------------------------------------------------


def _fast_weights(eig, targets, offsets):
    w = linalg.apply_inverse(eig, targets)
    return _split(w, offsets)


def fit_fast_initial(system, hp):
    """Low-rank model from the kernel block system's top-r eigenpair."""
    if system.formulation != "kernel":
        raise ValidationError("the fast model requires the kernel formulation")
    dim = system.dim
    if dim == 0:
        raise ValidationError("cannot fit on an empty system")
    r = hp.rank
    if r > dim:
        warnings.warn(
            f"rank {r} exceeds system dimension {dim}; clamping", RuntimeWarning
        )
        r = dim
    eig = linalg.sym_eig_topr(system.matrix, r)
    weights = _fast_weights(eig, system.targets, system.offsets)
    return FastModel(
        eig,
        np.asarray(system.targets, dtype=float).copy(),
        system.features,
        np.asarray(system.offsets, dtype=int).copy(),
        hp,
        weights,
    )


def _batch_perturbation(model, batch, adjacency, hp):
    """Sparse growth-and-perturb update of the kernel block system.

    New rows are appended at the end of each domain's block; the entries
    coupling them to retained samples are kernel blocks scaled by the
    diagonal coupling factor (same domain) or by ``-theta * A_ij`` (cross
    domain), with the ridge weight added on the new diagonal.
    """
    a = _adjacency(adjacency)
    n_d = len(model.features)
    if a.shape[0] != n_d:
        raise ValidationError("adjacency size does not match the model")
    old_offsets = model.offsets
    old_sizes = np.diff(old_offsets)
    m = batch.counts
    new_sizes = old_sizes + m
    new_offsets = np.concatenate([[0], np.cumsum(new_sizes)])
    n_new = int(new_offsets[-1])
    alpha = 1.0 + hp.theta * a.sum(axis=1)

    old_rows = [
        np.arange(new_offsets[i], new_offsets[i] + old_sizes[i]) for i in range(n_d)
    ]
    new_rows = [
        np.arange(new_offsets[i] + old_sizes[i], new_offsets[i + 1])
        for i in range(n_d)
    ]

    rr, cc, vv = [], [], []

    def emit(rows, cols, block):
        if block.size == 0:
            return
        rr.append(np.repeat(rows, len(cols)))
        cc.append(np.tile(cols, len(rows)))
        vv.append(block.ravel())

    def emit_sym(rows, cols, block):
        emit(rows, cols, block)
        emit(cols, rows, block.T)

    for i in range(n_d):
        if m[i] == 0:
            continue
        blocks = incremental_blocks(
            model.features[i], batch.features[i],
            model.features[i], batch.features[i], hp.kernel,
        )
        emit_sym(new_rows[i], old_rows[i], alpha[i] * blocks.k_new_old.entries)
        diag_block = alpha[i] * blocks.h_new_new.entries
        diag_block = diag_block + hp.lam * np.eye(m[i])
        emit(new_rows[i], new_rows[i], diag_block)

    for i in range(n_d):
        for j in range(i + 1, n_d):
            scale = -hp.theta * a[i, j]
            if scale == 0.0 or (m[i] == 0 and m[j] == 0):
                continue
            blocks = incremental_blocks(
                model.features[i], batch.features[i],
                model.features[j], batch.features[j], hp.kernel,
            )
            emit_sym(old_rows[i], new_rows[j], scale * blocks.k_old_i_new_j.entries)
            emit_sym(new_rows[i], old_rows[j], scale * blocks.k_new_i_old_j.entries)
            emit_sym(new_rows[i], new_rows[j], scale * blocks.h_new_i_new_j.entries)

    affected = np.concatenate([r for r in new_rows if r.size] or [np.empty(0, int)])
    delta = linalg.SparsePerturbation(
        n_new,
        np.concatenate(rr) if rr else np.empty(0, int),
        np.concatenate(cc) if cc else np.empty(0, int),
        np.concatenate(vv) if vv else np.empty(0, float),
        affected,
    )
    insertions = [
        (int(old_offsets[i + 1]), int(m[i])) for i in range(n_d) if m[i] > 0
    ]
    return delta, insertions, new_offsets


def update_fast(model, batch, adjacency, hp):
    """Advance the fast model by one batch of new samples.

    Grows and perturbs the represented block system, refreshes the eigenpair
    with the low-rank update (truncating back to the configured rank), and
    recomputes the per-domain coefficients from the enlarged target stack.
    """
    if len(batch.features) != len(model.features):
        raise ValidationError("batch domain count does not match the model")
    d_model = model.features[0].shape[1] if model.features else 0
    for f in batch.features:
        if f.shape[0] and f.shape[1] != d_model:
            raise ValidationError("batch feature dimension does not match the model")
    delta, insertions, new_offsets = _batch_perturbation(model, batch, adjacency, hp)
    eig = linalg.eigen_update(model.eig, insertions, delta, rank=hp.rank)
    targets = np.concatenate(
        [
            np.concatenate(
                [
                    model.targets[model.offsets[i] : model.offsets[i + 1]],
                    batch.targets[i],
                ]
            )
            for i in range(len(model.features))
        ]
    ) if len(model.features) else np.zeros(0)
    features = tuple(
        np.vstack([model.features[i], batch.features[i]])
        if batch.features[i].shape[0]
        else model.features[i]
        for i in range(len(model.features))
    )
    weights = _fast_weights(eig, targets, new_offsets)
    return FastModel(eig, targets, features, new_offsets, hp, weights)


# Prediction ---------------------------------------------------------------


def predict(model, x, domain):
    """Predict one sample with the given model in the given domain."""
    n_dom = _model_domains(model)
    if n_dom is not None and not (0 <= domain < n_dom):
        raise ValidationError(f"domain index {domain} out of range [0, {n_dom})")
    return model.predict_one(np.asarray(x, dtype=float).ravel(), int(domain))


def _model_domains(model):
    if isinstance(model, LinearModel):
        return len(model.weights)
    if isinstance(model, (KernelModel, FastModel)):
        return len(model.features)
    return None


def predict_many(model, x, domains):
    """Vectorized prediction for routed samples."""
    x = np.asarray(x, dtype=float)
    domains = np.asarray(domains, dtype=int)
    out = np.zeros(x.shape[0])
    if isinstance(model, ZeroModel):
        return out
    if isinstance(model, SumFeaturesModel):
        return np.asarray(model.normalizer.apply(x.sum(axis=1)), dtype=float)
    if isinstance(model, PooledLinearModel):
        return x @ model.w
    if isinstance(model, PooledKernelModel):
        return gram(x, model.features, model.params).entries @ model.coefs
    n_dom = _model_domains(model)
    if domains.size and (domains.min() < 0 or domains.max() >= n_dom):
        raise ValidationError("routed domain index out of range")
    for dom in np.unique(domains):
        idx = np.where(domains == dom)[0]
        if isinstance(model, LinearModel):
            out[idx] = x[idx] @ model.weights[dom]
        else:
            feats = model.features[dom]
            coefs = (
                model.coefs[dom] if isinstance(model, KernelModel) else model.weights[dom]
            )
            params = model.params if isinstance(model, KernelModel) else model.hp.kernel
            if feats.shape[0]:
                out[idx] = gram(x[idx], feats, params).entries @ coefs
    return out


def route_domains(x, centroids):
    """Nearest-centroid domain for each sample (ties to the lower index)."""
    x = np.asarray(x, dtype=float)
    c = np.asarray(centroids, dtype=float)
    d2 = (
        np.einsum("ij,ij->i", x, x)[:, None]
        + np.einsum("ij,ij->i", c, c)[None, :]
        - 2.0 * x @ c.T
    )
    return np.argmin(d2, axis=1)


# Baselines ----------------------------------------------------------------


def _ridge(x, y, lam):
    d = x.shape[1]
    return _solve_guarded(x.T @ x + lam * np.eye(d), x.T @ y)


def _kernel_ridge(x, y, hp):
    k = gram(x, x, hp.kernel).entries
    k[np.diag_indices_from(k)] += hp.lam
    return _solve_guarded(k, y)


def fit_baseline(method, xs, ys, hp, normalizer=None):
    """Fit one of the uncoupled reference methods.

    ``predict0`` and ``sum3`` need no data; the combine variants pool all
    domains into one model; the separate variants fit one model per domain.
    """
    if method == "predict0":
        return ZeroModel()
    if method == "sum3":
        if normalizer is None:
            raise ValidationError("sum3 requires the label normalizer")
        return SumFeaturesModel(normalizer)
    xs = [np.asarray(x, dtype=float) for x in xs]
    ys = [np.asarray(y, dtype=float).ravel() for y in ys]
    if sum(x.shape[0] for x in xs) == 0:
        raise ValidationError(f"method {method!r} requires training data")
    if method == "linear-combine":
        x = np.vstack(xs)
        y = np.concatenate(ys)
        return PooledLinearModel(_ridge(x, y, hp.lam))
    if method == "linear-separate":
        return LinearModel(tuple(_ridge(x, y, hp.lam) for x, y in zip(xs, ys)))
    if method == "kernel-combine":
        x = np.vstack(xs)
        y = np.concatenate(ys)
        return PooledKernelModel(_kernel_ridge(x, y, hp), x, hp.kernel)
    if method == "kernel-separate":
        coefs = []
        for x, y in zip(xs, ys):
            coefs.append(
                _kernel_ridge(x, y, hp) if x.shape[0] else np.zeros(0)
            )
        return KernelModel(tuple(coefs), tuple(xs), hp.kernel)
    raise ValidationError(f"unknown baseline method {method!r}")


# Objectives (oracles for stationarity checks) ------------------------------


def objective_linear(xs, ys, adjacency, hp, weights):
    """Joint linear objective whose exact stationary point is the block system.

    Squared per-domain residuals, plus the coupling term
    ``theta * sum_{i<j} A_ij ||w_i - w_j||^2`` (each unordered domain pair
    counted once), plus the ridge penalty.
    """
    a = _adjacency(adjacency)
    n_d = a.shape[0]
    total = 0.0
    for i in range(n_d):
        r = np.asarray(xs[i], dtype=float) @ weights[i] - np.asarray(ys[i], dtype=float)
        total += float(r @ r) + hp.lam * float(weights[i] @ weights[i])
    for i in range(n_d):
        for j in range(i + 1, n_d):
            dw = weights[i] - weights[j]
            total += hp.theta * a[i, j] * float(dw @ dw)
    return total


def objective_kernel(xs, ys, adjacency, hp, coefs):
    """Quadratic potential of the kernel formulation.

    Per-domain data terms ``w' K w - 2 y' w``, a coupling term equal to
    ``theta * sum_{i<j} A_ij`` times the squared kernel-space distance
    between the domains' fitted functions, and an L2 penalty on the
    coefficients.  Its exact gradient is twice the block-system residual,
    so the closed-form solution is its unique stationary point.
    """
    a = _adjacency(adjacency)
    n_d = a.shape[0]
    xs = [np.asarray(x, dtype=float) for x in xs]
    ys = [np.asarray(y, dtype=float).ravel() for y in ys]
    ks = {}
    for i in range(n_d):
        ks[(i, i)] = gram(xs[i], xs[i], hp.kernel).entries
    total = 0.0
    for i in range(n_d):
        w = coefs[i]
        total += float(w @ ks[(i, i)] @ w) - 2.0 * float(ys[i] @ w)
        total += hp.lam * float(w @ w)
    for i in range(n_d):
        for j in range(i + 1, n_d):
            if a[i, j] == 0.0:
                continue
            k_ij = gram(xs[i], xs[j], hp.kernel).entries
            wi, wj = coefs[i], coefs[j]
            dist = (
                float(wi @ ks[(i, i)] @ wi)
                + float(wj @ ks[(j, j)] @ wj)
                - 2.0 * float(wi @ k_ij @ wj)
            )
            total += hp.theta * a[i, j] * dist
    return total


# Perturbation bound --------------------------------------------------------


def theorem1_bound(spectrum_t, spectrum_t1, r, delta, y_norm):
    """Upper bound on the parameter deviation of the rank-r updated model.

    ``spectrum_t`` and ``spectrum_t1`` are the full eigenvalue sets of the
    block system before and after the update; ``delta`` measures the relative
    perturbation of the approximate system as seen through its inverse.  The
    bound applies only when the discarded-tail mass is smaller than the total
    updated mass and ``delta < 1``; otherwise the not-applicable signal is
    raised.
    """
    st = np.sort(np.asarray(spectrum_t, dtype=float))[::-1]
    st1 = np.sort(np.asarray(spectrum_t1, dtype=float))[::-1]
    if r < 0:
        raise ValidationError(f"rank must be nonnegative, got {r}")
    tail = float(st[r:].sum()) if r < st.size else 0.0
    denom = float(st1.sum())
    if denom <= 0:
        raise BoundNotApplicableError("updated spectrum has nonpositive mass")
    ratio = tail / denom
    if not (0.0 <= ratio < 1.0):
        raise BoundNotApplicableError(f"tail ratio {ratio:.3g} outside [0, 1)")
    if not (np.isfinite(delta) and delta < 1.0):
        raise BoundNotApplicableError(f"delta {delta:.3g} >= 1")
    return tail / (denom**2 * (1.0 - delta)) * float(y_norm)
