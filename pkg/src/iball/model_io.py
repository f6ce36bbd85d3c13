"""Binary model snapshots.

Self-describing little-endian container: a fixed header (format version,
method tag, domain count, feature width, rank, coupling/ridge/bandwidth
values), the per-domain block offsets, then the model payload (eigenpair or
weights, retained features, targets).  All reals are 64-bit.
"""

import struct

import numpy as np

from . import linalg, models
from .errors import ValidationError
from .ingest import Normalizer
from .kernel import KernelParams

MAGIC = b"IBAL"
VERSION = 1
_HEADER = struct.Struct("<4sHHIIIddd")

_KIND_CODES = {
    "predict0": 0,
    "sum3": 1,
    "linear-separate": 2,
    "linear-combine": 3,
    "kernel-separate": 4,
    "kernel-combine": 5,
    "iball-linear": 6,
    "iball-kernel": 7,
    "iball-fast": 8,
}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}
_NORM_CODES = {"log2": 0, "linear": 1}
_CODE_NORMS = {v: k for k, v in _NORM_CODES.items()}


def _write_array(fh, arr):
    a = np.ascontiguousarray(np.asarray(arr, dtype="<f8"))
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    fh.write(struct.pack("<QQ", a.shape[0], a.shape[1]))
    fh.write(a.tobytes())


def _read_array(fh):
    rows, cols = struct.unpack("<QQ", fh.read(16))
    data = fh.read(rows * cols * 8)
    if len(data) != rows * cols * 8:
        raise ValidationError("truncated model file")
    return np.frombuffer(data, dtype="<f8").reshape(rows, cols).copy()


def _method_of(model):
    if isinstance(model, models.ZeroModel):
        return "predict0"
    if isinstance(model, models.SumFeaturesModel):
        return "sum3"
    if isinstance(model, models.PooledLinearModel):
        return "linear-combine"
    if isinstance(model, models.PooledKernelModel):
        return "kernel-combine"
    if isinstance(model, models.LinearModel):
        return "linear-separate"
    if isinstance(model, models.KernelModel):
        return "kernel-separate"
    if isinstance(model, models.FastModel):
        return "iball-fast"
    raise ValidationError(f"cannot serialize model of type {type(model).__name__}")


def save_model(path, model, hp, method=None):
    """Write a model snapshot; ``method`` overrides the inferred tag."""
    method = method or _method_of(model)
    if method not in _KIND_CODES:
        raise ValidationError(f"unknown method tag {method!r}")
    n_d, d, r = 0, 0, 0
    offsets = np.zeros(1)
    if isinstance(model, (models.LinearModel,)):
        n_d = len(model.weights)
        d = model.weights[0].shape[0] if n_d else 0
    elif isinstance(model, models.PooledLinearModel):
        n_d, d = 1, model.w.shape[0]
    elif isinstance(model, models.PooledKernelModel):
        n_d, d = 1, model.features.shape[1]
        offsets = np.array([0, model.features.shape[0]], dtype=float)
    elif isinstance(model, models.KernelModel):
        n_d = len(model.features)
        d = model.features[0].shape[1] if n_d else 0
        offsets = np.concatenate(
            [[0], np.cumsum([f.shape[0] for f in model.features])]
        ).astype(float)
    elif isinstance(model, models.FastModel):
        n_d = len(model.features)
        d = model.features[0].shape[1] if n_d else 0
        r = model.eig.rank
        offsets = model.offsets.astype(float)

    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(
                MAGIC,
                VERSION,
                _KIND_CODES[method],
                n_d,
                d,
                r,
                hp.theta,
                hp.lam,
                hp.kernel.sigma,
            )
        )
        _write_array(fh, offsets)
        if isinstance(model, models.ZeroModel):
            pass
        elif isinstance(model, models.SumFeaturesModel):
            norm = model.normalizer
            fh.write(struct.pack("<Bdd", _NORM_CODES[norm.strategy], norm.cap, norm.scale))
        elif isinstance(model, models.PooledLinearModel):
            _write_array(fh, model.w)
        elif isinstance(model, models.LinearModel):
            for w in model.weights:
                _write_array(fh, w)
        elif isinstance(model, models.PooledKernelModel):
            _write_array(fh, model.coefs)
            _write_array(fh, model.features)
        elif isinstance(model, models.KernelModel):
            for c, f in zip(model.coefs, model.features):
                _write_array(fh, c)
                _write_array(fh, f)
        elif isinstance(model, models.FastModel):
            _write_array(fh, model.eig.vectors)
            _write_array(fh, model.eig.values)
            _write_array(fh, model.targets)
            for f in model.features:
                _write_array(fh, f)


def load_model(path):
    """Read a snapshot back; returns ``(model, hp, method)``."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise ValidationError("truncated model header")
        magic, version, code, n_d, d, r, theta, lam, sigma = _HEADER.unpack(header)
        if magic != MAGIC:
            raise ValidationError("not a model snapshot (bad magic)")
        if version != VERSION:
            raise ValidationError(f"unsupported snapshot version {version}")
        method = _CODE_KINDS.get(code)
        if method is None:
            raise ValidationError(f"unknown method code {code}")
        rank = max(int(r), 1)
        hp = models.Hyperparams(theta, lam, rank, KernelParams(sigma=sigma))
        offsets = _read_array(fh).ravel().astype(int)

        if method == "predict0":
            return models.ZeroModel(), hp, method
        if method == "sum3":
            strat, cap, scale = struct.unpack("<Bdd", fh.read(17))
            return (
                models.SumFeaturesModel(Normalizer(_CODE_NORMS[strat], cap, scale)),
                hp,
                method,
            )
        if method == "linear-combine":
            return models.PooledLinearModel(_read_array(fh).ravel()), hp, method
        if method in ("linear-separate", "iball-linear"):
            weights = tuple(_read_array(fh).ravel() for _ in range(n_d))
            return models.LinearModel(weights), hp, method
        if method == "kernel-combine":
            coefs = _read_array(fh).ravel()
            feats = _read_array(fh)
            return models.PooledKernelModel(coefs, feats, hp.kernel), hp, method
        if method in ("kernel-separate", "iball-kernel"):
            coefs, feats = [], []
            for _ in range(n_d):
                coefs.append(_read_array(fh).ravel())
                feats.append(_read_array(fh))
            return models.KernelModel(tuple(coefs), tuple(feats), hp.kernel), hp, method
        # fast model
        vectors = _read_array(fh)
        values = _read_array(fh).ravel()
        targets = _read_array(fh).ravel()
        feats = tuple(_read_array(fh) for _ in range(n_d))
        eig = linalg.EigenPair(vectors, values)
        weights = tuple(
            linalg.apply_inverse(eig, targets)[offsets[i] : offsets[i + 1]]
            for i in range(n_d)
        )
        model = models.FastModel(eig, targets, feats, offsets, hp, weights)
        return model, hp, method
