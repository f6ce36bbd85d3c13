"""Streaming benchmark replay, error metrics, and bound verification."""

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import linalg, models
from .errors import BoundNotApplicableError, NumericError, ValidationError

DEFAULT_BIN_EDGES = np.linspace(-0.5, 7.5, 9)
VERIFY_DIM_LIMIT = 500


def rmse(predictions, actuals):
    """Root mean squared error between two equal-length vectors."""
    p = np.asarray(predictions, dtype=float).ravel()
    a = np.asarray(actuals, dtype=float).ravel()
    if p.shape != a.shape or p.size == 0:
        raise ValidationError(
            f"need equal nonzero lengths, got {p.shape} and {a.shape}"
        )
    return float(np.sqrt(np.mean((p - a) ** 2)))


def heatmap_bins(predictions, actuals, bin_edges=None):
    """Row-normalized percentage matrix of actual vs predicted bins.

    Entry (y, x) is the percentage of samples whose actual value falls in
    bin y and whose prediction falls in bin x; each nonempty row sums to
    100.  Values outside the edge range are clamped into the end bins.
    """
    edges = np.asarray(
        DEFAULT_BIN_EDGES if bin_edges is None else bin_edges, dtype=float
    )
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ValidationError("bin edges must be strictly increasing")
    if edges[0] > 0.0 or edges[-1] < 7.0:
        raise ValidationError("bin edges must cover the [0, 7] label range")
    p = np.asarray(predictions, dtype=float).ravel()
    a = np.asarray(actuals, dtype=float).ravel()
    if p.shape != a.shape:
        raise ValidationError("predictions/actuals length mismatch")
    nbins = edges.size - 1
    ai = np.clip(np.digitize(a, edges) - 1, 0, nbins - 1)
    pi = np.clip(np.digitize(p, edges) - 1, 0, nbins - 1)
    counts = np.zeros((nbins, nbins))
    np.add.at(counts, (ai, pi), 1.0)
    out = np.zeros_like(counts)
    rows = counts.sum(axis=1)
    nonempty = rows > 0
    out[nonempty] = counts[nonempty] / rows[nonempty, None] * 100.0
    return out


# Streaming benchmark ---------------------------------------------------------


@dataclass(frozen=True)
class StepResult:
    method: str
    rmse: float
    seconds: float
    error: str = ""


@dataclass(frozen=True)
class StepRecord:
    step: int
    n_train: int
    results: tuple


@dataclass(frozen=True)
class BenchmarkReport:
    steps: tuple
    config: dict = field(default_factory=dict)

    def final_rmse(self, method):
        for rec in reversed(self.steps):
            for res in rec.results:
                if res.method == method and not res.error:
                    return res.rmse
        return float("nan")


def _fit_method(method, xs, ys, adjacency, hp, normalizer):
    if method in models.BASELINE_METHODS:
        return models.fit_baseline(method, xs, ys, hp, normalizer=normalizer)
    if method == "iball-linear":
        return models.fit_closed_form(
            models.assemble_linear_system(xs, ys, adjacency, hp)
        )
    if method == "iball-kernel":
        return models.fit_closed_form(
            models.assemble_kernel_system(xs, ys, adjacency, hp)
        )
    raise ValidationError(f"unknown method {method!r}")


def run_streaming_benchmark(
    schedule, methods, hp, partition, adjacency, normalizer=None, config=None
):
    """Replay the stream over the requested methods.

    At every step the non-fast methods refit from scratch on the accumulated
    training data while the fast model applies its incremental update; all
    methods then predict the fixed held-out test set.  Wall time covers
    fit/update plus prediction.  Per-step failures are recorded and the run
    continues.
    """
    methods = list(methods)
    if not methods or not schedule.batches and schedule.n_initial == 0:
        raise ValidationError("need at least one method and a nonempty schedule")
    unknown = [m for m in methods if m not in models.ALL_METHODS]
    if unknown:
        raise ValidationError(f"unknown methods: {unknown}")
    if schedule.test_targets.size == 0:
        raise ValidationError("schedule has an empty test set")

    test_domains = models.route_domains(schedule.test_features, partition.centroids)
    xs = [f.copy() for f in schedule.initial_features]
    ys = [t.copy() for t in schedule.initial_targets]
    fast_model = None
    records = []

    def run_step(step, batch=None):
        nonlocal fast_model
        results = []
        for method in methods:
            t0 = time.perf_counter()
            try:
                if method == "iball-fast":
                    if batch is None or fast_model is None:
                        # initial fit, or recovery after a failed initialization
                        system = models.assemble_kernel_system(xs, ys, adjacency, hp)
                        fast_model = models.fit_fast_initial(system, hp)
                    else:
                        fast_model = models.update_fast(fast_model, batch, adjacency, hp)
                    model = fast_model
                else:
                    model = _fit_method(method, xs, ys, adjacency, hp, normalizer)
                preds = models.predict_many(model, schedule.test_features, test_domains)
                err = rmse(preds, schedule.test_targets)
                results.append(
                    StepResult(method, err, time.perf_counter() - t0)
                )
            except (ValidationError, NumericError) as exc:
                results.append(
                    StepResult(method, float("nan"), time.perf_counter() - t0, str(exc))
                )
        records.append(StepRecord(step, int(sum(x.shape[0] for x in xs)), tuple(results)))

    run_step(0)
    for step, batch in enumerate(schedule.batches, start=1):
        for dom in range(schedule.n_domains):
            if batch.features[dom].shape[0]:
                xs[dom] = np.vstack([xs[dom], batch.features[dom]])
                ys[dom] = np.concatenate([ys[dom], batch.targets[dom]])
        run_step(step, batch)
    return BenchmarkReport(tuple(records), dict(config or {}))


def report_csv_lines(report):
    """Flatten a report to ``step,n,method,rmse,seconds`` lines."""
    lines = ["step,n,method,rmse,seconds"]
    for rec in report.steps:
        for res in rec.results:
            lines.append(
                f"{rec.step},{rec.n_train},{res.method},{res.rmse:.10g},{res.seconds:.6f}"
            )
    return lines


def write_report(csv_path, json_path, report):
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(report_csv_lines(report)) + "\n")
    doc = {
        "config": report.config,
        "steps": [
            {
                "step": rec.step,
                "n_train": rec.n_train,
                "results": [
                    {
                        "method": res.method,
                        "rmse": None if np.isnan(res.rmse) else res.rmse,
                        "seconds": res.seconds,
                        "error": res.error,
                    }
                    for res in rec.results
                ],
            }
            for rec in report.steps
        ],
    }
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def write_heatmap(path, matrix):
    with open(path, "w", encoding="utf-8") as fh:
        for row in np.asarray(matrix, dtype=float):
            fh.write(",".join(f"{v:.6f}" for v in row) + "\n")


# Bound verification ----------------------------------------------------------


@dataclass(frozen=True)
class BoundCheck:
    measured: float
    bound: float
    applicable: bool
    delta: float = float("nan")
    tail_ratio: float = float("nan")


def verify_bound(s_t, s_t1, r, y_t1):
    """Compare the measured parameter deviation against the spectral bound.

    Desk-scale diagnostic: the old matrix must occupy the leading block of
    the new one.  The approximate parameters are those of the rank-r updated
    representation (top-r eigenpairs of the approximated new system), and
    ``delta`` is evaluated through that same rank-limited inverse.
    """
    s_t = linalg.validate_symmetric(s_t, name="s_t")
    s_t1 = linalg.validate_symmetric(s_t1, name="s_t1")
    n, n1 = s_t.shape[0], s_t1.shape[0]
    if n1 < n:
        raise ValidationError("updated system smaller than the original")
    if n1 > VERIFY_DIM_LIMIT:
        raise ValidationError(f"verify_bound is desk-scale only (dim <= {VERIFY_DIM_LIMIT})")
    y = np.asarray(y_t1, dtype=float).ravel()
    if y.shape[0] != n1:
        raise ValidationError("target length does not match the updated system")
    if not (1 <= r <= n):
        raise ValidationError(f"rank must satisfy 1 <= r <= {n}")

    eig_t = linalg.sym_eig_topr(s_t, r)
    approx_new = s_t1.copy()
    approx_new[:n, :n] -= s_t - eig_t.reconstruct()

    spectrum_t = np.linalg.eigvalsh(s_t)
    spectrum_t1 = np.linalg.eigvalsh(s_t1)
    eig_c = linalg.sym_eig_topr(approx_new, min(r, n1))
    inv_op = (eig_c.vectors / _floored(eig_c.values)) @ eig_c.vectors.T
    w_exact = np.linalg.solve(s_t1, y)
    w_approx = inv_op @ y
    measured = float(np.linalg.norm(w_exact - w_approx))
    delta = float(np.linalg.norm(inv_op @ (s_t1 - approx_new)))
    try:
        bound = models.theorem1_bound(
            spectrum_t, spectrum_t1, r, delta, np.linalg.norm(y)
        )
    except BoundNotApplicableError:
        tail = np.sort(spectrum_t)[::-1][r:].sum()
        return BoundCheck(measured, float("nan"), False, delta, tail / spectrum_t1.sum())
    tail = np.sort(spectrum_t)[::-1][r:].sum()
    return BoundCheck(measured, bound, True, delta, float(tail / spectrum_t1.sum()))


def _floored(values, floor_rel=1e-10):
    absval = np.abs(values)
    floor = floor_rel * (absval.max() if absval.size else 1.0)
    out = np.where(absval >= floor, values, np.inf)
    return out
