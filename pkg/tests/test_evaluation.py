import numpy as np
import pytest

from iball.domains import DomainPartition
from iball.errors import ValidationError
from iball.evaluation import (
    BoundCheck,
    heatmap_bins,
    report_csv_lines,
    rmse,
    run_streaming_benchmark,
    verify_bound,
    write_report,
)
from iball.ingest import Example, split_stream
from iball.kernel import KernelParams
from iball.models import Hyperparams

from helpers import random_symmetric


class TestRmse:
    def test_zero_when_equal(self):
        assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_unit_offset(self):
        a = np.arange(5.0)
        assert rmse(a + 1.0, a) == 1.0

    def test_reference_value(self):
        np.testing.assert_allclose(rmse([0.0, 3.0], [4.0, 0.0]), np.sqrt(12.5))
        np.testing.assert_allclose(rmse([0.0, 3.0], [4.0, 0.0]), 3.5355339, atol=1e-7)

    def test_rejects_mismatch_and_empty(self):
        with pytest.raises(ValidationError):
            rmse([1.0], [1.0, 2.0])
        with pytest.raises(ValidationError):
            rmse([], [])


class TestHeatmapBins:
    def test_perfect_predictions_diagonal(self):
        vals = np.array([0.0, 1, 2, 3, 4, 5, 6, 7])
        mat = heatmap_bins(vals, vals)
        np.testing.assert_allclose(mat, np.eye(8) * 100.0, atol=1e-12)

    def test_zero_predictions_first_column(self):
        actual = np.array([0.0, 1, 3, 7, 7])
        mat = heatmap_bins(np.zeros(5), actual)
        nonempty = sorted(set(np.clip(np.round(actual).astype(int), 0, 7)))
        for row in nonempty:
            assert mat[row, 0] == 100.0
        assert mat.sum() == 100.0 * len(nonempty)

    def test_hand_computed_six_samples(self):
        actuals = np.array([0.0, 0.0, 1.0, 3.0, 3.0, 7.0])
        preds = np.array([0.0, 1.0, 1.0, 2.0, 3.0, 6.6])
        mat = heatmap_bins(preds, actuals)
        expected = np.zeros((8, 8))
        expected[0, 0] = expected[0, 1] = 50.0
        expected[1, 1] = 100.0
        expected[3, 2] = expected[3, 3] = 50.0
        expected[7, 7] = 100.0
        np.testing.assert_allclose(mat, expected, atol=1e-12)

    def test_rows_sum_to_100(self):
        rng = np.random.default_rng(0)
        preds = rng.uniform(0, 7, size=200)
        actuals = rng.uniform(0, 7, size=200)
        mat = heatmap_bins(preds, actuals)
        sums = mat.sum(axis=1)
        for s in sums[sums > 0]:
            assert abs(s - 100.0) <= 1e-9

    def test_out_of_range_clamped(self):
        mat = heatmap_bins(np.array([-3.0, 55.0]), np.array([0.0, 7.0]))
        assert mat[0, 0] == 100.0
        assert mat[7, 7] == 100.0

    def test_rejects_bad_edges(self):
        with pytest.raises(ValidationError):
            heatmap_bins([0.0], [0.0], bin_edges=[0.0, 1.0, 1.0])
        with pytest.raises(ValidationError):
            heatmap_bins([0.0], [0.0], bin_edges=[0.0, 1.0, 2.0])  # does not reach 7


class TestVerifyBound:
    def test_full_rank_zero_bound(self):
        rng = np.random.default_rng(1)
        s = random_symmetric(rng, 6) + 6 * np.eye(6)
        y = rng.normal(size=6)
        check = verify_bound(s, s, 6, y)
        assert check.applicable
        assert check.bound == 0.0
        assert check.measured <= 1e-9

    def test_weak_tail_regime_measured_below_bound(self):
        # dominant rotated top block, weakly coupled moderate tail, random
        # bordered growth; target concentrated in the retained subspace
        for seed in range(5):
            rng = np.random.default_rng(10 + seed)
            n, r, m = 40, 20, 4
            q, _ = np.linalg.qr(rng.normal(size=(r, r)))
            top = (q * rng.uniform(1.0, 3.0, r)) @ q.T
            s_t = np.zeros((n, n))
            s_t[:r, :r] = top
            s_t[r:, r:] = np.diag(rng.uniform(0.3, 0.7, n - r))
            s_t[:r, r:] = 1e-4 * rng.normal(size=(r, n - r))
            s_t[r:, :r] = s_t[:r, r:].T
            n1 = n + m
            s_t1 = np.zeros((n1, n1))
            s_t1[:n, :n] = s_t
            border = 0.2 * rng.normal(size=(m, r))
            s_t1[n:, :r] = border
            s_t1[:r, n:] = border.T
            corner = random_symmetric(rng, m) + 2.0 * np.eye(m)
            s_t1[n:, n:] = corner
            approx = s_t1.copy()
            from iball.linalg import sym_eig_topr

            eig = sym_eig_topr(s_t, r)
            approx[:n, :n] -= s_t - eig.reconstruct()
            eig_c = sym_eig_topr(approx, r)
            y = eig_c.vectors @ rng.normal(size=r) + 1e-7 * rng.normal(size=n1)
            check = verify_bound(s_t, s_t1, r, y)
            assert check.applicable
            assert check.measured <= check.bound

    def test_not_applicable_when_tail_dominates(self):
        s_t = np.eye(4)
        s_t1 = 0.01 * np.eye(4)
        check = verify_bound(s_t, s_t1, 1, np.ones(4))
        assert not check.applicable
        assert np.isnan(check.bound)

    def test_rejects_large_dimensions(self):
        s = np.eye(501)
        with pytest.raises(ValidationError):
            verify_bound(s, s, 2, np.ones(501))


def make_schedule(seed=0, n=80, n_domains=2, initial=0.2, step=0.2, test=0.2):
    rng = np.random.default_rng(seed)
    centers = np.array([[0.0, 0.0, 0.0], [4.0, 4.0, 4.0]])
    examples, assigns = [], []
    for i in range(n):
        dom = i % n_domains
        feats = np.abs(centers[dom] + rng.normal(size=3))
        label = float(np.clip(feats.sum() / 3.0, 0, 7))
        examples.append(Example(f"s{i:03d}", feats, label, 1950 + i))
        assigns.append(dom)
    schedule = split_stream(examples, np.array(assigns), n_domains, initial, step, test)
    sizes = np.bincount(assigns, minlength=n_domains)
    feats_all = np.array([e.features for e in examples])
    centroids = np.vstack(
        [feats_all[np.array(assigns) == d].mean(axis=0) for d in range(n_domains)]
    )
    partition = DomainPartition(np.array(assigns), centroids, sizes)
    a = np.array([[0.0, 0.5], [0.5, 0.0]])
    return schedule, partition, a


class TestStreamingBenchmark:
    def test_predict0_constant(self):
        schedule, partition, a = make_schedule()
        hp = Hyperparams(kernel=KernelParams(sigma=5.1))
        report = run_streaming_benchmark(schedule, ["predict0"], hp, partition, a)
        expected = rmse(np.zeros_like(schedule.test_targets), schedule.test_targets)
        for rec in report.steps:
            (res,) = rec.results
            np.testing.assert_allclose(res.rmse, expected, rtol=1e-12)
        assert [rec.n_train for rec in report.steps] == sorted(
            {rec.n_train for rec in report.steps}
        )

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_full_rank_fast_matches_kernel_joint(self):
        schedule, partition, a = make_schedule(n=40, initial=0.4, step=0.3, test=0.2)
        hp = Hyperparams(theta=0.01, lam=0.01, rank=40, kernel=KernelParams(sigma=5.1))
        report = run_streaming_benchmark(
            schedule, ["iball-kernel", "iball-fast"], hp, partition, a
        )
        for rec in report.steps:
            by_method = {res.method: res for res in rec.results}
            assert abs(by_method["iball-fast"].rmse - by_method["iball-kernel"].rmse) <= 1e-6

    def test_deterministic_apart_from_timing(self):
        schedule, partition, a = make_schedule()
        hp = Hyperparams(kernel=KernelParams(sigma=5.1))
        methods = ["predict0", "sum3", "linear-combine"]
        from iball.ingest import Normalizer

        r1 = run_streaming_benchmark(
            schedule, methods, hp, partition, a, normalizer=Normalizer()
        )
        r2 = run_streaming_benchmark(
            schedule, methods, hp, partition, a, normalizer=Normalizer()
        )
        strip = lambda rep: [
            (rec.step, rec.n_train, res.method, res.rmse, res.error)
            for rec in rep.steps
            for res in rec.results
        ]
        assert strip(r1) == strip(r2)

    def test_method_failure_recorded_and_run_continues(self):
        # initial fraction rounds to zero samples: data-hungry methods fail
        # at step 0 and recover on later steps
        schedule, partition, a = make_schedule(n=80, initial=0.01, step=0.3, test=0.2)
        assert schedule.n_initial == 0
        hp = Hyperparams(kernel=KernelParams(sigma=5.1))
        report = run_streaming_benchmark(
            schedule, ["predict0", "kernel-combine"], hp, partition, a
        )
        first = {res.method: res for res in report.steps[0].results}
        assert first["kernel-combine"].error != ""
        assert np.isnan(first["kernel-combine"].rmse)
        assert first["predict0"].error == ""
        last = {res.method: res for res in report.steps[-1].results}
        assert last["kernel-combine"].error == ""

    def test_unknown_method_rejected(self):
        schedule, partition, a = make_schedule()
        with pytest.raises(ValidationError):
            run_streaming_benchmark(
                schedule, ["gradient-boost"], Hyperparams(), partition, a
            )


class TestReportOutput:
    def test_csv_lines_and_files(self, tmp_path):
        schedule, partition, a = make_schedule()
        hp = Hyperparams(kernel=KernelParams(sigma=5.1))
        report = run_streaming_benchmark(
            schedule, ["predict0"], hp, partition, a, config={"seed": 0}
        )
        lines = report_csv_lines(report)
        assert lines[0] == "step,n,method,rmse,seconds"
        assert all(line.split(",")[2] == "predict0" for line in lines[1:])
        csv_path, json_path = tmp_path / "report.csv", tmp_path / "report.json"
        write_report(csv_path, json_path, report)
        assert csv_path.read_text().splitlines()[0] == "step,n,method,rmse,seconds"
        import json

        doc = json.loads(json_path.read_text())
        assert doc["config"] == {"seed": 0}
        assert len(doc["steps"]) == len(report.steps)
