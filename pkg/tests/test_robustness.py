"""Edge-path coverage beyond the per-module example tests."""

import numpy as np
import pytest

from iball.config import Config, load_config
from iball.errors import ValidationError
from iball.evaluation import heatmap_bins
from iball.kernel import KernelParams, gram
from iball.linalg import SparsePerturbation, eigen_update, partial_qr, sym_eig_topr
from iball.models import (
    Hyperparams,
    StreamBatch,
    assemble_kernel_system,
    fit_closed_form,
    fit_fast_initial,
    update_fast,
)

from helpers import dense_to_perturbation, random_symmetric


class TestEigenUpdateExistingRows:
    def test_perturbation_without_insertions(self):
        # perturb entries of existing rows/columns; no growth
        rng = np.random.default_rng(0)
        n = 7
        s = random_symmetric(rng, n)
        eig = sym_eig_topr(s, n)
        affected = np.array([1, 4])
        dense = np.zeros((n, n))
        patch = rng.normal(size=(2, n)) * 0.3
        dense[affected, :] = patch
        dense[:, affected] = patch.T
        sub = dense[np.ix_(affected, affected)]
        dense[np.ix_(affected, affected)] = (sub + sub.T) / 2
        delta = dense_to_perturbation(dense, affected)
        out = eigen_update(eig, [], delta)
        np.testing.assert_allclose(out.reconstruct(), s + dense, atol=1e-8)

    def test_mixed_growth_and_existing_perturbation(self):
        rng = np.random.default_rng(1)
        n, m = 5, 2
        s = random_symmetric(rng, n)
        eig = sym_eig_topr(s, n)
        n1 = n + m
        dense = np.zeros((n1, n1))
        # new rows appended at the end plus a tweak of old entry (0, 1)
        border = rng.normal(size=(m, n1)) * 0.4
        dense[n:, :] = border
        dense[:, n:] = border.T
        sub = dense[n:, n:]
        dense[n:, n:] = (sub + sub.T) / 2
        dense[0, 1] = dense[1, 0] = 0.25
        delta = dense_to_perturbation(dense, np.array([0, 1, n, n + 1]))
        out = eigen_update(eig, [(n, m)], delta)
        expected = np.zeros((n1, n1))
        expected[:n, :n] = s
        expected += dense
        np.testing.assert_allclose(out.reconstruct(), expected, atol=1e-8)


class TestPartialQrEdges:
    def test_zero_column_dropped(self):
        u = np.eye(4)[:, :2]
        p = np.zeros((4, 1))
        dq, r = partial_qr(u, p)
        assert dq.shape == (4, 0)
        np.testing.assert_allclose(r[:, 2], np.zeros(2))

    def test_empty_basis(self):
        rng = np.random.default_rng(2)
        p = rng.normal(size=(5, 2))
        dq, r = partial_qr(np.zeros((5, 0)), p)
        np.testing.assert_allclose(dq @ r, p, atol=1e-10)
        np.testing.assert_allclose(dq.T @ dq, np.eye(2), atol=1e-10)


class TestGramEdges:
    def test_far_apart_points_underflow_to_zero(self):
        params = KernelParams(sigma=0.5)
        x = np.array([[0.0, 0.0, 0.0], [1e6, 0.0, 0.0]])
        block = gram(x, x, params)
        assert block.entries[0, 1] == 0.0
        assert block.entries[0, 0] == 1.0
        vals = np.linalg.eigvalsh(block.entries)
        assert vals.min() >= -1e-10


class TestThetaZeroUpdate:
    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_decoupled_update_matches_per_domain_growth(self):
        rng = np.random.default_rng(3)
        xs = [rng.normal(size=(5, 3)), rng.normal(size=(4, 3))]
        ys = [rng.normal(size=5), rng.normal(size=4)]
        a = np.array([[0.0, 0.9], [0.9, 0.0]])
        hp = Hyperparams(theta=0.0, lam=0.05, rank=30, kernel=KernelParams(sigma=1.5))
        fast = fit_fast_initial(assemble_kernel_system(xs, ys, a, hp), hp)
        batch = StreamBatch(
            (rng.normal(size=(2, 3)), rng.normal(size=(1, 3))),
            (rng.normal(size=2), rng.normal(size=1)),
        )
        fast = update_fast(fast, batch, a, hp)
        for i in range(2):
            gx = np.vstack([xs[i], batch.features[i]])
            gy = np.concatenate([ys[i], batch.targets[i]])
            k = gram(gx, gx, hp.kernel).entries + hp.lam * np.eye(gx.shape[0])
            solo = np.linalg.solve(k, gy)
            np.testing.assert_allclose(fast.weights[i], solo, atol=1e-8)


class TestHeatmapCustomEdges:
    def test_coarse_bins(self):
        edges = np.array([0.0, 3.5, 7.0])
        preds = np.array([1.0, 5.0, 6.0])
        actuals = np.array([2.0, 2.0, 6.9])
        mat = heatmap_bins(preds, actuals, bin_edges=edges)
        np.testing.assert_allclose(mat, [[50.0, 50.0], [0.0, 100.0]])


class TestConfig:
    def test_kind_defaults(self):
        cfg = Config(kind="venue")
        assert cfg.n_domains == 5
        assert cfg.initial_fraction == 0.20
        cfg2 = Config(kind="paper")
        assert cfg2.n_domains == 10
        assert cfg2.initial_fraction == 0.001

    def test_unknown_override_key(self, tmp_path):
        path = tmp_path / "c.toml"
        path.write_text("[paths]\nworkdir = 'w'\n")
        with pytest.raises(ValidationError):
            load_config(path, overrides=["nonsense.key=1"])

    def test_range_validation(self):
        with pytest.raises(ValidationError):
            Config(lam=-1.0)
        with pytest.raises(ValidationError):
            Config(test_fraction=1.5)
        with pytest.raises(ValidationError):
            Config(method="boosted-trees")

    def test_methods_list_override(self, tmp_path):
        path = tmp_path / "c.toml"
        path.write_text("[paths]\nworkdir = 'w'\n")
        cfg = load_config(path, overrides=["bench.methods=predict0,sum3"])
        assert cfg.methods == ["predict0", "sum3"]


class TestSparsePerturbationDense:
    def test_duplicate_triplets_summed(self):
        delta = SparsePerturbation(
            3, [0, 0, 1], [1, 1, 0], [0.5, 0.5, 1.0], [0, 1]
        )
        dense = delta.matrix().toarray()
        np.testing.assert_allclose(dense[0, 1], 1.0)
        np.testing.assert_allclose(dense[1, 0], 1.0)


class TestSolverFallback:
    def test_indefinite_but_wellconditioned_system(self):
        # Cholesky fails (negative eigenvalue); LU fallback must solve it
        from iball.models import JointSystem

        s = np.diag([2.0, -1.5, 1.0])
        y = np.array([2.0, 3.0, 4.0])
        system = JointSystem(s, y, np.array([0, 3]), "linear")
        model = fit_closed_form(system)
        np.testing.assert_allclose(model.weights[0], y / np.diagonal(s), atol=1e-12)
