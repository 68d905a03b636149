"""Factor analysis, varimax, PCA, LDA against closed-form oracles."""

import numpy as np
import pytest

from oracles import (
    fisher_direction,
    ppca_closed_form,
    principal_angles_deg,
    varimax_grid_best,
)
from scribeid import dimred
from scribeid.errors import DataError, FitError


def _monotone(trace, tol=1e-6):
    return all(b >= a - tol for a, b in zip(trace, trace[1:]))


def _planted_data(rng, n=10, m=2, n_obs=2000, noise=0.02):
    w_true = rng.normal(size=(n, m))
    y = rng.normal(size=(n_obs, m))
    x = y @ w_true.T + noise * rng.normal(size=(n_obs, n)) + rng.normal(size=n)
    return x, w_true


class TestFactorAnalysis:
    def test_recovers_planted_subspace(self, rng):
        x, w_true = _planted_data(rng)
        model, _ = dimred.fa_fit(x, 2, iters=40)
        angles = principal_angles_deg(model.loadings, w_true)
        assert angles.max() < 2.0

    def test_isotropic_noise_has_tiny_loadings(self, rng):
        # Large sample: the spurious top eigenvalues of pure noise scale
        # with sqrt(n/N), so the fitted loadings must shrink toward zero.
        x = rng.normal(size=(400000, 4))
        model, _ = dimred.fa_fit(x, 2, iters=200)
        norms = np.linalg.norm(model.loadings, axis=0)
        assert (norms < 0.1 * np.sqrt(model.noise_variance)).all()

    def test_sigma2_matches_ppca_closed_form(self, rng):
        x, _ = _planted_data(rng, noise=0.3)
        model, _ = dimred.fa_fit(x, 2, iters=80)
        _, sigma2_want = ppca_closed_form(x, 2)
        assert abs(model.noise_variance - sigma2_want) < 0.05 * sigma2_want

    def test_loglik_trace_monotone(self, rng):
        x = rng.normal(size=(200, 6)) @ rng.normal(size=(6, 6))
        _, trace = dimred.fa_fit(x, 3, iters=30)
        assert len(trace) == 30 and _monotone(trace)

    def test_rank_deficient_rejected(self, rng):
        base = rng.normal(size=(50, 1))
        x = np.hstack([base, base, base])  # rank-1 covariance
        with pytest.raises(FitError):
            dimred.fa_fit(x, 2)

    def test_shape_preconditions(self, rng):
        with pytest.raises(ValueError):
            dimred.fa_fit(rng.normal(size=(5, 8)), 2)  # N <= n
        with pytest.raises(ValueError):
            dimred.fa_fit(rng.normal(size=(50, 4)), 5)  # m > n


class TestFaTransform:
    def _model(self, rng, n=6, m=2):
        x, _ = _planted_data(rng, n=n, m=m, n_obs=500, noise=0.1)
        model, _ = dimred.fa_fit(x, m, iters=30)
        return model

    def test_mean_maps_to_zero(self, rng):
        model = self._model(rng)
        np.testing.assert_allclose(
            dimred.fa_transform(model.mean, model), 0.0, atol=1e-12
        )

    def test_noise_free_limit_inverts(self, rng):
        q, _ = np.linalg.qr(rng.normal(size=(8, 2)))
        model = dimred.FaModel(loadings=q, mean=np.zeros(8), noise_variance=1e-14)
        y0 = rng.normal(size=2)
        got = dimred.fa_transform(q @ y0, model)
        np.testing.assert_allclose(got, y0, atol=1e-6)

    def test_matches_full_inverse(self, rng):
        model = self._model(rng)
        x = rng.normal(size=6)
        w = model.loadings
        full = w.T @ np.linalg.inv(w @ w.T + model.noise_variance * np.eye(6))
        want = full @ (x - model.mean)
        np.testing.assert_allclose(dimred.fa_transform(x, model), want, atol=1e-9)

    def test_dimension_mismatch(self, rng):
        model = self._model(rng)
        with pytest.raises(ValueError):
            dimred.fa_transform(np.zeros(5), model)

    def test_affine_superposition(self, rng):
        model = self._model(rng)
        a = rng.normal(size=6)
        b = rng.normal(size=6)
        f = lambda v: dimred.fa_transform(v, model) - dimred.fa_transform(
            model.mean, model
        )
        np.testing.assert_allclose(
            f(model.mean + 0.3 * a + 0.7 * b),
            0.3 * f(model.mean + a) + 0.7 * f(model.mean + b),
            atol=1e-9,
        )


class TestVarimax:
    def test_single_factor_identity(self, rng):
        w = rng.normal(size=(5, 1))
        np.testing.assert_array_equal(dimred.varimax(w), w)

    def test_simple_structure_fixed_point(self):
        w = np.array(
            [[2.0, 0.0], [1.5, 0.0], [0.0, 1.0], [0.0, -2.5], [3.0, 0.0], [0.0, 0.7]]
        )
        rot = dimred.varimax(w)
        # already maximal: equal up to column sign/permutation
        options = [
            rot,
            rot[:, ::-1],
            rot * [-1, 1],
            rot * [1, -1],
            rot[:, ::-1] * [-1, 1],
            rot[:, ::-1] * [1, -1],
            rot * [-1, -1],
            rot[:, ::-1] * [-1, -1],
        ]
        assert any(np.allclose(o, w, atol=1e-9) for o in options)

    def test_criterion_non_decreasing_and_matches_grid(self, rng):
        w = rng.normal(size=(6, 2))
        rot = dimred.varimax(w)
        before = dimred.varimax_criterion(w)
        after = dimred.varimax_criterion(rot)
        assert after >= before - 1e-12
        assert abs(after - varimax_grid_best(w)) < 1e-4

    def test_rotation_is_orthogonal(self, rng):
        w = rng.normal(size=(9, 3))
        rot = dimred.varimax(w)
        # Gram matrices agree iff rot = w @ R with R orthogonal
        np.testing.assert_allclose(rot @ rot.T, w @ w.T, atol=1e-9)


class TestPca:
    def test_data_on_x_axis(self, rng):
        x = np.zeros((40, 2))
        x[:, 0] = rng.normal(size=40)
        model = dimred.pca_fit(x, 2)
        assert abs(abs(model.components[0, 0]) - 1.0) < 1e-9
        assert model.eigenvalues[1] < 1e-12

    def test_full_rank_preserves_distances(self, rng):
        x = rng.normal(size=(30, 5))
        model = dimred.pca_fit(x, 5)
        y = dimred.pca_transform(x, model)
        dx = np.linalg.norm(x[:, None] - x[None, :], axis=2)
        dy = np.linalg.norm(y[:, None] - y[None, :], axis=2)
        np.testing.assert_allclose(dx, dy, atol=1e-9)

    def test_matches_covariance_eigensolver(self, rng):
        x = rng.normal(size=(50, 5)) @ rng.normal(size=(5, 5))
        model = dimred.pca_fit(x, 5)
        cov = (x - x.mean(0)).T @ (x - x.mean(0)) / x.shape[0]
        vals, vecs = np.linalg.eigh(cov)
        vals, vecs = vals[::-1], vecs[:, ::-1]
        np.testing.assert_allclose(model.eigenvalues, vals, atol=1e-8)
        for k in range(5):
            dot = abs(model.components[k] @ vecs[:, k])
            assert abs(dot - 1.0) < 1e-8  # up to sign

    def test_components_orthonormal_sorted(self, rng):
        x = rng.normal(size=(60, 7))
        model = dimred.pca_fit(x, 4)
        np.testing.assert_allclose(
            model.components @ model.components.T, np.eye(4), atol=1e-9
        )
        assert (np.diff(model.eigenvalues) <= 1e-12).all()
        assert (model.eigenvalues >= -1e-12).all()

    def test_k_out_of_range(self, rng):
        with pytest.raises(ValueError):
            dimred.pca_fit(rng.normal(size=(10, 3)), 4)


class TestLda:
    def test_two_class_closed_form(self, rng):
        cov = np.array([[1.0, 0.4], [0.4, 1.0]])
        x1 = rng.normal(size=(150, 2)) @ np.linalg.cholesky(cov).T + [2.5, 0.0]
        x2 = rng.normal(size=(150, 2)) @ np.linalg.cholesky(cov).T
        x = np.vstack([x1, x2])
        labels = ["a"] * 150 + ["b"] * 150
        model = dimred.lda_fit(x, labels, 1)
        want = fisher_direction(x1, x2)
        got = model.projection[:, 0]
        cos = abs(want @ got) / (np.linalg.norm(want) * np.linalg.norm(got))
        assert np.degrees(np.arccos(min(cos, 1.0))) < 1.0

    def test_rank_bound_c_minus_one(self, rng):
        x = np.vstack([rng.normal(size=(20, 5)) + mu for mu in (0, 3, 6)])
        labels = ["a"] * 20 + ["b"] * 20 + ["c"] * 20
        model = dimred.lda_fit(x, labels, 2)
        assert model.eigenvalues.shape == (2,)
        assert (model.eigenvalues >= 0).all()
        with pytest.raises(ValueError):
            dimred.lda_fit(x, labels, 3)  # m > c-1

    def test_identical_means_rejected(self, rng):
        base = rng.normal(size=(30, 3))
        x = np.vstack([base, base])
        labels = ["a"] * 30 + ["b"] * 30
        with pytest.raises(FitError):
            dimred.lda_fit(x, labels, 1)

    def test_small_class_rejected(self, rng):
        x = rng.normal(size=(11, 2))
        labels = ["a"] * 10 + ["b"]
        with pytest.raises(DataError):
            dimred.lda_fit(x, labels, 1)

    def test_projection_separates_classes(self, rng):
        x1 = rng.normal(size=(80, 4)) + [4, 0, 0, 0]
        x2 = rng.normal(size=(80, 4))
        x = np.vstack([x1, x2])
        model = dimred.lda_fit(x, ["a"] * 80 + ["b"] * 80, 1)
        y = dimred.lda_transform(x, model).ravel()
        m1, m2 = y[:80].mean(), y[80:].mean()
        pooled_std = np.concatenate([y[:80] - m1, y[80:] - m2]).std()
        assert abs(m1 - m2) / pooled_std > 3.0

    def test_objective_beats_random_rotations(self, rng):
        x = np.vstack(
            [rng.normal(size=(60, 3)) + mu for mu in ([0, 0, 0], [2, 1, 0])]
        )
        labels = ["a"] * 60 + ["b"] * 60
        model = dimred.lda_fit(x, labels, 1)

        def objective(direction):
            y = (x - x.mean(0)) @ direction
            ya, yb = y[:60], y[60:]
            between = (ya.mean() - yb.mean()) ** 2
            within = ((ya - ya.mean()) ** 2).sum() + ((yb - yb.mean()) ** 2).sum()
            return between / within

        best = objective(model.projection[:, 0])
        for _ in range(50):
            v = rng.normal(size=3)
            assert objective(v / np.linalg.norm(v)) <= best * (1 + 1e-9)


class TestTransformFiles:
    def test_fa_roundtrip(self, tmp_path, rng):
        x, _ = _planted_data(rng, n=6, m=2, n_obs=300)
        model, _ = dimred.fa_fit(x, 2, iters=10)
        path = tmp_path / "t.fa"
        dimred.save_transform(model, path)
        back = dimred.load_transform(path)
        np.testing.assert_array_equal(back.loadings, model.loadings)
        assert back.noise_variance == model.noise_variance

    def test_pca_roundtrip(self, tmp_path, rng):
        model = dimred.pca_fit(rng.normal(size=(40, 5)), 3)
        path = tmp_path / "t.pca"
        dimred.save_transform(model, path)
        back = dimred.load_transform(path)
        np.testing.assert_array_equal(back.components, model.components)
        np.testing.assert_array_equal(back.eigenvalues, model.eigenvalues)

    def test_lda_roundtrip(self, tmp_path, rng):
        x = np.vstack([rng.normal(size=(30, 4)) + m for m in (0, 3)])
        model = dimred.lda_fit(x, ["w1"] * 30 + ["w2"] * 30, 1)
        path = tmp_path / "t.lda"
        dimred.save_transform(model, path)
        back = dimred.load_transform(path)
        np.testing.assert_array_equal(back.projection, model.projection)
        assert back.classes == model.classes
        v = rng.normal(size=4)
        np.testing.assert_allclose(
            dimred.lda_transform(v, back), dimred.lda_transform(v, model)
        )
