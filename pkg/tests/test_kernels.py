import numpy as np
import pytest

from pmar.kernels import (
    CUBIC,
    MATERN52,
    SQUARED_EXPONENTIAL,
    KernelSpec,
    default_jitter,
    draw_gp,
    gram_matrix,
    kernel_eval,
    median_lengthscale,
)
from pmar.numerics import DimensionMismatch, RngStream, cholesky


class TestKernelEval:
    def test_matern_at_zero_distance(self):
        assert kernel_eval(KernelSpec(MATERN52), [1.0, 2.0], [1.0, 2.0]) == 1.0

    def test_se_at_zero_distance(self):
        assert kernel_eval(KernelSpec(SQUARED_EXPONENTIAL), 0.3, 0.3) == 0.25

    def test_matern_at_unit_distance(self):
        got = kernel_eval(KernelSpec(MATERN52), 0.0, 1.0)
        expected = (1 + np.sqrt(5) + 5 / 3) * np.exp(-np.sqrt(5))
        np.testing.assert_allclose(got, expected, rtol=1e-12)
        np.testing.assert_allclose(got, 0.5240, atol=5e-5)

    def test_se_form(self):
        got = kernel_eval(KernelSpec(SQUARED_EXPONENTIAL), 0.0, 2.0)
        np.testing.assert_allclose(got, 0.25 * np.exp(-(2 / 9) * 4.0), rtol=1e-12)

    def test_lengthscale_rescales_distance(self):
        k1 = kernel_eval(KernelSpec(MATERN52, lengthscale=2.0), 0.0, 2.0)
        k2 = kernel_eval(KernelSpec(MATERN52, lengthscale=1.0), 0.0, 1.0)
        np.testing.assert_allclose(k1, k2, rtol=1e-12)

    def test_symmetry_and_max_at_diagonal(self):
        rng = np.random.default_rng(0)
        for family in (MATERN52, SQUARED_EXPONENTIAL):
            k = KernelSpec(family)
            a, b = rng.standard_normal(3), rng.standard_normal(3)
            assert kernel_eval(k, a, b) == pytest.approx(kernel_eval(k, b, a))
            assert kernel_eval(k, a, a) > kernel_eval(k, a, b)

    def test_cubic_grows(self):
        assert kernel_eval(KernelSpec(CUBIC), 0.0, 2.0) == 8.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            kernel_eval(KernelSpec(), [1.0], [1.0, 2.0])

    def test_unknown_family_rejected(self):
        with pytest.raises(ValueError):
            KernelSpec("rbf")


class TestGramMatrix:
    def test_matches_pairwise_eval(self):
        rng = np.random.default_rng(1)
        pts = rng.standard_normal((6, 2))
        for family in (MATERN52, SQUARED_EXPONENTIAL, CUBIC):
            k = KernelSpec(family)
            gram = gram_matrix(k, pts)
            for i in range(6):
                for j in range(6):
                    assert gram[i, j] == pytest.approx(kernel_eval(k, pts[i], pts[j]))

    def test_pd_after_default_jitter_on_200_points(self):
        rng = np.random.default_rng(2)
        pts = rng.uniform(-3.0, 3.0, size=(200, 2))
        for family in (MATERN52, SQUARED_EXPONENTIAL):
            gram = gram_matrix(KernelSpec(family), pts)
            cholesky(gram, jitter=default_jitter(gram))  # must not raise

    def test_zero_dimensional_points(self):
        gram = gram_matrix(KernelSpec(MATERN52), np.empty((4, 0)))
        np.testing.assert_allclose(gram, np.ones((4, 4)))


class TestMedianLengthscale:
    def test_known_value(self):
        pts = np.array([[0.0], [1.0], [3.0]])  # pairwise distances 1, 2, 3
        assert median_lengthscale(pts) == 2.0

    def test_duplicates_excluded(self):
        pts = np.array([[0.0], [0.0], [2.0]])
        assert median_lengthscale(pts) == 2.0

    def test_all_identical_falls_back(self):
        assert median_lengthscale(np.zeros((5, 1))) == 1.0


class TestDrawGp:
    def test_deterministic_given_stream(self):
        pts = np.linspace(0, 1, 10)[:, None]
        a = draw_gp(pts, KernelSpec(MATERN52), RngStream(3, 1))
        b = draw_gp(pts, KernelSpec(MATERN52), RngStream(3, 1))
        assert np.array_equal(a, b)

    def test_single_point_unit_variance(self):
        # K(x, x) = 1 for the Matern family: 20000 scalar draws behave N(0,1)
        gen = RngStream(4).generator()
        draws = np.array([draw_gp([[0.5]], KernelSpec(MATERN52), gen)[0] for _ in range(20000)])
        assert 0.96 < draws.var(ddof=1) < 1.04
        assert abs(draws.mean()) < 4 / np.sqrt(20000)

    def test_duplicated_points_agree(self):
        vals = draw_gp([[0.7], [0.7]], KernelSpec(MATERN52), RngStream(5))
        assert abs(vals[0] - vals[1]) < 1e-3

    def test_consumes_exactly_n_normals(self):
        pts = np.linspace(0, 1, 7)[:, None]
        gen1 = RngStream(6).generator()
        draw_gp(pts, KernelSpec(SQUARED_EXPONENTIAL), gen1)
        after1 = gen1.standard_normal()
        gen2 = RngStream(6).generator()
        gen2.standard_normal(7)
        after2 = gen2.standard_normal()
        assert after1 == after2

    def test_empirical_covariance_matches_gram(self):
        # 20000 draws at 5 fixed points, both PD kernels, entrywise 5% relative
        pts = np.array([[0.0], [0.3], [0.6], [0.9], [1.2]])
        n_draws = 20000
        for stream_id, family in enumerate((MATERN52, SQUARED_EXPONENTIAL)):
            k = KernelSpec(family)
            gram = gram_matrix(k, pts)
            gen = RngStream(7, stream_id).generator()
            draws = np.array([draw_gp(pts, k, gen) for _ in range(n_draws)])
            emp = draws.T @ draws / n_draws
            np.testing.assert_allclose(emp, gram, rtol=0.05)
            assert np.all(np.abs(draws.mean(axis=0)) < 4 / np.sqrt(n_draws))

    def test_cubic_rejected(self):
        with pytest.raises(ValueError):
            draw_gp([[0.0], [1.0]], KernelSpec(CUBIC), RngStream(8))
