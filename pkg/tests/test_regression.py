import numpy as np
import pytest

from pmar.kernels import CUBIC, SQUARED_EXPONENTIAL, KernelSpec
from pmar.numerics import DimensionMismatch, RngStream
from pmar.regression import (
    AllZeroWeights,
    Diverged,
    EmptyData,
    SingleClass,
    fit_krr,
    fit_polynomial,
    fit_propensity,
    load_model,
    model_from_dict,
    model_to_dict,
    predict,
    predict_propensity,
    save_model,
)

SE = KernelSpec(SQUARED_EXPONENTIAL)


class TestFitKrr:
    def test_single_point_interpolates(self):
        m = fit_krr([[0.0]], [5.0], kernel=SE, ridge=1e-8)
        np.testing.assert_allclose(m.predict([[0.0]]), [5.0], atol=1e-6)
        # centering makes the single-point fit exact for any ridge
        m2 = fit_krr([[0.0]], [5.0], kernel=SE, ridge=1.0)
        np.testing.assert_allclose(m2.predict([[0.0]]), [5.0], atol=1e-12)

    def test_joint_weight_ridge_scaling_invariance(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((20, 1))
        y = rng.standard_normal(20)
        w = rng.uniform(0.5, 2.0, 20)
        base = fit_krr(x, y, weights=w, kernel=SE, ridge=0.05)
        scaled = fit_krr(x, y, weights=3.0 * w, kernel=SE, ridge=3.0 * 0.05)
        np.testing.assert_allclose(base.dual_coef, scaled.dual_coef, rtol=1e-9)
        np.testing.assert_allclose(base.intercept, scaled.intercept, rtol=1e-12)

    def test_two_point_system_hand_solved(self):
        # oracle: closed-form 2x2 inverse of (K + n*ridge*W^-1) a = y - b
        x = np.array([[0.0], [1.0]])
        y = np.array([1.0, 3.0])
        w = np.array([1.0, 2.0])
        ridge = 0.1
        k01 = 0.25 * np.exp(-2.0 / 9.0)
        b = (1.0 * 1.0 + 2.0 * 3.0) / 3.0
        a11, a12 = 0.25 + ridge / 1.0, k01
        a21, a22 = k01, 0.25 + ridge / 2.0
        det = a11 * a22 - a12 * a21
        rhs = y - b
        alpha_expected = np.array(
            [(a22 * rhs[0] - a12 * rhs[1]) / det, (-a21 * rhs[0] + a11 * rhs[1]) / det]
        )
        m = fit_krr(x, y, weights=w, kernel=SE, ridge=ridge)
        np.testing.assert_allclose(m.dual_coef, alpha_expected, rtol=1e-12)
        np.testing.assert_allclose(m.intercept, b, rtol=1e-12)

    def test_far_query_returns_intercept(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((15, 1))
        y = rng.standard_normal(15)
        m = fit_krr(x, y, kernel=SE, ridge=0.01)
        np.testing.assert_allclose(m.predict([[1e4]]), [m.intercept], atol=1e-6)

    def test_large_ridge_gives_weighted_mean(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((30, 1))
        y = rng.standard_normal(30)
        w = rng.uniform(0.2, 3.0, 30)
        m = fit_krr(x, y, weights=w, kernel=SE, ridge=1e9)
        np.testing.assert_allclose(m.predict(x), np.full(30, np.sum(w * y) / np.sum(w)), atol=1e-6)

    def test_symmetric_data_predicts_zero_at_center(self):
        m = fit_krr([[-1.0], [1.0]], [-1.0, 1.0], kernel=SE, ridge=0.05)
        np.testing.assert_allclose(m.predict([[0.0]]), [0.0], atol=1e-9)

    def test_constant_targets_give_constant_model(self):
        m = fit_krr([[0.0], [1.0], [2.0]], [4.0, 4.0, 4.0], kernel=SE, ridge=0.01)
        np.testing.assert_allclose(m.predict([[0.5], [5.0]]), [4.0, 4.0], atol=1e-12)

    def test_local_optimality_of_dual_vector(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((25, 2))
        y = rng.standard_normal(25)
        w = rng.uniform(0.5, 2.0, 25)
        ridge = 0.02
        for null_space in ("const", "affine"):
            m = fit_krr(x, y, weights=w, kernel=SE, ridge=ridge, null_space=null_space)

            def objective(alpha):
                from pmar.kernels import gram_matrix

                gram = gram_matrix(SE, x)
                null = m.null_coef[0] + (x @ m.null_coef[1:] if null_space == "affine" else 0.0)
                resid = y - null - gram @ alpha
                return np.sum(w * resid**2) + ridge * alpha @ gram @ alpha

            best = objective(m.dual_coef)
            for _ in range(100):
                perturbed = m.dual_coef + rng.standard_normal(25) * 1e-3
                assert objective(perturbed) >= best - 1e-12

    def test_duplicate_point_with_split_weight(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((12, 1))
        y = rng.standard_normal(12)
        w = np.ones(12)
        base = fit_krr(x, y, weights=w, kernel=SE, ridge=0.05)
        x2 = np.vstack([x, x[:1]])
        y2 = np.concatenate([y, y[:1]])
        w2 = np.concatenate([w, [0.5]])
        w2[0] = 0.5
        dup = fit_krr(x2, y2, weights=w2, kernel=SE, ridge=0.05)
        grid = np.linspace(-2, 2, 9)[:, None]
        np.testing.assert_allclose(base.predict(grid), dup.predict(grid), atol=1e-8)

    def test_zero_weight_rows_dropped(self):
        x = np.array([[0.0], [1.0], [2.0]])
        y = np.array([1.0, 2.0, 100.0])
        m = fit_krr(x, y, weights=[1.0, 1.0, 0.0], kernel=SE, ridge=0.01)
        m_ref = fit_krr(x[:2], y[:2], weights=[1.0, 1.0], kernel=SE, ridge=0.01)
        np.testing.assert_allclose(m.predict([[0.5]]), m_ref.predict([[0.5]]), atol=1e-12)

    def test_errors(self):
        with pytest.raises(EmptyData):
            fit_krr(np.empty((0, 1)), [])
        with pytest.raises(AllZeroWeights):
            fit_krr([[0.0], [1.0]], [1.0, 2.0], weights=[0.0, 0.0])
        with pytest.raises(ValueError):
            fit_krr([[0.0]], [1.0], ridge=0.0)
        with pytest.raises(DimensionMismatch):
            predict(fit_krr([[0.0]], [1.0]), [[0.0, 1.0]])

    def test_affine_null_space_recovers_line_exactly(self):
        x = np.linspace(-2, 2, 30)[:, None]
        y = 2.0 * x[:, 0] - 1.0
        m = fit_krr(x, y, kernel=SE, ridge=0.5, null_space="affine")
        np.testing.assert_allclose(m.predict([[5.0], [-7.0]]), [9.0, -15.0], atol=1e-7)

    def test_cubic_spline_extrapolates_linearly(self):
        rng = np.random.default_rng(5)
        x = np.sort(rng.uniform(-2, 2, 60))[:, None]
        y = np.sin(2 * x[:, 0]) + 0.05 * rng.standard_normal(60)
        m = fit_krr(x, y, kernel=KernelSpec(CUBIC, 1.0), ridge=1e-3, null_space="affine")
        far = m.predict([[10.0], [11.0], [12.0]])
        np.testing.assert_allclose(np.diff(far, 2), 0.0, atol=1e-6)  # straight line out there

    def test_cubic_requires_affine(self):
        with pytest.raises(ValueError):
            fit_krr([[0.0], [1.0]], [0.0, 1.0], kernel=KernelSpec(CUBIC), null_space="const")


class TestPolynomial:
    def test_line_fit(self):
        m = fit_polynomial([[0.0], [1.0], [2.0]], [1.0, 3.0, 5.0], degree=1)
        np.testing.assert_allclose(m.predict([[3.0]]), [7.0], atol=1e-10)

    def test_weighted(self):
        m = fit_polynomial([[0.0], [1.0]], [0.0, 1.0], degree=0, weights=[3.0, 1.0])
        np.testing.assert_allclose(m.predict([[9.9]]), [0.25], atol=1e-12)


class TestPropensity:
    def test_balanced_coin_recovers_constant_half(self):
        gen = RngStream(10).generator()
        x = gen.standard_normal((2000, 2))
        s = (gen.random(2000) < 0.5).astype(float)
        m = fit_propensity(x, s)
        assert np.all(np.abs(m.coef) < 0.15)

    def test_known_coefficients_recovered(self):
        gen = RngStream(11).generator()
        x = gen.standard_normal((20000, 1))
        eta = 1.0 - 2.0 * x[:, 0]
        s = (gen.random(20000) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
        m = fit_propensity(x, s)
        np.testing.assert_allclose(m.coef, [1.0, -2.0], atol=0.1)

    def test_separable_diverges_without_penalty(self):
        gen = RngStream(12).generator()
        x = gen.standard_normal((200, 1))
        s = (x[:, 0] > 0).astype(float)
        with pytest.raises(Diverged):
            fit_propensity(x, s, l2=0.0)
        m = fit_propensity(x, s, l2=0.1)
        assert np.all(np.isfinite(m.coef))

    def test_penalized_loglik_nondecreasing(self):
        # re-run the IRLS loop manually, checking monotonicity at each step
        gen = RngStream(13).generator()
        x = gen.standard_normal((300, 2))
        eta = 0.5 * x[:, 0] - x[:, 1]
        s = (gen.random(300) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
        from scipy.special import expit

        design = np.hstack([np.ones((300, 1)), x])
        l2 = 0.01

        def pll(b):
            e = design @ b
            return -(np.sum(np.logaddexp(0.0, e) - s * e) + 0.5 * l2 * b @ b)

        beta = np.zeros(3)
        last = pll(beta)
        for _ in range(30):
            mu = expit(design @ beta)
            score = design.T @ (s - mu) - l2 * beta
            if np.max(np.abs(score)) <= 1e-8:
                break
            wvar = np.maximum(mu * (1 - mu), 1e-12)
            hess = design.T @ (design * wvar[:, None]) + l2 * np.eye(3)
            step = np.linalg.solve(hess, score)
            scale = 1.0
            while pll(beta + scale * step) < last and scale > 1e-8:
                scale *= 0.5
            beta = beta + scale * step
            now = pll(beta)
            assert now >= last - 1e-12
            last = now
        fitted = fit_propensity(x, s, l2=l2)
        np.testing.assert_allclose(fitted.coef, beta, atol=1e-6)

    def test_predict_values(self):
        from pmar.regression import PropensityModel

        m = PropensityModel(coef=np.array([0.0, 1.0]))
        np.testing.assert_allclose(predict_propensity(m, [[0.0]]), [0.5])
        np.testing.assert_allclose(predict_propensity(m, [[np.log(3.0)]]), [0.75], rtol=1e-12)
        zero = PropensityModel(coef=np.zeros(3))
        np.testing.assert_allclose(zero.predict(np.zeros((4, 2))), np.full(4, 0.5))

    def test_single_class_rejected(self):
        with pytest.raises(SingleClass):
            fit_propensity([[0.0], [1.0]], [1.0, 1.0])


class TestPersistence:
    def test_krr_roundtrip_bitwise(self, tmp_path):
        rng = np.random.default_rng(14)
        x = rng.standard_normal((10, 2))
        y = rng.standard_normal(10)
        for null_space in ("const", "affine"):
            m = fit_krr(x, y, kernel=SE, ridge=0.03, null_space=null_space)
            path = tmp_path / f"m_{null_space}.json"
            save_model(m, path)
            back = load_model(path)
            q = rng.standard_normal((5, 2))
            assert np.array_equal(m.predict(q), back.predict(q))

    def test_propensity_and_poly_roundtrip(self, tmp_path):
        gen = RngStream(15).generator()
        x = gen.standard_normal((100, 1))
        s = (gen.random(100) < 0.5).astype(float)
        prop = fit_propensity(x, s, l2=0.01)
        poly = fit_polynomial(x, x[:, 0] ** 2, degree=2)
        for model in (prop, poly):
            back = model_from_dict(model_to_dict(model))
            assert np.array_equal(model.predict(x), back.predict(x))
