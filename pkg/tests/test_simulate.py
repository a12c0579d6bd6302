import numpy as np
import pytest

from pmar.graphs import Admg, enumerate_pmar_admgs
from pmar.numerics import RngStream, sigmoid_ex1
from pmar.regression import fit_propensity
from pmar.simulate import (
    Dataset,
    GraphNotPmar,
    ResampleLimitExceeded,
    SimConfig,
    bias_dataset,
    draw_rd,
    simulate_admg,
    simulate_example1,
    true_regression_example1,
)

FIG_1C = Admg(directed=frozenset({("X", "Y"), ("X", "S"), ("Z", "Y"), ("Z", "S")}))


class TestDataset:
    def test_columns_validated(self):
        with pytest.raises(ValueError):
            Dataset(x=np.zeros(3), y=np.zeros(4))
        with pytest.raises(ValueError):
            Dataset(x=np.zeros(3), s=np.array([0.0, 1.0, 2.0]))
        with pytest.raises(ValueError):
            Dataset(x=np.zeros(3), p=np.array([0.5, 0.5, 1.5]))

    def test_selected_and_take(self):
        d = Dataset(x=np.arange(4.0), y=np.arange(4.0), s=np.array([1.0, 0.0, 1.0, 0.0]))
        sel = d.select_rows()
        assert sel.n == 2
        np.testing.assert_allclose(sel.x[:, 0], [0.0, 2.0])

    def test_xz_stacks(self):
        d = Dataset(x=np.zeros((3, 2)), z=np.ones(3))
        assert d.xz.shape == (3, 3)

    def test_missing_y_as_nan_allowed(self):
        d = Dataset(x=np.zeros(2), y=np.array([1.0, np.nan]))
        assert np.isnan(d.y[1])


class TestDrawRd:
    def test_standardized(self):
        v = draw_rd(500, RngStream(0))
        assert abs(v.mean()) < 1e-12
        assert abs(v.std(ddof=1) - 1.0) < 1e-12

    def test_deterministic(self):
        assert np.array_equal(draw_rd(100, RngStream(1, 2)), draw_rd(100, RngStream(1, 2)))

    def test_shape_varies_across_seeds(self):
        # random-distribution noise: the shape (e.g. excess kurtosis) moves
        # from draw to draw, unlike a fixed Gaussian
        kurts = []
        for seed in range(40):
            v = draw_rd(1000, RngStream(seed))
            kurts.append(np.mean(v**4) - 3.0)
        assert np.std(kurts) > 0.3
        assert max(kurts) - min(kurts) > 1.0


class TestSimulateAdmg:
    def test_rejects_non_pattern_graph(self):
        bad = Admg(directed=frozenset({("X", "Y")}))
        with pytest.raises(GraphNotPmar):
            simulate_admg(SimConfig(graph=bad, n=100), RngStream(0))
        d = simulate_admg(SimConfig(graph=bad, n=100, check_pattern=False), RngStream(0))
        assert d.n == 100

    def test_parentless_s_bernoulli_third(self):
        g = Admg(directed=frozenset({("S", "Z"), ("Z", "Y"), ("X", "Y")}))
        d = simulate_admg(SimConfig(graph=g, n=1000), RngStream(3))
        rate = d.s.mean()
        sigma = np.sqrt((1 / 3) * (2 / 3) / 1000)
        assert abs(rate - 1 / 3) < 3 * sigma
        np.testing.assert_allclose(d.p, 1 / 3)

    def test_columns_standardized(self):
        d = simulate_admg(SimConfig(graph=FIG_1C, n=400), RngStream(4))
        for col in (d.x[:, 0], d.z[:, 0], d.y):
            assert abs(col.mean()) < 1e-12
            assert abs(col.std(ddof=1) - 1.0) < 1e-12

    def test_selection_parent_shift_is_strongly_negative(self):
        # S a parent of Y: selected responses sit far below unselected ones
        g = Admg(directed=frozenset({("X", "Y"), ("Z", "Y"), ("Z", "S"), ("S", "Y"), ("X", "S")}))
        assert ("S", "Y") in g.directed
        d = simulate_admg(SimConfig(graph=g, n=1000, check_pattern=False), RngStream(5))
        gap = d.y[d.s == 1].mean() - d.y[d.s == 0].mean()
        assert gap < -1.0

    def test_probabilities_match_selection_rate(self):
        d = simulate_admg(SimConfig(graph=FIG_1C, n=2000), RngStream(6))
        assert abs(d.s.mean() - d.p.mean()) < 3 * np.sqrt(0.25 / 2000)

    def test_deterministic(self):
        a = simulate_admg(SimConfig(graph=FIG_1C, n=100), RngStream(7, 1))
        b = simulate_admg(SimConfig(graph=FIG_1C, n=100), RngStream(7, 1))
        assert np.array_equal(a.y, b.y) and np.array_equal(a.s, b.s)

    @pytest.mark.slow
    def test_all_enumerated_graphs_simulate(self):
        graphs = enumerate_pmar_admgs()
        for gid, g in enumerate(graphs):
            for seed in range(3):
                d = simulate_admg(SimConfig(graph=g, n=500), RngStream(seed, gid))
                assert d.n == 500
                assert np.all(np.isfinite(d.y))
                assert np.all((d.p >= 0) & (d.p <= 1))


class TestSimulateExample1:
    def test_true_curve(self):
        assert true_regression_example1(0.0) == 0.0
        np.testing.assert_allclose(true_regression_example1(np.pi / 2), np.pi / 4 + 3.0, rtol=1e-12)

    def test_generating_equations(self):
        d = simulate_example1(4000, RngStream(8), noise_scales=(1.0, 2.0, 2.0))
        x, z, y = d.x[:, 0], d.z[:, 0], d.y
        # residuals of the structural equations behave like the configured noises
        assert abs((z - 3 * np.sin(x)).std(ddof=1) - 2.0) < 0.1
        assert abs((y - 0.5 * x - z).std(ddof=1) - 2.0) < 0.1
        np.testing.assert_allclose(
            d.p, sigmoid_ex1(x) * (0.95 * sigmoid_ex1(z) + 0.05), atol=1e-12
        )

    def test_selected_count_near_123(self):
        counts = [int(simulate_example1(400, RngStream(s)).s.sum()) for s in range(20)]
        assert all(abs(c - 123) <= 35 for c in counts)

    def test_deterministic(self):
        a = simulate_example1(100, RngStream(9, 3))
        b = simulate_example1(100, RngStream(9, 3))
        assert np.array_equal(a.y, b.y)

    def test_response_independent_of_selection_given_features(self):
        # logistic fit of s on (x, z, y): the y coefficient stays
        # non-significant in at least 95 of 100 seeds
        insignificant = 0
        for seed in range(100):
            d = simulate_example1(400, RngStream(seed, 77))
            design = np.column_stack([d.x, d.z, d.y])
            model = fit_propensity(design, d.s, l2=1e-8)
            mu = model.predict(design)
            w = mu * (1 - mu)
            fisher = np.hstack([np.ones((d.n, 1)), design]).T * w
            cov = np.linalg.inv(fisher @ np.hstack([np.ones((d.n, 1)), design]) + 1e-8 * np.eye(4))
            wald = model.coef[3] / np.sqrt(cov[3, 3])
            insignificant += abs(wald) < 2.5758  # two-sided alpha = 0.01
        assert insignificant >= 95


class TestBiasDataset:
    @staticmethod
    def _base(n=506, seed=0):
        gen = RngStream(seed).generator()
        x = gen.standard_normal(n)
        z = 0.5 * x + gen.standard_normal(n)
        y = x - z + 0.3 * gen.standard_normal(n)
        return Dataset(x=x, z=z, y=y)

    def test_minimum_selection_enforced(self):
        d = bias_dataset(self._base(), RngStream(1))
        assert int(d.s.sum()) >= 120

    def test_probabilities_in_range(self):
        d = bias_dataset(self._base(), RngStream(2))
        assert np.all((d.p > 0) & (d.p < 1))

    def test_deterministic(self):
        a = bias_dataset(self._base(), RngStream(3))
        b = bias_dataset(self._base(), RngStream(3))
        assert np.array_equal(a.s, b.s)

    def test_resample_limit(self):
        with pytest.raises(ResampleLimitExceeded):
            bias_dataset(self._base(n=200), RngStream(4), min_selected=199, max_attempts=5)

    def test_literal_indicator_flips_frequency(self):
        base = self._base(n=2000)
        normal = bias_dataset(base, RngStream(5), min_selected=100)
        literal = bias_dataset(base, RngStream(5), min_selected=100, literal_indicator=True)
        # under the literal rule the selection frequency is 1 - p on average
        assert abs(normal.s.mean() + literal.s.mean() - 1.0) < 0.1

    def test_needs_all_columns(self):
        with pytest.raises(ValueError):
            bias_dataset(Dataset(x=np.zeros(10)), RngStream(6))
