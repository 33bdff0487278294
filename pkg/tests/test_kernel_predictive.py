import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy import integrate, stats

from acidpr.exceptions import DataError, NoSupportError, UnsupportedOperationError
from acidpr.kernel_predictive import (
    KernelMixtureState,
    kp_box_prob,
    kp_cdf,
    kp_conditional_density,
    kp_density,
    kp_init,
    kp_regression_mean,
    kp_sample,
    kp_update,
    rf_lambda,
    rf_state,
)
from acidpr.kernels import KernelSpec
from acidpr.sequences import RandomStream

G1 = KernelSpec("gaussian")
G2 = KernelSpec("gaussian", 2)


class TestInitUpdate:
    def test_init(self):
        s = kp_init([1.0, 2.0], 0.5, G1)
        assert s.n == 2
        assert_allclose(s.weights, [0.5, 0.5])
        assert_allclose(s.bandwidths, [0.5, 0.5])

    def test_empty_data(self):
        with pytest.raises(DataError):
            kp_init([], 0.5, G1)

    def test_update_appends(self):
        s = kp_update(kp_init([0.0], 1.0, G1), [3.0], 0.2)
        assert_allclose(s.weights, [0.5, 0.5])
        assert_allclose(s.centers[:, 0], [0.0, 3.0])
        assert_allclose(s.bandwidths, [1.0, 0.2])

    def test_update_linearity(self):
        old = kp_init([0.1, -0.7, 1.3], 0.4, G1)
        new = kp_update(old, [0.5], 0.25)
        t = np.linspace(-4, 4, 81)
        atom = stats.norm.cdf(t, 0.5, 0.25)
        assert_allclose(kp_cdf(new, t), 0.75 * kp_cdf(old, t) + 0.25 * atom, atol=1e-12)

    def test_many_updates(self, stream):
        s = kp_init([0.0, 1.0], 0.3, G1)
        g = stream.generator()
        for x in g.standard_normal(500):
            s = kp_update(s, [x], 0.1)
        assert s.n == 502

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            kp_update(kp_init([[0.0, 0.0]], 1.0, G2), [1.0, 2.0, 3.0], 0.1)

    def test_immutable_arrays(self):
        s = kp_init([0.0, 1.0], 0.3, G1)
        with pytest.raises(ValueError):
            s.centers[0, 0] = 5.0

    def test_dirac_zeroes_bandwidth(self):
        s = kp_init([1.0, 2.0], 0.5, KernelSpec("dirac"))
        assert_array_equal(s.bandwidths, [0.0, 0.0])


class TestDensityCdf:
    def test_values(self):
        assert_allclose(kp_density(kp_init([0.0], 1.0, G1), 0.0), 0.3989423, atol=1e-7)
        assert_allclose(kp_density(kp_init([0.0, 2.0], 1.0, G1), 1.0), 0.2419707, atol=1e-7)
        assert_allclose(kp_cdf(kp_init([0.0], 1.0, KernelSpec("uniform")), 0.0), 0.5)

    def test_density_integrates_to_one(self, rng):
        s = kp_init(rng.standard_normal(200), 0.3, G1)
        val, _ = integrate.quad(lambda x: float(kp_density(s, x)), -12, 12, limit=400)
        assert_allclose(val, 1.0, atol=1e-6)

    def test_dirac_cdf_is_step(self):
        s = kp_init([1.0, 2.0, 3.0, 4.0], 0.0, KernelSpec("dirac"))
        assert_allclose(kp_cdf(s, [0.5, 1.0, 2.5, 4.0]), [0.0, 0.25, 0.5, 1.0])
        with pytest.raises(UnsupportedOperationError):
            kp_density(s, 1.0)

    def test_cdf_multivariate_unsupported(self):
        with pytest.raises(UnsupportedOperationError):
            kp_cdf(kp_init([[0.0, 0.0]], 1.0, G2), 0.0)

    def test_box_prob_product(self):
        s = kp_init([[0.0, 0.0]], 1.0, G2)
        p = kp_box_prob(s, [-1, -np.inf], [1, 0])
        assert_allclose(p, (stats.norm.cdf(1) - stats.norm.cdf(-1)) * 0.5)


class TestSample:
    def test_dirac_frequencies(self):
        s = kp_init([1.0, 2.0, 3.0], 0.0, KernelSpec("dirac"))
        x = kp_sample(s, RandomStream(1), 100_000)
        assert set(np.unique(x)) == {1.0, 2.0, 3.0}
        sigma = math.sqrt(1 / 3 * 2 / 3 / 1e5)
        for v in (1.0, 2.0, 3.0):
            assert abs(np.mean(x == v) - 1 / 3) < 3 * sigma

    def test_small_bandwidth_concentrates(self, stream):
        x = kp_sample(kp_init([5.0], 1e-6, G1), stream, 1000)
        assert np.all(np.abs(x - 5.0) < 1e-4)

    def test_reproducible(self):
        s = kp_init([0.0, 1.0], 0.5, G1)
        assert_array_equal(kp_sample(s, RandomStream(4), 10), kp_sample(s, RandomStream(4), 10))

    @pytest.mark.parametrize("shape", ["gaussian", "uniform", "laplace"])
    def test_mixture_law(self, shape, rng):
        s = kp_init(rng.normal(0, 2, 7), 0.6, KernelSpec(shape))
        s = kp_update(s, [1.0], 0.1)
        x = kp_sample(s, RandomStream(8), 100_000)
        for a, b in [(-1.0, 0.5), (0.9, 1.1), (-np.inf, -2.0)]:
            p = kp_cdf(s, b) - (0.0 if np.isinf(a) else kp_cdf(s, a))
            freq = np.mean((x > a) & (x <= b))
            assert abs(freq - p) < 4 * math.sqrt(p * (1 - p) / 1e5)


class TestRegression:
    def test_two_atoms(self):
        s = kp_init([[0.0, 0.0], [1.0, 1.0]], 1.0, G2)
        assert_allclose(kp_regression_mean(s, 0.0), stats.norm.pdf(1) / (stats.norm.pdf(0) + stats.norm.pdf(1)), atol=1e-7)
        assert_allclose(kp_regression_mean(s, 0.0), 0.3775407, atol=1e-7)

    def test_constant_response(self, rng):
        X = rng.uniform(0, 5, 30)
        s = kp_init(np.column_stack([np.full(30, 2.5), X]), 0.4, G2)
        assert_allclose(kp_regression_mean(s, np.linspace(0, 5, 11)), 2.5)

    def test_shift_invariance(self, rng):
        X = rng.uniform(0, 5, 30)
        y = np.sin(X) + rng.standard_normal(30)
        q = np.linspace(0, 5, 17)
        s0 = kp_init(np.column_stack([y, X]), 0.4, G2)
        s1 = kp_init(np.column_stack([y + 3.25, X]), 0.4, G2)
        assert_allclose(kp_regression_mean(s1, q), kp_regression_mean(s0, q) + 3.25, atol=1e-10)

    def test_no_support(self):
        s = kp_init([[0.0, 0.0], [1.0, 1.0]], 0.5, KernelSpec("uniform", 2))
        with pytest.raises(NoSupportError):
            kp_regression_mean(s, 10.0)

    def test_normalized_weights_with_unequal_bandwidths(self):
        s = kp_update(kp_init([[0.0, 0.0]], 1.0, G2), [1.0, 0.5], 0.25)
        w = np.array([stats.norm.pdf(0.5, 0.0, 1.0), stats.norm.pdf(0.5, 0.5, 0.25)])
        assert_allclose(kp_regression_mean(s, 0.5), w[1] / w.sum())
        plain = w * np.array([1.0, 0.25])
        assert_allclose(kp_regression_mean(s, 0.5, normalized=False), plain[1] / plain.sum())


class TestConditionalDensity:
    def test_single_atom(self):
        s = kp_init([[1.5, 0.0]], 0.7, G2)
        y = np.linspace(-2, 4, 13)
        assert_allclose(kp_conditional_density(s, y, 0.3), stats.norm.pdf(y, 1.5, 0.7))

    def test_integrates_to_one(self, rng):
        s = kp_init(rng.standard_normal((50, 2)), 0.5, G2)
        val, _ = integrate.quad(lambda y: kp_conditional_density(s, y, 0.2), -15, 15, limit=400)
        assert_allclose(val, 1.0, atol=1e-5)

    def test_symmetry(self):
        s = kp_init([[1.0, 0.0], [-1.0, 0.0]], 0.8, G2)
        y = np.linspace(0, 3, 7)
        assert_allclose(kp_conditional_density(s, y, 0.0), kp_conditional_density(s, -y, 0.0), atol=1e-12)


class TestRandomForestKernel:
    def test_lambda(self):
        assert_allclose(rf_lambda(32, 5), 0.6931472, atol=1e-7)
        with pytest.raises(ValueError):
            rf_lambda(1, 2)

    def test_weights(self, rng):
        X = rng.uniform(0, 1, (6, 2))
        y = rng.standard_normal(6)
        s = rf_state(y, X, 16)
        lam = rf_lambda(16, 2)
        assert_allclose(s.bandwidths, 1 / lam)
        x = np.array([0.4, 0.6])
        w = np.exp(-lam * np.abs(X - x).sum(axis=1))
        assert_allclose(kp_regression_mean(s, x), w @ y / w.sum())


class TestCsv:
    def test_round_trip(self, tmp_path):
        s = kp_update(kp_init([[0.1, 0.2], [0.3, -1.0]], 0.5, G2), [2.0, 2.0], 0.125)
        path = tmp_path / "state.csv"
        s.to_csv(path)
        back = KernelMixtureState.from_csv(path, "gaussian")
        assert_array_equal(back.centers, s.centers)
        assert_array_equal(back.bandwidths, s.bandwidths)
        assert s.to_csv().splitlines()[0] == "atom_index,c1,c2,bandwidth"
