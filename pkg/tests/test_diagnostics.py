import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from acidpr.diagnostics import (
    FAIL,
    INCONCLUSIVE,
    PASS,
    DiagnosticsReport,
    XiSequence,
    acid_discrepancy_mc,
    bandwidth_condition_check,
    default_sets,
    mstep_convergence_diag,
    summability_check,
    xi_kernel,
    xi_kernel_sequence,
)
from acidpr.kernel_predictive import kp_init
from acidpr.kernels import AcidConstants, KernelSpec, acid_constants, tv_numeric
from acidpr.parametric import GaussianLocation, GaussianMeanState, ParametricState, StudentTLocation
from acidpr.sequences import BandwidthSchedule, RandomStream, StepSchedule


def _mean_state(n, eta=0.1, sigma2=1.0):
    return GaussianMeanState([0.3], [sigma2], StepSchedule.constant(eta), n)


class TestXiKernel:
    def test_exponential_first_term(self):
        h = np.exp(-np.arange(1, 10, dtype=float))
        assert_allclose(xi_kernel(h, 1, AcidConstants(1.0, 1.0)), 0.1839397, atol=1e-7)

    @pytest.mark.parametrize("eps", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("n", [1, 5, 40])
    def test_constant_bandwidth(self, eps, n):
        h = np.full(n + 1, 0.3)
        assert_allclose(xi_kernel(h, n, AcidConstants(2.0, eps)), 2.0 / (n + 1))

    def test_empty_sum(self):
        assert xi_kernel(np.ones(3), 0, AcidConstants(1.0, 1.0)) == 0.0

    def test_matches_direct_sum(self):
        sched = BandwidthSchedule.exponential(0.4, 0.01, 20, 200)
        h = sched.full
        n = 57
        direct = sum(1.5 * (h[n] / h[i]) ** 2 for i in range(n)) / (n * (n + 1))
        assert_allclose(xi_kernel(sched, n, AcidConstants(1.5, 2.0)), direct, rtol=1e-12)
        assert_allclose(xi_kernel(lambda i: h[i - 1], n, AcidConstants(1.5, 2.0)), direct, rtol=1e-12)

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            xi_kernel(np.ones(3), 5, AcidConstants(1.0, 1.0))

    def test_exponential_sequence_is_cauchy(self):
        N = 10_000
        log_h = -np.arange(1, N + 2, dtype=float)
        xi = xi_kernel_sequence(log_h, N, AcidConstants(0.25, 1.0), "exponential")
        assert summability_check(xi)[0] == PASS
        tail = xi.partial_sums[N] - xi.partial_sums[N - 1]
        assert tail < 1e-8


class TestSummability:
    def test_p_series(self):
        assert summability_check(XiSequence.power(2.0, 1000))[0] == PASS

    def test_harmonic(self):
        assert summability_check(XiSequence.power(1.0, 1000))[0] == FAIL

    def test_numeric_tail_fit(self):
        n = np.arange(2001, dtype=float)
        g = np.random.default_rng(0)
        v = np.zeros(2001)
        v[1:] = n[1:] ** -1.05 * np.exp(0.05 * g.standard_normal(2000))
        verdict, ev = summability_check(XiSequence(v))
        assert verdict == INCONCLUSIVE
        assert abs(ev["slope"] + 1.05) < 0.2

    def test_short_horizon(self):
        with pytest.raises(ValueError):
            summability_check(XiSequence.power(2.0, 50))

    def test_negative_values_rejected(self):
        with pytest.raises(ValueError):
            XiSequence([0.1, -0.2])


class TestBandwidthCondition:
    @pytest.mark.parametrize("eps", [1.0, 2.0])
    def test_analytic_families(self, eps):
        assert bandwidth_condition_check("exponential", eps, 10_000, (1.0, 1.0)).verdict == PASS
        assert bandwidth_condition_check("polynomial", eps, 10_000, (1.0, 0.5)).verdict == FAIL
        assert bandwidth_condition_check("constant", eps, 10_000, (1.0,)).verdict == FAIL

    def test_exponential_trace(self):
        res = bandwidth_condition_check("exponential", 1.0, 10_000, (1.0, 1.0))
        sel = (res.n >= 100) & (res.n <= 10_000)
        ratio = res.c_n[sel] * res.n[sel]
        assert np.all((ratio > 0.5) & (ratio < 2.0))
        assert np.all(np.diff(res.c_log_n[sel]) < 0)

    def test_constant_trace(self):
        res = bandwidth_condition_check("constant", 1.0, 1000)
        assert_allclose(res.c_n, res.n / (res.n + 1))

    def test_explicit_schedule(self):
        i = np.arange(1, 1002, dtype=float)
        assert bandwidth_condition_check(np.exp(-0.7 * i), 1.0, 1000).verdict == PASS
        assert bandwidth_condition_check(np.exp(-0.1 * i), 1.0, 1000).verdict == FAIL
        assert bandwidth_condition_check(i**-0.3, 1.0, 1000).verdict == FAIL
        with pytest.raises(ValueError):
            bandwidth_condition_check(np.zeros(1001), 1.0, 1000)

    def test_schedule_object(self):
        sched = BandwidthSchedule.exponential(0.5, 0.01, 10, 2000)
        assert bandwidth_condition_check(sched, 2.0, 1000).verdict == PASS

    def test_minimum_horizon(self):
        with pytest.raises(ValueError):
            bandwidth_condition_check("constant", 1.0, 10)


class TestDiscrepancy:
    def test_dirac_exact_zero(self, rng):
        s = kp_init(rng.standard_normal(30), 0.0, KernelSpec("dirac"))
        sets = [(a, a + w) for a, w in zip(rng.normal(0, 2, 50), rng.uniform(0.1, 3, 50))]
        res = acid_discrepancy_mc(s, sets)
        assert res.exact and res.verdict == PASS
        assert np.all(res.estimates == 0.0)

    @pytest.mark.parametrize("n", [10, 50])
    def test_gaussian_mean(self, n):
        res = acid_discrepancy_mc(_mean_state(n), K=10_000, stream=RandomStream(1, 2))
        assert_allclose(res.xi_n, 0.015)
        assert res.verdict == PASS
        assert len(res.estimates) == 30

    def test_gaussian_mean_bounded_by_two_step_tv(self):
        eta = 0.3
        s = _mean_state(10, eta)
        res = acid_discrepancy_mc(s, K=10_000, stream=RandomStream(3))
        m, v = 0.3, 1.0
        tv = tv_numeric(
            lambda x: stats.norm.pdf(x, m, math.sqrt(v)),
            lambda x: stats.norm.pdf(x, m, math.sqrt(v * (1 + eta**2))),
            (-20, 20),
        )
        assert np.all(np.abs(res.estimates) <= tv + 3 * res.se)

    @pytest.mark.parametrize("n", [10, 50])
    @pytest.mark.parametrize("shape", ["gaussian", "uniform", "laplace"])
    def test_kernel_scheme(self, n, shape):
        data = RandomStream(4).generator().standard_normal(n)
        spec = KernelSpec(shape)
        s = kp_init(data, 0.5, spec)
        res = acid_discrepancy_mc(s, K=10_000, stream=RandomStream(5), h_next=0.45)
        assert_allclose(res.xi_n, xi_kernel(np.append(np.full(n, 0.5), 0.45), n, acid_constants(spec)))
        assert res.verdict == PASS

    def test_uniform_kernel_far_set(self):
        s = kp_init([0.0, 1.0], 0.5, KernelSpec("uniform"))
        res = acid_discrepancy_mc(s, [(5.0, 6.0)], K=2000, stream=RandomStream(6), h_next=0.3)
        assert res.estimates[0] == 0.0 and res.se[0] == 0.0

    @pytest.mark.parametrize(
        "model, theta", [(GaussianLocation(2.0), 0.0), (StudentTLocation(1.0, 3.0), 1.0)]
    )
    @pytest.mark.parametrize("n", [10, 50])
    def test_parametric(self, model, theta, n):
        s = ParametricState(model, theta, StepSchedule.constant(0.1), n)
        res = acid_discrepancy_mc(s, K=10_000, stream=RandomStream(7))
        assert res.verdict == PASS

    def test_constrained_parametric(self):
        s = ParametricState(StudentTLocation(1.0, 3.0), 0.2, StepSchedule.constant(0.3), 10, (0.0, 0.5))
        assert acid_discrepancy_mc(s, K=10_000, stream=RandomStream(8)).verdict == PASS

    def test_unit_variance_gaussian_is_inconclusive(self):
        s = ParametricState(GaussianLocation(1.0), 0.0, StepSchedule.constant(0.1), 10)
        res = acid_discrepancy_mc(s, K=10_000, stream=RandomStream(9))
        assert res.xi_n == 0.0
        assert res.verdict in (PASS, INCONCLUSIVE)

    def test_large_violation_fails(self):
        res = acid_discrepancy_mc(_mean_state(10, eta=0.9), K=10_000, stream=RandomStream(1), xi_n=0.01)
        assert res.verdict == FAIL

    def test_kernel_needs_h_next(self):
        with pytest.raises(ValueError):
            acid_discrepancy_mc(kp_init([0.0, 1.0], 0.5, KernelSpec("gaussian")), K=1000)

    def test_thread_count_does_not_change_result(self):
        a = acid_discrepancy_mc(_mean_state(10), K=10_000, stream=RandomStream(2), n_jobs=1)
        b = acid_discrepancy_mc(_mean_state(10), K=10_000, stream=RandomStream(2), n_jobs=4)
        assert a.estimates.tobytes() == b.estimates.tobytes()

    def test_default_sets_multivariate(self):
        s = GaussianMeanState([0.0, 0.0], [1.0, 1.0], StepSchedule.constant(0.1), 5)
        sets = default_sets(s, stream=RandomStream(1))
        assert len(sets) == 20
        assert acid_discrepancy_mc(s, sets, K=10_000, stream=RandomStream(2)).verdict == PASS

    def test_rows_json(self):
        res = acid_discrepancy_mc(_mean_state(10), K=1000, stream=RandomStream(2))
        rep = DiagnosticsReport()
        rep.add("acid_discrepancy", res.verdict, rows=res.rows())
        first = json.loads(rep.to_json_lines().splitlines()[0])
        assert set(first) == {"check", "verdict", "n", "set_id", "estimate", "se", "xi_n"}


class TestMStep:
    def test_harmonic_gaussian_mean_converges(self):
        s = GaussianMeanState([0.0], [1.0], StepSchedule.harmonic(), 20)
        res = mstep_convergence_diag(s, [500, 1000], RandomStream(3))
        assert res.distances[-1] < 0.05
        assert res.verdict == PASS

    def test_constant_step_fails(self):
        s = GaussianMeanState([0.0], [1.0], StepSchedule.constant(0.2), 20)
        res = mstep_convergence_diag(s, [500, 1000], RandomStream(3))
        assert res.verdict == FAIL

    def test_dirac_distances_shrink(self, rng):
        s = kp_init(rng.standard_normal(20), 0.0, KernelSpec("dirac"))
        res = mstep_convergence_diag(s, [0, 100, 400, 1600], RandomStream(4))
        assert res.distances[-1] < res.distances[0]

    def test_kernel_with_schedule(self, rng):
        s = kp_init(rng.standard_normal(50), 0.4, KernelSpec("gaussian"))
        sched = BandwidthSchedule.exponential(0.4, 0.002, 50, 1000)
        res = mstep_convergence_diag(s, [500, 1000], RandomStream(5), sched)
        assert len(res.rows()) == 1

    def test_bad_checkpoints(self):
        with pytest.raises(ValueError):
            mstep_convergence_diag(_mean_state(1), [10, 5])
