"""End-to-end acceptance criteria.

Each test prints, and records for the terminal summary, a single line
``criterion N: PASS|FAIL ...`` with the measured quantities.
"""

import math
import random
import time

import numpy as np
import pytest
from scipy import stats

from acidpr.benchmark import density_benchmark, regression_benchmark
from acidpr.diagnostics import (
    FAIL,
    PASS,
    acid_discrepancy_mc,
    bandwidth_condition_check,
    default_sets,
    mstep_convergence_diag,
)
from acidpr.kernel_predictive import kp_init
from acidpr.kernels import KernelSpec, convolution_params, convolution_tv, kernel_density, tv_numeric
from acidpr.parametric import (
    GaussianLocation,
    GaussianMeanState,
    ParametricState,
    StudentTLocation,
    natural_gradient_step,
)
from acidpr.resampling import Functional, ResampleConfig, predictive_resample
from acidpr.sequences import RandomStream, StepSchedule

from conftest import ACCEPTANCE_LINES

SEED = 0


def report(k, ok, detail):
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'} {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


# shared runs reused by the determinism criterion ------------------------------


def run_discrepancy(n_jobs):
    state = GaussianMeanState([0.0], [1.0], StepSchedule.constant(0.1), 10)
    sets = default_sets(state, n_half=10, n_central=10)
    return acid_discrepancy_mc(state, sets, K=10_000, stream=RandomStream(SEED, 21), n_jobs=n_jobs)


def urn_data():
    return RandomStream(SEED, 61).generator().standard_normal(25)


def run_bootstrap(n_jobs):
    state = kp_init(urn_data(), 0.0, KernelSpec("dirac"))
    cfg = ResampleConfig(2000, 2000, SEED, Functional.mean(), n_jobs=n_jobs)
    return predictive_resample(state, None, cfg)


def run_density(n_jobs):
    return density_benchmark(20, 200, "gaussian", "scott", 1000, 200, seed=SEED, n_jobs=n_jobs)


def metric_bytes(result):
    names = ("env", "dev", "awd", "rdev", "rwd")
    return np.array([[getattr(r, k) for k in names] for r in result.reports], dtype=float).tobytes()


@pytest.fixture(scope="module")
def discrepancy_1():
    return run_discrepancy(1)


@pytest.fixture(scope="module")
def bootstrap_1():
    return run_bootstrap(1)


@pytest.fixture(scope="module")
def density_1():
    t0 = time.perf_counter()
    res = run_density(1)
    return res, time.perf_counter() - t0


# criteria ---------------------------------------------------------------------


def test_criterion_01_closed_form_tv():
    t0 = time.perf_counter()
    g = RandomStream(SEED, 11).generator()
    worst = 0.0
    for shape in ("uniform", "laplace"):
        spec = KernelSpec(shape)
        pairs = [(0.1, 0.4)] if shape == "uniform" else []
        while len(pairs) < 20:
            h_old = float(g.uniform(0.1, 5.0))
            pairs.append((float(g.uniform(0.01, 1.0)) * h_old, h_old))
        for h_new, h_old in pairs:
            res = convolution_tv(spec, h_new, h_old)
            law = convolution_params(spec, h_new, h_old)
            base = lambda x, h=h_old: float(kernel_density(spec, 0.0, h, x))
            conv = lambda x, law=law: float(law.pdf(x))
            w = 40.0 * (h_old + h_new)
            num = tv_numeric(base, conv, (-w, w), breakpoints=(*law.breakpoints(), -h_old, 0.0, h_old))
            assert res.kind == "exact"
            worst = max(worst, abs(res.value - num))
    quarter = convolution_tv(KernelSpec("uniform"), 0.1, 0.4).value
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-6 and abs(quarter - 0.0625) < 1e-12 and elapsed < 10
    assert report(1, ok, f"max |exact - quadrature| = {worst:.2e}, uniform(1/4) = {quarter}, {elapsed:.1f}s")


def test_criterion_02_gaussian_mean_discrepancy(discrepancy_1):
    t0 = time.perf_counter()
    res = discrepancy_1
    slack = np.abs(res.estimates) - (0.015 + 3 * res.se)
    ok = len(res.estimates) == 20 and bool(np.all(slack <= 0)) and res.xi_n == pytest.approx(0.015)
    elapsed = time.perf_counter() - t0
    assert report(
        2, ok, f"20 sets, max |est| = {np.abs(res.estimates).max():.4f}, max(|est| - 0.015 - 3SE) = {slack.max():.4f}"
    )
    assert elapsed < 60


def test_criterion_03_theta_martingale():
    t0 = time.perf_counter()
    worst = 0.0
    K = 100_000
    for k, model in enumerate((GaussianLocation(1.0), StudentTLocation(1.0, 3.0))):
        for theta in (-2.0, 0.0, 3.0):
            state = ParametricState(model, theta, StepSchedule.constant(0.2), 5)
            xs = state.sample(RandomStream(SEED, 31, (k, int(theta + 10))), K)
            nxt = np.array([natural_gradient_step(state, x).theta_hat for x in xs])
            z = abs(nxt.mean() - theta) / (nxt.std(ddof=1) / math.sqrt(K))
            worst = max(worst, z)
    elapsed = time.perf_counter() - t0
    ok = worst < 4 and elapsed < 60
    assert report(3, ok, f"max |mean - theta| / SE = {worst:.2f} over 6 cases, {elapsed:.1f}s")


def test_criterion_04_dirac_exact():
    g = RandomStream(SEED, 41).generator()
    state = kp_init(g.standard_normal(40), 0.0, KernelSpec("dirac"))
    lo = g.normal(0, 1.5, 50)
    sets = [(a, a + w) for a, w in zip(lo, g.uniform(0.05, 3.0, 50))]
    res = acid_discrepancy_mc(state, sets)
    ok = res.exact and bool(np.all(res.estimates == 0.0)) and res.verdict == PASS
    assert report(4, ok, f"50 sets, exact rational evaluation, max |est| = {np.abs(res.estimates).max()}")


def test_criterion_05_bandwidth_classifier():
    t0 = time.perf_counter()
    exp_res = bandwidth_condition_check("exponential", 1.0, 10_000, (1.0, 1.0))
    sel = (exp_res.n >= 100) & (exp_res.n <= 10_000)
    ratio = exp_res.c_n[sel] * exp_res.n[sel]
    decreasing = bool(np.all(np.diff(exp_res.c_log_n[sel]) < 0))
    poly = bandwidth_condition_check("polynomial", 1.0, 10_000, (1.0, 0.5)).verdict
    const = bandwidth_condition_check("constant", 1.0, 10_000, (1.0,)).verdict
    elapsed = time.perf_counter() - t0
    ok = (
        exp_res.verdict == PASS
        and decreasing
        and bool(np.all((ratio > 0.5) & (ratio < 2.0)))
        and poly == FAIL
        and const == FAIL
        and elapsed < 5
    )
    assert report(
        5, ok,
        f"exponential {exp_res.verdict} (n c_n in [{ratio.min():.3f}, {ratio.max():.3f}]), polynomial {poly}, constant {const}",
    )


def test_criterion_06_bayesian_bootstrap(bootstrap_1):
    t0 = time.perf_counter()
    engine = bootstrap_1.scalar()
    data = urn_data()
    r = random.Random(20240611)
    oracle = []
    for _ in range(2000):
        pool = list(data)
        for _ in range(2000):
            pool.append(pool[r.randrange(len(pool))])
        oracle.append(sum(pool) / len(pool))
    d = stats.ks_2samp(engine, np.array(oracle)).statistic
    crit = 1.63 * math.sqrt(2 / 2000)
    elapsed = time.perf_counter() - t0
    assert report(6, d < crit, f"KS = {d:.4f} < {crit:.4f}")
    assert elapsed < 120


@pytest.mark.slow
def test_criterion_07_density_table(density_1):
    res, elapsed = density_1
    env, dev, awd = res.median("env"), res.median("dev"), res.median("awd")
    ok = 0.55 <= env <= 0.95 and dev <= 0.02 and 0.015 <= awd <= 0.08
    assert report(7, ok, f"median env = {env:.3f}, dev = {dev:.4f}, awd = {awd:.4f} ({elapsed / 60:.1f} min)")


@pytest.mark.slow
def test_criterion_08_regression_table():
    t0 = time.perf_counter()
    res = regression_benchmark("dgm1", 10, 200, "laplace", "lscv", 500, 100, seed=SEED)
    m, env = res.median("mse"), res.median("env")
    elapsed = time.perf_counter() - t0
    ok = 0.9 <= m <= 1.4 and env >= 0.6
    assert report(8, ok, f"median MSE = {m:.3f}, env = {env:.3f} ({elapsed / 60:.1f} min)")


def test_criterion_09_forward_convergence():
    state = GaussianMeanState([0.0], [1.0], StepSchedule.harmonic(), 10)
    main = mstep_convergence_diag(state, [500, 1000], RandomStream(SEED, 91))
    control_state = GaussianMeanState([0.0], [1.0], StepSchedule.constant(0.2), 10)
    control = mstep_convergence_diag(control_state, [500, 1000], RandomStream(SEED, 91))
    d = float(main.distances[-1])
    ok = d < 0.05 and main.verdict == PASS and control.verdict == FAIL
    assert report(
        9, ok, f"sup-CDF distance(500, 1000) = {d:.4f}; constant-step control {control.verdict} ({control.distances[-1]:.3f})"
    )


def test_criterion_10_thread_determinism(discrepancy_1, bootstrap_1, density_1):
    same2 = run_discrepancy(8).estimates.tobytes() == discrepancy_1.estimates.tobytes()
    same6 = run_bootstrap(8).values.tobytes() == bootstrap_1.values.tobytes()
    same7 = metric_bytes(run_density(8)) == metric_bytes(density_1[0])
    ok = same2 and same6 and same7
    assert report(10, ok, f"1 vs 8 threads identical: criterion 2 {same2}, 6 {same6}, 7 {same7}")
