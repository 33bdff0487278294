"""Numerical certification of the almost-c.i.d. property.

The checks here are finite-horizon proxies: slack sequences and their
summability, the bandwidth decay condition, nested Monte Carlo estimates of
the one-step martingale discrepancy ``E(alpha_{n+1}(A) | G_n) - alpha_n(A)``
over a surrogate family of sets, and a forward-path convergence diagnostic
for the predictive CDF.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import optimize, stats

from .kernel_predictive import KernelMixtureState
from .kernels import AcidConstants, acid_constants
from .parametric import (
    GaussianMeanState,
    ParametricState,
    xi_gaussian_mean,
    xi_parametric,
)
from .sequences import BandwidthSchedule, StepSchedule, as_generator, eta_at

__all__ = [
    "PASS",
    "FAIL",
    "INCONCLUSIVE",
    "XiSequence",
    "DiagnosticsReport",
    "xi_kernel",
    "xi_kernel_sequence",
    "xi_parametric_sequence",
    "summability_check",
    "BandwidthConditionResult",
    "bandwidth_condition_check",
    "default_sets",
    "DiscrepancyResult",
    "acid_discrepancy_mc",
    "MStepResult",
    "mstep_convergence_diag",
]

PASS, FAIL, INCONCLUSIVE = "PASS", "FAIL", "INCONCLUSIVE"

_SOURCES = ("kernel", "parametric-unconstrained", "parametric-constrained", "gaussian-mean", "numeric")


@dataclass(eq=False)
class XiSequence:
    """Slack values ``xi_0, ..., xi_N``.

    ``family`` optionally records a closed-form description of the tail:
    ``("power", k)`` for ``xi_n = Theta(n**-k)``, ``("exponential", r)`` for
    geometric decay and ``("zero",)`` for an identically zero sequence.
    Without it the sequence is treated as purely numeric.
    """

    values: np.ndarray
    source: str = "numeric"
    family: tuple | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise ValueError("slack values must be finite and non-negative")
        if self.source not in _SOURCES:
            raise ValueError(f"unknown slack source {self.source!r}")

    @property
    def partial_sums(self) -> np.ndarray:
        return np.cumsum(self.values)

    @property
    def N(self) -> int:
        return self.values.size - 1

    @classmethod
    def power(cls, k: float, N: int, scale: float = 1.0):
        """``xi_0 = 0`` and ``xi_n = scale * n**-k``."""
        n = np.arange(N + 1, dtype=float)
        v = np.zeros(N + 1)
        v[1:] = scale * n[1:] ** (-k)
        return cls(v, "numeric", ("power", float(k)))


@dataclass
class DiagnosticsReport:
    """Verdicts per check with the rows of numeric evidence behind them."""

    verdicts: dict = field(default_factory=dict)
    evidence: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)

    def add(self, check: str, verdict: str, evidence=None, rows=()):
        self.verdicts[check] = verdict
        self.evidence[check] = evidence if evidence is not None else {}
        self.rows.extend(rows)

    def to_json_lines(self) -> str:
        return "".join(json.dumps(r, sort_keys=False) + "\n" for r in self.rows)


def _log_h(schedule, N):
    """``log h_1, ..., log h_N`` from a schedule, an array or a callable."""
    if isinstance(schedule, BandwidthSchedule):
        h = schedule.full
        if h.size < N:
            raise IndexError(f"schedule covers {h.size} indices, {N} needed")
        return np.log(h[:N])
    if callable(schedule):
        return np.array([math.log(schedule(i)) for i in range(1, N + 1)])
    h = np.asarray(schedule, dtype=float)
    if h.size < N:
        raise IndexError(f"schedule covers {h.size} indices, {N} needed")
    if not np.all(h[:N] > 0):
        raise ValueError("bandwidths must be strictly positive (did the schedule underflow?)")
    return np.log(h[:N])


def xi_kernel(schedule, n: int, constants: AcidConstants) -> float:
    """``xi_n = (1/(n+1)) sum_{i<=n} (1/n) C h_{n+1}^eps / h_i^eps``.

    ``schedule`` is a :class:`BandwidthSchedule`, an array ``h_1, h_2, ...``
    or a callable ``i -> h_i`` (1-based).
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return 0.0
    lh = _log_h(schedule, n + 1)
    eps = constants.epsilon
    lterm = eps * lh[n] + np.logaddexp.reduce(-eps * lh[:n])
    return float(constants.C * math.exp(lterm) / (n * (n + 1)))


def _log_c_trace(log_h, eps):
    """``log c_n`` for ``n = 1..N`` given ``log h_1..h_{N+1}``."""
    N = log_h.size - 1
    n = np.arange(1, N + 1, dtype=float)
    lsum = np.logaddexp.accumulate(-eps * log_h[:N])
    return eps * log_h[1:] + lsum - np.log(n + 1)


def xi_kernel_sequence(log_h, N: int, constants: AcidConstants, decay_family=None) -> XiSequence:
    """Vector of ``xi_0..xi_N`` from log-bandwidths ``log h_1..h_{N+1}``.

    Working on the log scale keeps fast-decaying schedules (``h_n = e^-n``
    and beyond) free of under- and overflow.  ``decay_family`` names the
    bandwidth family so the summability verdict can be analytic.
    """
    log_h = np.asarray(log_h, dtype=float)[: N + 1]
    if log_h.size < N + 1:
        raise IndexError("need log bandwidths for indices 1..N+1")
    n = np.arange(1, N + 1, dtype=float)
    lc = _log_c_trace(log_h, constants.epsilon)
    vals = np.concatenate([[0.0], constants.C * np.exp(lc) / n])
    family = {
        "exponential": ("power", 2.0),
        "polynomial": ("power", 1.0),
        "constant": ("power", 1.0),
    }.get(decay_family)
    return XiSequence(vals, "kernel", family)


def xi_parametric_sequence(states) -> XiSequence:
    """Slack along a path of parametric states ``state_0, ..., state_N``."""
    states = list(states)
    first = states[0]
    if isinstance(first, GaussianMeanState):
        vals = [xi_gaussian_mean(s) for s in states]
        source = "gaussian-mean"
    else:
        vals = [xi_parametric(s) for s in states]
        source = "parametric-constrained" if first.constraints else "parametric-unconstrained"
    family = None
    step: StepSchedule = first.step
    if all(v == 0 for v in vals):
        family = ("zero",)
    else:
        # both implemented models have theta-free Fisher information, so the
        # slack inherits the decay of eta_n**2 exactly
        if step.family == "harmonic":
            family = ("power", 2.0)
        elif step.family == "power":
            family = ("power", 2.0 * step.params[1])
        elif step.family == "constant":
            family = ("power", 0.0)
    return XiSequence(np.array(vals), source, family)


def _tail_slope(xi: XiSequence, N: int):
    n = np.arange(max(1, N // 10), N + 1)
    v = xi.values[n]
    keep = v > 0
    if keep.sum() < 3:
        return None
    res = stats.linregress(np.log(n[keep]), np.log(v[keep]))
    return {"slope": float(res.slope), "slope_se": float(res.stderr)}


def summability_check(xi: XiSequence, N: int | None = None) -> tuple[str, dict]:
    """Verdict on ``sum xi_n < inf`` with evidence.

    Closed-form families are decided analytically; numeric sequences get
    INCONCLUSIVE together with the log-log tail slope over the last decade.
    """
    N = xi.N if N is None else int(N)
    if N < 100:
        raise ValueError("summability check needs a horizon N >= 100")
    if N > xi.N:
        raise IndexError(f"sequence has only {xi.N} terms")
    ev = {"partial_sum": float(xi.partial_sums[N]), "xi_N": float(xi.values[N])}
    fam = xi.family
    if fam is not None:
        ev["family"] = list(fam)
        if fam[0] in ("zero", "exponential"):
            return PASS, ev
        if fam[0] == "power":
            return (PASS if fam[1] > 1 else FAIL), ev
    tail = _tail_slope(xi, N)
    if tail is not None:
        ev.update(tail)
    return INCONCLUSIVE, ev


@dataclass
class BandwidthConditionResult:
    verdict: str
    n: np.ndarray
    c_n: np.ndarray
    family: str
    epsilon: float

    @property
    def c_log_n(self) -> np.ndarray:
        return self.c_n * np.log(self.n)


def _family_log_h(family, N, params):
    i = np.arange(1, N + 2, dtype=float)
    if family == "exponential":
        b1, b2 = params
        return math.log(b1) - b2 * i
    if family == "polynomial":
        b1, b = params
        return math.log(b1) - b * np.log(i)
    if family == "constant":
        return np.full(i.size, math.log(params[0]))
    raise ValueError(f"unknown bandwidth family {family!r}")


def bandwidth_condition_check(schedule, epsilon: float, N: int, params=None) -> BandwidthConditionResult:
    """Condition ``c_n = (h_{n+1}^eps/(n+1)) sum_{i<=n} h_i^-eps = o(1/log n)``.

    ``schedule`` is a family name (``"exponential"`` with ``params=(b1, b2)``,
    ``"polynomial"`` with ``(b1, b)``, ``"constant"`` with ``(b1,)``), a
    :class:`BandwidthSchedule` or an explicit array of ``h_1..h_{N+1}``.
    Exponential decay passes analytically, polynomial and constant fail;
    explicit schedules pass when ``c_n log n`` is decreasing over the last
    decade and below 0.01 at ``N``.
    """
    if N < 1000:
        raise ValueError("bandwidth condition check needs N >= 1000")
    if isinstance(schedule, BandwidthSchedule) and schedule.decay_family != "explicit-list":
        family, params = schedule.decay_family, schedule.params
    elif isinstance(schedule, str):
        family = schedule
        params = tuple(params) if params is not None else {
            "exponential": (1.0, 1.0), "polynomial": (1.0, 1.0), "constant": (1.0,)
        }[family]
    else:
        family = "explicit-list"
    if family == "explicit-list":
        log_h = _log_h(schedule, N + 1)
    else:
        log_h = _family_log_h(family, N, params)
    n = np.arange(1, N + 1, dtype=float)
    c = np.exp(_log_c_trace(log_h, float(epsilon)))
    if family == "exponential":
        verdict = PASS if params[1] > 0 else FAIL
    elif family in ("polynomial", "constant"):
        verdict = FAIL
    else:
        cl = c * np.log(n)
        tail = cl[N // 10 :]
        ok = np.all(np.diff(tail) <= 0) and cl[-1] < 0.01
        verdict = PASS if ok else FAIL
    return BandwidthConditionResult(verdict, n, c, family, float(epsilon))


# Martingale discrepancy ------------------------------------------------------


def _quantile(cdf, q, lo=-1.0, hi=1.0):
    while cdf(lo) > q:
        lo = 2 * lo - 1.0
    while cdf(hi) < q:
        hi = 2 * hi + 1.0
    return optimize.brentq(lambda t: cdf(t) - q, lo, hi, xtol=1e-12)


def default_sets(state, n_half: int = 20, n_central: int = 10, n_boxes: int = 20, stream=None):
    """Quantile-spaced test sets as ``(lo, hi)`` pairs of the half-open ``(lo, hi]``.

    Univariate states get ``n_half`` half-lines ``(-inf, q_k]`` at evenly
    spaced predictive quantiles plus ``n_central`` nested central intervals.
    Multivariate states get ``n_boxes`` nested axis-aligned boxes whose
    edges are marginal quantiles of ``4096`` predictive draws.
    """
    if state.p == 1:
        cdf = lambda t: float(np.asarray(state.cdf(t)).reshape(-1)[0])
        sets = []
        for k in range(1, n_half + 1):
            sets.append((-np.inf, _quantile(cdf, k / (n_half + 1))))
        for k in range(1, n_central + 1):
            a = 0.5 * k / (n_central + 1)
            sets.append((_quantile(cdf, 0.5 - a), _quantile(cdf, 0.5 + a)))
        return sets
    rng = as_generator(stream if stream is not None else 0)
    draws = np.asarray(state.sample(rng, 4096)).reshape(4096, state.p)
    sets = []
    for k in range(1, n_boxes + 1):
        a = 0.5 * k / (n_boxes + 1)
        sets.append((np.quantile(draws, 0.5 - a, axis=0), np.quantile(draws, 0.5 + a, axis=0)))
    return sets


@dataclass
class DiscrepancyResult:
    verdict: str
    estimates: np.ndarray
    se: np.ndarray
    xi_n: float
    n: int
    exact: bool = False

    def rows(self, check="acid_discrepancy"):
        return [
            {
                "check": check,
                "verdict": self.verdict,
                "n": int(self.n),
                "set_id": j,
                "estimate": float(e),
                "se": float(s),
                "xi_n": float(self.xi_n),
            }
            for j, (e, s) in enumerate(zip(self.estimates, self.se))
        ]


def _state_xi(state, h_next, constants):
    if isinstance(state, GaussianMeanState):
        return xi_gaussian_mean(state)
    if isinstance(state, ParametricState):
        return xi_parametric(state)
    if isinstance(state, KernelMixtureState):
        const = constants or acid_constants(state.kernel)
        h = np.append(state.bandwidths, h_next)
        return xi_kernel(h, state.n, const)
    raise TypeError(f"no slack formula for {type(state).__name__}")


def _box_probs_next(state, xs, lo, hi):
    """``alpha_{n+1}(A)`` (or the new-atom mass, for kernel states) per inner draw."""
    if isinstance(state, GaussianMeanState):
        eta = eta_at(state.step, state.n + 1)
        theta = (1 - eta) * state.theta_hat + eta * xs.reshape(-1, state.p)
        s = np.sqrt(state.Sigma_diag)
        return np.prod(stats.norm.cdf(hi, theta, s) - stats.norm.cdf(lo, theta, s), axis=1)
    if isinstance(state, ParametricState):
        eta = eta_at(state.step, state.n + 1)
        theta = state.theta_hat + eta * state.model.natural_gradient(xs, state.theta_hat)
        if state.constraints is not None:
            theta = np.clip(theta, *state.constraints)
        return state.model.cdf(hi, theta) - state.model.cdf(lo, theta)
    raise TypeError(f"unsupported scheme {type(state).__name__}")


def _verdict(est, se, xi):
    if np.all(np.abs(est) <= xi + 3.0 * se):
        return PASS
    if xi < 3.0 * np.max(se):
        return INCONCLUSIVE
    return FAIL


def acid_discrepancy_mc(
    state,
    sets=None,
    K: int = 10_000,
    stream=None,
    h_next: float | None = None,
    xi_n: float | None = None,
    constants: AcidConstants | None = None,
    n_jobs: int = 1,
) -> DiscrepancyResult:
    """Nested Monte Carlo estimate of ``E(alpha_{n+1}(A) | G_n) - alpha_n(A)``.

    Parameters
    ----------
    state : KernelMixtureState, ParametricState or GaussianMeanState
    sets : list of (lo, hi)
        Half-open boxes ``(lo, hi]``; defaults to :func:`default_sets`.
    K : int
        Inner draws ``X ~ alpha_n``.
    h_next : float
        Bandwidth of the next atom (kernel states only).
    xi_n : float, optional
        Slack to test against; by default the scheme's own formula.

    Notes
    -----
    Dirac states are handled exactly in rational arithmetic.  For other
    kernel states ``alpha_{n+1}(A)`` is affine in the new atom, so only the
    new atom's mass needs Monte Carlo.  The verdict is PASS when every
    ``|estimate| <= xi_n + 3 SE``; INCONCLUSIVE when it fails but ``xi_n``
    is below the Monte Carlo resolution ``3 max SE``; FAIL otherwise.
    """
    if sets is None:
        sets = default_sets(state)
    is_kernel = isinstance(state, KernelMixtureState)
    if is_kernel and state.kernel.is_dirac:
        c = state.centers
        n = state.n
        est = []
        for lo, hi in sets:
            inside = int(np.all((c > lo) & (c <= hi), axis=1).sum())
            a_n = Fraction(inside, n)
            d = Fraction(n, n + 1) * a_n + Fraction(1, n + 1) * a_n - a_n
            est.append(float(d))
        z = np.zeros(len(sets))
        return DiscrepancyResult(PASS if not np.any(est) else FAIL, np.array(est), z, 0.0, n, True)
    if K < 1000:
        raise ValueError("nested Monte Carlo needs K >= 1000")
    if is_kernel and not (h_next is not None and h_next > 0):
        raise ValueError("kernel states need a positive h_next")
    xi = _state_xi(state, h_next, constants) if xi_n is None else float(xi_n)
    rng = as_generator(stream)
    xs = np.asarray(state.sample(rng, K), dtype=float)
    n = getattr(state, "n", None)

    def one(box):
        lo, hi = box
        base = state.box_prob(lo, hi)
        if is_kernel:
            pts = xs.reshape(K, state.p)
            with np.errstate(invalid="ignore"):
                up = state.kernel.cdf1_std((np.asarray(hi) - pts) / h_next)
                dn = state.kernel.cdf1_std((np.asarray(lo) - pts) / h_next)
            vals = np.prod(up - dn, axis=1) / (state.n + 1)
            base_scaled = base / (state.n + 1)
            return vals.mean() - base_scaled, vals.std(ddof=1) / math.sqrt(K)
        vals = _box_probs_next(state, xs, lo, hi)
        return vals.mean() - base, vals.std(ddof=1) / math.sqrt(K)

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as ex:
            out = list(ex.map(one, sets))
    else:
        out = [one(s) for s in sets]
    est = np.array([o[0] for o in out])
    se = np.array([o[1] for o in out])
    return DiscrepancyResult(_verdict(est, se, xi), est, se, xi, int(n or 0))


# Forward convergence ---------------------------------------------------------


@dataclass
class MStepResult:
    verdict: str
    checkpoints: list
    distances: np.ndarray
    grid: np.ndarray
    cdfs: np.ndarray
    threshold: float

    def rows(self, check="mstep_convergence"):
        return [
            {
                "check": check,
                "verdict": self.verdict,
                "n": int(m),
                "set_id": j,
                "estimate": float(d),
                "se": 0.0,
                "xi_n": float(self.threshold),
            }
            for j, (m, d) in enumerate(zip(self.checkpoints[1:], self.distances))
        ]


def _default_grid(state, size=1001):
    cdf = lambda t: float(np.asarray(state.cdf(t)).reshape(-1)[0])
    lo, hi = _quantile(cdf, 1e-4), _quantile(cdf, 1 - 1e-4)
    w = hi - lo
    return np.linspace(lo - w, hi + w, size)


def mstep_convergence_diag(
    state,
    checkpoints,
    stream=None,
    bandwidths=None,
    grid=None,
    threshold: float = 0.05,
) -> MStepResult:
    """Sup-distance between predictive CDFs at successive forward checkpoints.

    One forward path is simulated up to ``max(checkpoints)`` steps.  Kernel
    states take the bandwidth of step ``i`` from ``bandwidths[i - 1]`` (a
    sequence, a :class:`BandwidthSchedule` forward part, or a scalar).  The
    verdict is PASS when the final distance is below ``threshold`` and not
    larger than every earlier distance.
    """
    cps = [int(m) for m in checkpoints]
    if len(cps) < 2 or any(b <= a for a, b in zip(cps, cps[1:])) or cps[0] < 0:
        raise ValueError("checkpoints must be at least two increasing non-negative ints")
    if getattr(state, "p", 1) != 1:
        raise ValueError("convergence diagnostic is univariate")
    if isinstance(bandwidths, BandwidthSchedule):
        bandwidths = bandwidths.forward_part
    if bandwidths is not None:
        bandwidths = np.broadcast_to(np.asarray(bandwidths, dtype=float), (cps[-1],))
    grid = _default_grid(state) if grid is None else np.asarray(grid, dtype=float)
    rng = as_generator(stream)
    cdfs = []
    cur = state
    for i in range(1, cps[-1] + 1):
        if i - 1 in cps:
            cdfs.append(np.asarray(cur.cdf(grid), dtype=float))
        x = cur.sample(rng)
        if isinstance(cur, KernelMixtureState):
            h = 0.0 if cur.kernel.is_dirac else float(bandwidths[i - 1])
            cur = cur.update(np.atleast_1d(x), h)
        else:
            cur = cur.update(x)
    cdfs.append(np.asarray(cur.cdf(grid), dtype=float))
    cdfs = np.vstack(cdfs)
    dist = np.max(np.abs(np.diff(cdfs, axis=0)), axis=1)
    ok = dist[-1] < threshold and (dist.size == 1 or dist[-1] <= dist[:-1].max())
    return MStepResult(PASS if ok else FAIL, cps, dist, grid, cdfs, threshold)
