"""Parametric predictive schemes.

Two families of one-step-ahead predictives driven by a recursively updated
parameter:

* the Gaussian mean-driven sequence ``X_{n+1} | G_n ~ N(theta_n, Sigma)``
  with ``theta_n = (1 - eta_n) theta_{n-1} + eta_n X_n``;
* the parametric Bayesian bootstrap ``X_{n+1} | G_n ~ P_{theta_n}`` where
  ``theta`` follows natural-gradient SGD, optionally clamped to a box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate, optimize, special, stats

from .exceptions import NumericalError
from .sequences import StepSchedule, as_generator, eta_at

__all__ = [
    "GaussianLocation",
    "StudentTLocation",
    "make_model",
    "ParametricState",
    "GaussianMeanState",
    "gaussian_mean_step",
    "natural_gradient_step",
    "param_sample",
    "xi_parametric",
    "xi_gaussian_mean",
    "MomentReport",
    "moment_condition_check",
]


@dataclass(frozen=True)
class GaussianLocation:
    """``N(theta, sigma2)`` with known variance."""

    sigma2: float = 1.0
    name: str = field(default="gaussian-location", init=False)

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")

    @property
    def scale(self) -> float:
        return math.sqrt(self.sigma2)

    def pdf(self, x, theta):
        return stats.norm.pdf(x, loc=theta, scale=self.scale)

    def cdf(self, x, theta):
        return stats.norm.cdf(x, loc=theta, scale=self.scale)

    def noise(self, rng, size):
        """Standardised-location noise ``X - theta``."""
        return self.scale * rng.standard_normal(size)

    def score(self, x, theta):
        return (np.asarray(x) - theta) / self.sigma2

    def fisher(self, theta=0.0) -> float:
        return 1.0 / self.sigma2

    def natural_gradient(self, x, theta):
        return np.asarray(x, dtype=float) - theta

    def pdf_dd(self, x, theta):
        """Second derivative of the density in ``theta``."""
        z = (np.asarray(x) - theta) / self.scale
        return (z**2 - 1.0) * stats.norm.pdf(z) / self.scale**3

    @property
    def C_model(self) -> float:
        return abs(self.sigma2 - 1.0) / self.sigma2

    @property
    def C_sup(self) -> float:
        """Positive-part mass of ``p''``, i.e. ``sup_A int_A p''`` (``2 phi(1) / sigma2``)."""
        return 2.0 * stats.norm.pdf(1.0) / self.sigma2


@dataclass(frozen=True)
class StudentTLocation:
    """Location-scale Student-t with scale ``tau`` and ``nu`` degrees of freedom."""

    tau: float = 1.0
    nu: float = 3.0
    name: str = field(default="student-t-location", init=False)

    def __post_init__(self):
        if not (self.tau > 0 and self.nu > 0):
            raise ValueError("tau and nu must be positive")

    def pdf(self, x, theta):
        return stats.t.pdf(x, self.nu, loc=theta, scale=self.tau)

    def cdf(self, x, theta):
        return stats.t.cdf(x, self.nu, loc=theta, scale=self.tau)

    def noise(self, rng, size):
        return self.tau * rng.standard_t(self.nu, size)

    def score(self, x, theta):
        d = np.asarray(x, dtype=float) - theta
        return (self.nu + 1.0) * d / (self.nu * self.tau**2 + d**2)

    def fisher(self, theta=0.0) -> float:
        return (self.nu + 1.0) / ((self.nu + 3.0) * self.tau**2)

    def natural_gradient(self, x, theta):
        d = np.asarray(x, dtype=float) - theta
        return (self.nu + 3.0) * self.tau**2 * d / (self.nu * self.tau**2 + d**2)

    def pdf_dd(self, x, theta):
        u = (np.asarray(x, dtype=float) - theta) / self.tau
        nu = self.nu
        c = math.exp(
            special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2)
        ) / math.sqrt(nu * math.pi)
        base = 1.0 + u**2 / nu
        g2 = -c * (nu + 1) / nu * base ** (-(nu + 5) / 2) * (1.0 - (nu + 2) * u**2 / nu)
        return g2 / self.tau**3

    @property
    def C_model(self) -> float:
        """``sup_A |int_A p''|``, the mass of the positive part of ``p''``.

        The signed integral of ``p''`` vanishes for every location family, so
        the constant bounding set-wise curvature is the positive-part mass.
        It is the same for every ``theta`` and is found by quadrature on the
        two tails beyond the inflection points.
        """
        u0 = math.sqrt(self.nu / (self.nu + 2.0)) * self.tau
        val, err = integrate.quad(lambda x: self.pdf_dd(x, 0.0), u0, np.inf, epsabs=1e-13)
        if err > 1e-9:
            raise NumericalError("curvature constant quadrature did not converge", val)
        return 2.0 * val


def make_model(name: str, **params):
    if name == "gaussian-location":
        return GaussianLocation(params.get("sigma2", 1.0))
    if name == "student-t-location":
        return StudentTLocation(params.get("tau", 1.0), params.get("nu", 3.0))
    raise ValueError(f"unknown parametric model {name!r}")


@dataclass(frozen=True)
class ParametricState:
    """Current estimate ``theta_hat`` after ``n`` observations.

    ``constraints`` is an optional ``(low, high)`` box into which every
    update is projected.
    """

    model: object
    theta_hat: float
    step: StepSchedule
    n: int = 0
    constraints: tuple[float, float] | None = None

    def __post_init__(self):
        if self.constraints is not None:
            lo, hi = map(float, self.constraints)
            if not lo <= hi:
                raise ValueError("constraint box needs low <= high")
            if not lo <= self.theta_hat <= hi:
                raise ValueError("theta_hat lies outside the constraint box")
            object.__setattr__(self, "constraints", (lo, hi))
        if self.n < 0:
            raise ValueError("n must be non-negative")

    def sample(self, stream, size=None):
        return param_sample(self, stream, size)

    def update(self, x, h_new=None):
        return natural_gradient_step(self, x)

    def box_prob(self, lo, hi) -> float:
        return float(self.model.cdf(hi, self.theta_hat) - self.model.cdf(lo, self.theta_hat))

    def cdf(self, t):
        return self.model.cdf(t, self.theta_hat)

    @property
    def p(self) -> int:
        return 1


@dataclass(frozen=True, eq=False)
class GaussianMeanState:
    """``N(theta_hat, diag(Sigma_diag))`` with a recursively averaged mean."""

    theta_hat: np.ndarray
    Sigma_diag: np.ndarray
    step: StepSchedule
    n: int = 0

    def __post_init__(self):
        th = np.array(self.theta_hat, dtype=float).reshape(-1)
        sd = np.broadcast_to(np.array(self.Sigma_diag, dtype=float), th.shape).copy()
        if np.any(sd <= 0):
            raise ValueError("Sigma_diag entries must be positive")
        th.setflags(write=False)
        sd.setflags(write=False)
        object.__setattr__(self, "theta_hat", th)
        object.__setattr__(self, "Sigma_diag", sd)

    @property
    def p(self) -> int:
        return self.theta_hat.size

    def sample(self, stream, size=None):
        return param_sample(self, stream, size)

    def update(self, x, h_new=None):
        return gaussian_mean_step(self, x)

    def box_prob(self, lo, hi) -> float:
        s = np.sqrt(self.Sigma_diag)
        lo = np.broadcast_to(np.asarray(lo, dtype=float), (self.p,))
        hi = np.broadcast_to(np.asarray(hi, dtype=float), (self.p,))
        return float(np.prod(
            stats.norm.cdf(hi, self.theta_hat, s) - stats.norm.cdf(lo, self.theta_hat, s)
        ))

    def cdf(self, t):
        if self.p != 1:
            raise ValueError("CDF is defined only for p = 1")
        return stats.norm.cdf(t, self.theta_hat[0], math.sqrt(self.Sigma_diag[0]))


def gaussian_mean_step(state: GaussianMeanState, x) -> GaussianMeanState:
    """``theta <- (1 - eta) theta + eta x`` with ``eta = eta_{n+1}``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != state.theta_hat.shape:
        raise ValueError(f"point has dimension {x.size}, state has {state.p}")
    eta = eta_at(state.step, state.n + 1)
    return replace(state, theta_hat=(1.0 - eta) * state.theta_hat + eta * x, n=state.n + 1)


def natural_gradient_step(state: ParametricState, x) -> ParametricState:
    """``theta <- theta + eta_{n+1} Z(x, theta)``, projected onto the box if any."""
    eta = eta_at(state.step, state.n + 1)
    with np.errstate(over="ignore", invalid="ignore"):
        z = float(state.model.natural_gradient(x, state.theta_hat))
        theta = state.theta_hat + eta * z
    if not math.isfinite(theta):
        raise NumericalError(f"non-finite parameter update at x={x!r}", theta)
    if state.constraints is not None:
        theta = min(max(theta, state.constraints[0]), state.constraints[1])
    return replace(state, theta_hat=theta, n=state.n + 1)


def param_sample(state, stream, size=None):
    """Exact draw from the current predictive ``P_{theta_hat}``."""
    rng = as_generator(stream)
    if isinstance(state, GaussianMeanState):
        m = 1 if size is None else int(size)
        out = state.theta_hat + np.sqrt(state.Sigma_diag) * rng.standard_normal((m, state.p))
        if size is None:
            return float(out[0, 0]) if state.p == 1 else out[0]
        return out[:, 0] if state.p == 1 else out
    if size is None:
        return float(state.theta_hat + state.model.noise(rng, None))
    return state.theta_hat + state.model.noise(rng, int(size))


def xi_parametric(state: ParametricState) -> float:
    """Slack ``C eta_{n+1}^2 / (2 I)``.

    Unconstrained states use ``I(theta_hat)``; constrained ones use the
    minimum ``eps`` of ``I`` over a 1001-point grid spanning the box.
    """
    eta = eta_at(state.step, state.n + 1)
    C = state.model.C_model
    if state.constraints is None:
        info = state.model.fisher(state.theta_hat)
    else:
        grid = np.linspace(*state.constraints, 1001)
        info = min(state.model.fisher(t) for t in grid)
    return C * eta**2 / (2.0 * info)


def xi_gaussian_mean(state: GaussianMeanState) -> float:
    """Slack ``(3/2) p eta_{n+1}^2`` of the Gaussian mean-driven scheme."""
    return 1.5 * state.p * eta_at(state.step, state.n + 1) ** 2


@dataclass
class MomentReport:
    """Monte Carlo check of ``E[Z^4] <= B + C theta^4``."""

    theta: np.ndarray
    estimate: np.ndarray
    se: np.ndarray
    B: float
    C: float
    holds: bool

    def rows(self):
        return [
            {"theta": float(t), "estimate": float(e), "se": float(s)}
            for t, e, s in zip(self.theta, self.estimate, self.se)
        ]


def moment_condition_check(model, theta_grid, K: int = 10_000, stream=None) -> MomentReport:
    """Estimate ``E[Z(X, theta)^4]`` with ``X ~ P_theta`` on a grid of ``theta``.

    ``(B, C)`` is a non-negative least-squares fit of ``B + C theta^4``; the
    bound holds when every estimate is below the fitted envelope plus three
    standard errors.
    """
    if K < 10_000:
        raise ValueError("moment check needs K >= 1e4 draws")
    rng = as_generator(stream)
    theta = np.atleast_1d(np.asarray(theta_grid, dtype=float))
    est = np.empty(theta.size)
    se = np.empty(theta.size)
    for j, t in enumerate(theta):
        z4 = model.natural_gradient(t + model.noise(rng, K), t) ** 4
        est[j] = z4.mean()
        se[j] = z4.std(ddof=1) / math.sqrt(K)
    w = 1.0 / np.maximum(se, 1e-12)
    design = np.column_stack([np.ones_like(theta), theta**4]) * w[:, None]
    (B, C), _ = optimize.nnls(design, est * w)
    holds = bool(np.all(est <= B + C * theta**4 + 3.0 * se))
    return MomentReport(theta, est, se, float(B), float(C), holds)
