"""Estimator interface over the functional core.

The classes follow the scikit-learn conventions: hyper-parameters are set in
``__init__`` and never modified, ``fit`` returns ``self`` and learned
attributes end with an underscore.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, DensityMixin, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .kernel_predictive import (
    kp_cdf,
    kp_conditional_density,
    kp_density,
    kp_init,
    kp_regression_mean,
    kp_sample,
    kp_update,
)
from .kernels import KernelSpec
from .metrics import EvaluationGrid
from .resampling import (
    Functional,
    ResampleConfig,
    kernel_posterior,
    posterior_summary,
    select_bandwidth,
)
from .sequences import RandomStream

__all__ = ["KernelPredictive", "KernelPredictiveRegressor", "MartingalePosterior"]


def _seed(random_state):
    if random_state is None:
        return int(np.random.SeedSequence().entropy % 2**64)
    return int(random_state)


def _bandwidth(X, kernel, bandwidth):
    if isinstance(bandwidth, str):
        return select_bandwidth(X, bandwidth, kernel)
    h = float(bandwidth)
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    return h


class KernelPredictive(DensityMixin, BaseEstimator):
    """Recursive kernel predictive density.

    Parameters
    ----------
    kernel : {"gaussian", "uniform", "laplace", "dirac"}
    bandwidth : {"silverman", "scott", "lscv"} or float
        Selector for the common bandwidth of the observed points, or a value.
    """

    def __init__(self, kernel="gaussian", bandwidth="scott"):
        self.kernel = kernel
        self.bandwidth = bandwidth

    def fit(self, X, y=None):
        X = check_array(X, ensure_2d=False, ensure_min_samples=1)
        X = X.reshape(-1, 1) if X.ndim == 1 else X
        spec = KernelSpec(self.kernel, X.shape[1])
        self.h_ = 0.0 if spec.is_dirac else _bandwidth(X, spec, self.bandwidth)
        self.state_ = kp_init(X, self.h_, spec)
        self.n_features_in_ = X.shape[1]
        return self

    def partial_fit(self, X, h=None):
        """Append points one at a time with bandwidth ``h`` (default ``h_``)."""
        check_is_fitted(self, "state_")
        X = check_array(X, ensure_2d=False).reshape(-1, self.n_features_in_)
        h_new = self.h_ if h is None else float(h)
        for x in X:
            self.state_ = kp_update(self.state_, x, h_new)
        return self

    def score_samples(self, X):
        """Log predictive density at each row of ``X``."""
        check_is_fitted(self, "state_")
        X = check_array(X, ensure_2d=False).reshape(-1, self.n_features_in_)
        with np.errstate(divide="ignore"):
            return np.log(kp_density(self.state_, X))

    def score(self, X, y=None):
        return float(np.sum(self.score_samples(X)))

    def cdf(self, t):
        check_is_fitted(self, "state_")
        return kp_cdf(self.state_, t)

    def sample(self, n_samples=1, random_state=None):
        check_is_fitted(self, "state_")
        stream = RandomStream(_seed(random_state))
        return kp_sample(self.state_, stream, n_samples)


class KernelPredictiveRegressor(RegressorMixin, BaseEstimator):
    """Regression through the joint kernel predictive of ``(y, x)``.

    Parameters
    ----------
    kernel : {"gaussian", "uniform", "laplace"}
        Product kernel shared by the response and every covariate.
    bandwidth : {"silverman", "scott", "lscv"} or float
    normalized : bool
        Use the exact conditional-mean weights ``K_x / h_i^p`` (the default)
        or the plain ``K_x`` weights.
    """

    def __init__(self, kernel="laplace", bandwidth="lscv", normalized=True):
        self.kernel = kernel
        self.bandwidth = bandwidth
        self.normalized = normalized

    def fit(self, X, y):
        X = check_array(X, ensure_2d=False)
        X = X.reshape(-1, 1) if X.ndim == 1 else X
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.size != X.shape[0]:
            raise ValueError("X and y have inconsistent lengths")
        joint = np.column_stack([y, X])
        spec = KernelSpec(self.kernel, joint.shape[1])
        self.h_ = _bandwidth(joint, spec, self.bandwidth)
        self.state_ = kp_init(joint, self.h_, spec)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "state_")
        X = check_array(X, ensure_2d=False).reshape(-1, self.n_features_in_)
        return kp_regression_mean(self.state_, X, normalized=self.normalized)

    def conditional_density(self, y, x):
        check_is_fitted(self, "state_")
        return kp_conditional_density(self.state_, y, x)


class MartingalePosterior(BaseEstimator):
    """Martingale posterior of a kernel functional by predictive resampling.

    ``fit`` selects the bandwidth, builds the decaying schedule from a
    Bayesian-bootstrap endpoint and draws ``B`` forward paths of length
    ``M``.  Without ``y`` the functional is the predictive density on
    ``grid``; with ``y`` it is the regression function on ``grid``.

    Parameters
    ----------
    kernel : str
    bandwidth : {"silverman", "scott", "lscv"}
    M, B : int
        Forward horizon and number of replicates.
    scale_c : float
        Global multiplier of the bandwidth schedule.
    grid : array, optional
        Evaluation points; defaults to ``linspace(-4, 3.95, 100) * sd + mean``
        for densities and 100 points over the covariate range for regression.
    endpoint_reps : int
    random_state : int or None
    n_jobs : int
    """

    def __init__(
        self,
        kernel="gaussian",
        bandwidth="scott",
        M=1000,
        B=200,
        scale_c=1.0,
        grid=None,
        endpoint_reps=10,
        random_state=0,
        n_jobs=1,
    ):
        self.kernel = kernel
        self.bandwidth = bandwidth
        self.M = M
        self.B = B
        self.scale_c = scale_c
        self.grid = grid
        self.endpoint_reps = endpoint_reps
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        X = check_array(X, ensure_2d=False, ensure_min_samples=3)
        X = X.reshape(-1, 1) if X.ndim == 1 else X
        if y is None:
            if X.shape[1] != 1 and self.grid is None:
                raise ValueError("multivariate densities need an explicit grid")
            grid = EvaluationGrid.affine(X[:, 0]).points if self.grid is None else self.grid
            func = Functional.density_grid(grid)
            data = X
        else:
            y = np.asarray(y, dtype=float).reshape(-1)
            if X.shape[1] == 1 and self.grid is None:
                grid = np.linspace(X.min(), X.max(), 100)
            elif self.grid is None:
                raise ValueError("multivariate regression needs an explicit grid")
            else:
                grid = self.grid
            func = Functional.regression_grid(grid)
            data = np.column_stack([y, X])
        cfg = ResampleConfig(
            int(self.M),
            int(self.B),
            _seed(self.random_state),
            func,
            float(self.scale_c),
            self.bandwidth,
            int(self.endpoint_reps),
            int(self.n_jobs),
        )
        spec = KernelSpec(self.kernel, data.shape[1])
        self.draws_, self.schedule_, self.state_ = kernel_posterior(data, spec, cfg)
        self.grid_ = np.asarray(func.grid)
        self.summary_ = posterior_summary(self.draws_) if self.B >= 2 else None
        return self

    def predict(self, X=None):
        """Posterior mean of the functional on the fitted grid."""
        check_is_fitted(self, "draws_")
        return self.draws_.values.mean(axis=0)

    def credible_band(self):
        check_is_fitted(self, "summary_")
        return self.summary_.q025, self.summary_.q975
