"""Predictive resampling and the kernel bandwidth pipeline.

Each replicate extends the observed data by ``M`` draws from the running
one-step predictive and evaluates a functional on the result.  The forward
recursion runs over a chunk of replicates at once using only elementwise
operations, and every replicate draws from its own stream, so the output
does not depend on how replicates are split over threads.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .exceptions import DataError, DegenerateDataError, NumericalError
from .kernel_predictive import (
    KernelMixtureState,
    kp_cdf,
    kp_conditional_density,
    kp_density,
    kp_init,
    kp_regression_mean,
)
from .kernels import KernelSpec
from .parametric import GaussianMeanState, ParametricState
from .sequences import BandwidthSchedule, RandomStream, as_generator, derive_stream

__all__ = [
    "BANDWIDTH_METHODS",
    "Functional",
    "ResampleConfig",
    "PosteriorDraws",
    "PosteriorSummary",
    "select_bandwidth",
    "lscv_score",
    "estimate_terminal_bandwidth",
    "bayesian_bootstrap_extend",
    "build_schedule",
    "predictive_resample",
    "posterior_summary",
    "prepare_kernel",
    "kernel_posterior",
    "ENDPOINT_KEY",
]

BANDWIDTH_METHODS = ("silverman", "scott", "lscv")

# sub-stream under the root reserved for the endpoint bootstrap
ENDPOINT_KEY = 2**63
# replicates simulated together; fixed so chunking never depends on n_jobs
_CHUNK = 32

_KINDS = (
    "mean",
    "quantile",
    "density-grid",
    "cdf-point",
    "regression-grid",
    "conditional-density",
    "parameter",
)


@dataclass(frozen=True, eq=False)
class Functional:
    """Estimator evaluated on each completed replicate.

    ``mean`` and ``quantile`` use the pooled sample ``x_{1:n+M}``; the grid,
    CDF and regression kinds read the terminal predictive; ``parameter``
    returns the terminal parameter of a parametric scheme.
    """

    kind: str
    q: float | None = None
    grid: np.ndarray | None = None
    t: float | None = None
    x: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown functional {self.kind!r}")
        if self.kind == "quantile" and not (self.q is not None and 0 < self.q < 1):
            raise ValueError("quantile functional needs 0 < q < 1")
        if self.kind in ("density-grid", "regression-grid", "conditional-density"):
            if self.grid is None:
                raise ValueError(f"{self.kind} functional needs a grid")
            g = np.array(self.grid, dtype=float)
            g.setflags(write=False)
            object.__setattr__(self, "grid", g)
        if self.kind == "cdf-point" and self.t is None:
            raise ValueError("cdf-point functional needs t")
        if self.kind == "conditional-density" and self.x is None:
            raise ValueError("conditional-density functional needs x")

    @classmethod
    def mean(cls):
        return cls("mean")

    @classmethod
    def quantile(cls, q):
        return cls("quantile", q=float(q))

    @classmethod
    def density_grid(cls, grid):
        return cls("density-grid", grid=grid)

    @classmethod
    def cdf_point(cls, t):
        return cls("cdf-point", t=float(t))

    @classmethod
    def regression_grid(cls, grid):
        return cls("regression-grid", grid=grid)

    @classmethod
    def conditional_density(cls, x, grid):
        return cls("conditional-density", grid=grid, x=np.atleast_1d(np.asarray(x, dtype=float)))

    @classmethod
    def parameter(cls):
        return cls("parameter")

    def __repr__(self):
        extra = {"q": self.q, "t": self.t}
        extra = ", ".join(f"{k}={v}" for k, v in extra.items() if v is not None)
        return f"Functional({self.kind!r}{', ' + extra if extra else ''})"


@dataclass(frozen=True)
class ResampleConfig:
    """Settings of one predictive resampling run."""

    M: int
    B: int
    seed: int = 0
    functional: Functional = field(default_factory=Functional.mean)
    scale_c: float = 1.0
    bandwidth_method: str = "scott"
    endpoint_reps: int = 10
    n_jobs: int = 1

    def __post_init__(self):
        if int(self.M) < 1 or int(self.B) < 1:
            raise ValueError("M and B must be positive")
        if not self.scale_c > 0:
            raise ValueError("scale_c must be positive")
        if self.bandwidth_method not in BANDWIDTH_METHODS:
            raise ValueError(f"unknown bandwidth method {self.bandwidth_method!r}")
        if int(self.endpoint_reps) < 1:
            raise ValueError("endpoint_reps must be >= 1")
        if int(self.n_jobs) < 1:
            raise ValueError("n_jobs must be >= 1")

    @property
    def root_stream(self) -> RandomStream:
        return derive_stream(self.seed, 0)


@dataclass(eq=False)
class PosteriorDraws:
    """Functional values per replicate, one row per replicate."""

    values: np.ndarray
    replicate_ids: np.ndarray
    config: ResampleConfig | None = None

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        self.replicate_ids = np.asarray(self.replicate_ids, dtype=int)
        if self.values.shape[0] != self.replicate_ids.size:
            raise ValueError("one row of values per replicate is required")

    @property
    def B(self) -> int:
        return self.values.shape[0]

    def scalar(self) -> np.ndarray:
        if self.values.shape[1] != 1:
            raise ValueError("draws are grid-valued")
        return self.values[:, 0]

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["replicate", "point_index", "value"])
        for b, row in zip(self.replicate_ids, self.values):
            for j, v in enumerate(row):
                w.writerow([int(b), j, repr(float(v))])
        return _emit(buf.getvalue(), path)

    @classmethod
    def from_csv(cls, path_or_text):
        rows = _read_rows(path_or_text, ["replicate", "point_index", "value"])
        reps = sorted({int(r[0]) for r in rows})
        width = max(int(r[1]) for r in rows) + 1
        pos = {b: k for k, b in enumerate(reps)}
        vals = np.full((len(reps), width), np.nan)
        for b, j, v in rows:
            vals[pos[int(b)], int(j)] = float(v)
        return cls(vals, np.array(reps))


@dataclass(eq=False)
class PosteriorSummary:
    """Pointwise posterior mean and 2.5% / 97.5% quantiles."""

    mean: np.ndarray
    q025: np.ndarray
    q975: np.ndarray

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["point_index", "mean", "q025", "q975"])
        for j, (m, lo, hi) in enumerate(zip(self.mean, self.q025, self.q975)):
            w.writerow([j, repr(float(m)), repr(float(lo)), repr(float(hi))])
        return _emit(buf.getvalue(), path)

    @classmethod
    def from_csv(cls, path_or_text):
        rows = _read_rows(path_or_text, ["point_index", "mean", "q025", "q975"])
        arr = np.array([[float(v) for v in r[1:]] for r in rows])
        return cls(arr[:, 0], arr[:, 1], arr[:, 2])


def _emit(text, path):
    if path is None:
        return text
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return None


def _read_rows(path_or_text, header):
    if "\n" in str(path_or_text):
        rows = list(csv.reader(io.StringIO(path_or_text)))
    else:
        with open(path_or_text, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    if rows[0] != header:
        raise DataError(f"expected header {header}, got {rows[0]}")
    return [r for r in rows[1:] if r]


# Bandwidth selection ---------------------------------------------------------


def _as_matrix(data):
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DataError("data must be a vector or an (n, p) array")
    if not np.all(np.isfinite(arr)):
        raise DataError("data contain non-finite values")
    return arr


def _rule_1d(x, method):
    n = x.size
    sd = float(np.std(x, ddof=1))
    if sd == 0:
        raise DegenerateDataError("data have zero spread; no bandwidth can be selected")
    q75, q25 = np.percentile(x, [75, 25])
    iqr = (q75 - q25) / 1.34
    spread = min(sd, iqr) if iqr > 0 else sd
    return (1.06 if method == "scott" else 0.9) * spread * n ** (-0.2)


def lscv_score(data, h, kernel: KernelSpec):
    """Least-squares cross-validation score ``int f_h^2 - (2/n) sum f_{h,-i}(X_i)``.

    ``h`` may be a vector; one score is returned per entry.
    """
    X = _as_matrix(data)
    n, p = X.shape
    kern = kernel.with_dimension(p)
    i, j = np.triu_indices(n, 1)
    d = X[i] - X[j]
    zero = np.zeros((1, p))
    hs = np.atleast_1d(np.asarray(h, dtype=float))
    out = np.empty(hs.size)
    for k, hk in enumerate(hs):
        u = d / hk
        conv = (n * kern.selfconv_std(zero)[0] + 2.0 * kern.selfconv_std(u).sum()) / (n**2 * hk**p)
        loo = 2.0 * kern.pdf_std(u).sum() / ((n - 1) * hk**p)
        out[k] = conv - 2.0 * loo / n
    return out


def _lscv(X, kernel):
    n, p = X.shape
    sds = np.std(X, axis=0, ddof=1)
    if np.any(sds == 0):
        raise DegenerateDataError("data have zero spread in some coordinate")
    hmax = 1.144 * math.exp(np.mean(np.log(sds))) * n ** (-0.2) / kernel.unit_sd
    grid = np.geomspace(0.1 * hmax, hmax, 50)
    scores = lscv_score(X, grid, kernel)
    return float(grid[int(np.argmin(scores))])


def select_bandwidth(data, method: str = "scott", kernel: KernelSpec | None = None) -> float:
    """Bandwidth ``h_n = g(x_{1:n})``.

    ``silverman`` is ``0.9 min(sd, IQR/1.34) n^-1/5`` and ``scott`` is
    ``1.06 min(sd, IQR/1.34) n^-1/5`` (the robust spread falls back to the
    standard deviation when the IQR vanishes); for multivariate data the shared scalar is the
    geometric mean of the per-coordinate rules.  The rules give the kernel's
    standard deviation, so for uniform or Laplace kernels the value is
    divided by the unit kernel's standard deviation.  ``lscv`` minimises
    :func:`lscv_score` over 50 log-spaced values on ``[0.1 hmax, hmax]``
    with ``hmax = 1.144 sd n^-1/5`` (again per kernel scale).
    """
    if method not in BANDWIDTH_METHODS:
        raise ValueError(f"unknown bandwidth method {method!r}")
    X = _as_matrix(data)
    n, p = X.shape
    if n < 3:
        raise DataError("bandwidth selection needs at least 3 points")
    kernel = KernelSpec("gaussian", p) if kernel is None else kernel.with_dimension(p)
    if kernel.is_dirac:
        return 0.0
    if method == "lscv":
        return _lscv(X, kernel)
    rules = [_rule_1d(X[:, j], method) for j in range(p)]
    return float(math.exp(np.mean(np.log(rules)))) / kernel.unit_sd


def bayesian_bootstrap_extend(data, M: int, stream):
    """Extend ``data`` by ``M`` Polya-urn draws: each new point copies a
    uniformly chosen element of the current pool."""
    X = _as_matrix(data)
    n = X.shape[0]
    rng = as_generator(stream)
    u = rng.random(M)
    idx = np.empty(M, dtype=np.int64)
    for i in range(M):
        j = min(int(u[i] * (n + i)), n + i - 1)
        idx[i] = j if j < n else idx[j - n]
    return np.vstack([X, X[idx]])


def estimate_terminal_bandwidth(
    data, M: int, method: str = "scott", reps: int = 10, stream=None, kernel=None
) -> float:
    """Average bandwidth selected on ``reps`` Bayesian-bootstrap extensions to ``n + M``."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if M == 0:
        return select_bandwidth(data, method, kernel)
    root = stream if isinstance(stream, RandomStream) else None
    rng = None if root is not None else as_generator(stream)
    vals = []
    for j in range(reps):
        s = root.child(j) if root is not None else rng
        vals.append(select_bandwidth(bayesian_bootstrap_extend(data, M, s), method, kernel))
    return float(np.mean(vals))


def build_schedule(h_n: float, h_terminal: float, M: int, scale_c: float = 1.0, n_obs: int = 1):
    """Exponential schedule ``h_{n+i} = c h_n exp(-b2 i)``, ``b2 = log(h_n / h_terminal) / M``."""
    if not (h_n > 0 and h_terminal > 0 and scale_c > 0):
        raise ValueError("bandwidths and scale must be positive")
    if M < 1:
        raise ValueError("M must be >= 1")
    b2 = math.log(h_n / h_terminal) / M
    if b2 <= 0:
        warnings.warn("terminal bandwidth is not below h_n; schedule is not decreasing", stacklevel=2)
    sched = BandwidthSchedule.exponential(h_n, b2, n_obs, M, scale_c)
    fwd = np.array(sched.forward_part)
    fwd[-1] = scale_c * h_terminal
    return BandwidthSchedule(sched.observed_part, fwd, "exponential", scale_c, (h_n, b2))


# Forward simulation ----------------------------------------------------------


def _evaluate_kernel(func: Functional, kern, centers, h):
    if func.kind == "mean":
        return np.mean(centers, axis=0)
    if func.kind == "quantile":
        return np.quantile(centers, func.q, axis=0)
    if func.kind == "parameter":
        raise ValueError("parameter functional needs a parametric scheme")
    state = KernelMixtureState(kern, centers, h)
    if func.kind == "density-grid":
        return kp_density(state, func.grid)
    if func.kind == "cdf-point":
        return np.atleast_1d(kp_cdf(state, func.t))
    if func.kind == "regression-grid":
        return kp_regression_mean(state, func.grid)
    return kp_conditional_density(state, func.grid, func.x)


def _kernel_chunk(state, h_full, func, M, streams):
    """Forward paths for one chunk of replicates."""
    n, p = state.n, state.p
    R = len(streams)
    dirac = state.kernel.is_dirac
    u = np.empty((R, M))
    z = np.zeros((R, M, p))
    for r, s in enumerate(streams):
        g = s.generator()
        u[r] = g.random(M)
        if not dirac:
            z[r] = state.kernel.sample_std(g, (M, p))
    pool = np.empty((R, n + M, p))
    pool[:, :n] = state.centers
    rows = np.arange(R)
    for i in range(M):
        size = n + i
        idx = np.minimum((u[:, i] * size).astype(np.int64), size - 1)
        new = pool[rows, idx]
        if not dirac:
            new = new + h_full[idx][:, None] * z[:, i]
        pool[:, size] = new
    out = []
    for r in range(R):
        centers = np.ascontiguousarray(pool[r])
        out.append(np.atleast_1d(_evaluate_kernel(func, state.kernel, centers, h_full)))
    return out


def _parametric_chunk(state, data, func, M, streams):
    R = len(streams)
    gauss_mean = isinstance(state, GaussianMeanState)
    p = state.p
    noise = np.empty((R, M, p))
    for r, s in enumerate(streams):
        g = s.generator()
        if gauss_mean:
            noise[r] = np.sqrt(state.Sigma_diag) * g.standard_normal((M, p))
        else:
            noise[r, :, 0] = state.model.noise(g, M)
    theta = np.tile(np.atleast_1d(np.asarray(state.theta_hat, dtype=float)), (R, 1))
    eta = state.step.values(state.n + M)[state.n :]
    xs = np.empty((R, M, p))
    for i in range(M):
        x = theta + noise[:, i]
        xs[:, i] = x
        if gauss_mean:
            theta = (1.0 - eta[i]) * theta + eta[i] * x
        else:
            z = state.model.natural_gradient(x, theta)
            theta = theta + eta[i] * z
            if not np.all(np.isfinite(theta)):
                raise NumericalError("non-finite parameter update in forward simulation")
            if state.constraints is not None:
                theta = np.clip(theta, *state.constraints)
    obs = np.empty((0, p)) if data is None else _as_matrix(data)
    out = []
    for r in range(R):
        pooled = np.vstack([obs, xs[r]])
        th = theta[r]
        if func.kind == "mean":
            val = np.mean(pooled, axis=0)
        elif func.kind == "quantile":
            val = np.quantile(pooled, func.q, axis=0)
        elif func.kind == "parameter":
            val = th
        elif func.kind == "cdf-point":
            val = _param_cdf(state, th, func.t)
        elif func.kind == "density-grid":
            val = _param_pdf(state, th, func.grid)
        else:
            raise ValueError(f"{func.kind} is not available for parametric schemes")
        out.append(np.atleast_1d(np.asarray(val, dtype=float)))
    return out


def _param_cdf(state, th, t):
    if isinstance(state, GaussianMeanState):
        return stats.norm.cdf(t, th[0], math.sqrt(state.Sigma_diag[0]))
    return state.model.cdf(t, th[0])


def _param_pdf(state, th, grid):
    if isinstance(state, GaussianMeanState):
        return stats.norm.pdf(grid, th[0], math.sqrt(state.Sigma_diag[0]))
    return state.model.pdf(grid, th[0])


def predictive_resample(state, schedule, config: ResampleConfig, data=None, stream=None) -> PosteriorDraws:
    """Draw ``B`` forward paths of length ``M`` and evaluate the functional.

    Parameters
    ----------
    state : KernelMixtureState, ParametricState or GaussianMeanState
        Predictive after the observed data.
    schedule : BandwidthSchedule, array or None
        Bandwidths of the synthetic atoms (kernel schemes).  A
        :class:`BandwidthSchedule` contributes its ``forward_part``; dirac
        and parametric schemes take ``None``.
    config : ResampleConfig
    data : array, optional
        Observed sample, pooled with the synthetic one by the ``mean`` and
        ``quantile`` functionals of parametric schemes.
    stream : RandomStream, optional
        Root stream; defaults to ``derive_stream(config.seed, 0)``.  Replicate
        ``b`` uses ``root.child(b)``.
    """
    M, B = int(config.M), int(config.B)
    root = config.root_stream if stream is None else stream
    func = config.functional
    if isinstance(state, KernelMixtureState):
        if func.kind in ("regression-grid", "conditional-density") and state.p < 2:
            raise ValueError(f"{func.kind} needs a joint (y, x) state")
        if state.kernel.is_dirac:
            fwd = np.zeros(M)
        else:
            if schedule is None:
                raise ValueError("kernel schemes need a bandwidth schedule")
            fwd = schedule.forward_part if isinstance(schedule, BandwidthSchedule) else np.asarray(schedule, float)
            if fwd.size != M:
                raise ValueError(f"schedule has {fwd.size} forward bandwidths, M = {M}")
        h_full = np.concatenate([state.bandwidths, fwd])
        work = lambda streams: _kernel_chunk(state, h_full, func, M, streams)
    elif isinstance(state, (ParametricState, GaussianMeanState)):
        work = lambda streams: _parametric_chunk(state, data, func, M, streams)
    else:
        raise TypeError(f"unsupported scheme {type(state).__name__}")

    chunks = [list(range(s, min(s + _CHUNK, B))) for s in range(0, B, _CHUNK)]

    def run(ids):
        try:
            return work([root.child(b) for b in ids])
        except Exception as err:
            err.args = (f"replicates {ids[0]}..{ids[-1]}: {err}", *err.args[1:])
            raise

    if config.n_jobs > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(config.n_jobs) as ex:
            results = list(ex.map(run, chunks))
    else:
        results = [run(c) for c in chunks]
    rows = [row for chunk in results for row in chunk]
    if len({r.size for r in rows}) != 1:
        raise ValueError("functional returned rows of different lengths")
    return PosteriorDraws(np.vstack(rows), np.arange(B), config)


def posterior_summary(draws: PosteriorDraws) -> PosteriorSummary:
    """Pointwise mean and type-7 2.5% / 97.5% quantiles over replicates."""
    if draws.B < 2:
        raise ValueError("posterior summary needs at least two replicates")
    q = np.quantile(draws.values, [0.025, 0.975], axis=0)
    return PosteriorSummary(draws.values.mean(axis=0), q[0], q[1])


def prepare_kernel(data, kernel: KernelSpec, config: ResampleConfig, stream=None):
    """Bandwidth pipeline: ``h_n``, the bootstrap endpoint ``h_{n+M}`` and the
    exponential schedule between them.  Returns ``(state, schedule)``;
    dirac kernels get ``schedule = None``."""
    X = _as_matrix(data)
    kernel = kernel.with_dimension(X.shape[1])
    root = config.root_stream if stream is None else stream
    if kernel.is_dirac:
        return kp_init(X, 0.0, kernel), None
    h_n = select_bandwidth(X, config.bandwidth_method, kernel)
    h_t = estimate_terminal_bandwidth(
        X, config.M, config.bandwidth_method, config.endpoint_reps, root.child(ENDPOINT_KEY), kernel
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sched = build_schedule(h_n, h_t, config.M, config.scale_c, X.shape[0])
    return kp_init(X, sched.observed_part[0], kernel), sched


def kernel_posterior(data, kernel: KernelSpec, config: ResampleConfig, stream=None):
    """Full bandwidth-selection plus resampling pipeline for kernel schemes.

    Returns ``(draws, schedule, state)``; see :func:`prepare_kernel`.
    """
    root = config.root_stream if stream is None else stream
    state, sched = prepare_kernel(data, kernel, config, root)
    return predictive_resample(state, sched, config, stream=root), sched, state


def config_dict(config: ResampleConfig) -> dict:
    d = asdict(config)
    d["functional"] = repr(config.functional)
    return d
