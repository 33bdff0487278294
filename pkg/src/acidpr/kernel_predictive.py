"""Recursive kernel predictive distributions.

The predictive after ``n`` observations is the uniform mixture

    alpha_n = (1/n) sum_i mu_i,    mu_i = kernel centred at X_i with bandwidth h_i,

obtained from the recursion ``alpha_n = (n-1)/n alpha_{n-1} + mu_n / n``.
Because the first step multiplies the initial distribution by zero, a state
always starts from at least one data point and no initial distribution is
stored.

Joint regression states hold atoms over ``(y, x_1, ..., x_p)`` with one
shared scalar bandwidth per atom; coordinate 0 is the response.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DataError, NoSupportError, UnsupportedOperationError
from .kernels import KernelSpec
from .sequences import as_generator

__all__ = [
    "KernelAtom",
    "KernelMixtureState",
    "kp_init",
    "kp_update",
    "kp_density",
    "kp_cdf",
    "kp_box_prob",
    "kp_sample",
    "kp_regression_mean",
    "kp_conditional_density",
    "RfKernelConfig",
    "rf_lambda",
    "rf_state",
]

# rows of the (query x atom) block evaluated at once
_BLOCK = 2048


@dataclass(frozen=True)
class KernelAtom:
    center: tuple[float, ...]
    bandwidth: float


@dataclass(frozen=True, eq=False)
class KernelMixtureState:
    """Uniform mixture of kernel atoms; each atom has weight ``1/n``.

    ``centers`` has shape ``(n, p)`` and ``bandwidths`` shape ``(n,)``, both
    in observation order (observed data first, synthetic points appended).
    """

    kernel: KernelSpec
    centers: np.ndarray
    bandwidths: np.ndarray

    def __post_init__(self):
        c = np.array(self.centers, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        h = np.array(self.bandwidths, dtype=float).reshape(-1)
        if c.shape[1] != self.kernel.dimension:
            raise ValueError(
                f"atoms have dimension {c.shape[1]}, kernel expects {self.kernel.dimension}"
            )
        if c.shape[0] != h.size:
            raise ValueError("one bandwidth per atom is required")
        if c.shape[0] == 0:
            raise DataError("a kernel predictive needs at least one atom")
        if self.kernel.is_dirac:
            h = np.zeros_like(h)
        elif np.any(h <= 0):
            raise ValueError("non-dirac atoms need positive bandwidths")
        c.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "bandwidths", h)

    @property
    def n(self) -> int:
        return self.centers.shape[0]

    @property
    def p(self) -> int:
        return self.centers.shape[1]

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.n, 1.0 / self.n)

    def atoms(self):
        return [KernelAtom(tuple(c), float(h)) for c, h in zip(self.centers, self.bandwidths)]

    # duck-typed scheme interface used by the diagnostics and engine
    def sample(self, stream, size=None):
        return kp_sample(self, stream, size)

    def update(self, x_new, h_new):
        return kp_update(self, x_new, h_new)

    def box_prob(self, lo, hi):
        return kp_box_prob(self, lo, hi)

    def cdf(self, t):
        return kp_cdf(self, t)

    def density(self, x):
        return kp_density(self, x)

    # CSV round trip ---------------------------------------------------------
    def to_csv(self, path_or_buf=None):
        """Write ``atom_index,c1..cp,bandwidth``; returns the text if no path."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["atom_index", *[f"c{j + 1}" for j in range(self.p)], "bandwidth"])
        for i, (c, h) in enumerate(zip(self.centers, self.bandwidths)):
            w.writerow([i, *map(repr, map(float, c)), repr(float(h))])
        text = buf.getvalue()
        if path_or_buf is None:
            return text
        with open(path_or_buf, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        return None

    @classmethod
    def from_csv(cls, path_or_text, kernel_shape="gaussian"):
        if "\n" in str(path_or_text):
            rows = list(csv.reader(io.StringIO(path_or_text)))
        else:
            with open(path_or_text, encoding="utf-8", newline="") as fh:
                rows = list(csv.reader(fh))
        header, body = rows[0], [r for r in rows[1:] if r]
        p = len(header) - 2
        arr = np.array([[float(v) for v in r[1:]] for r in body])
        return cls(KernelSpec(kernel_shape, p), arr[:, :p], arr[:, p])


def _points(x, p):
    arr = np.asarray(x, dtype=float)
    if p == 1 and arr.ndim <= 1:
        return arr.reshape(-1, 1)
    arr = np.atleast_2d(arr)
    if arr.shape[-1] != p:
        raise ValueError(f"expected points of dimension {p}, got shape {arr.shape}")
    return arr


def kp_init(data, h_obs, kernel: KernelSpec) -> KernelMixtureState:
    """State with one atom per observation, all with bandwidth ``h_obs``."""
    arr = np.asarray(data, dtype=float)
    if arr.size == 0:
        raise DataError("kp_init needs at least one observation")
    pts = _points(arr, kernel.dimension)
    if not kernel.is_dirac and not h_obs > 0:
        raise ValueError("h_obs must be positive")
    h = 0.0 if kernel.is_dirac else float(h_obs)
    return KernelMixtureState(kernel, pts, np.full(pts.shape[0], h))


def kp_update(state: KernelMixtureState, x_new, h_new) -> KernelMixtureState:
    """Append the atom ``(x_new, h_new)``; every weight becomes ``1/(n+1)``."""
    x = np.atleast_1d(np.asarray(x_new, dtype=float))
    if x.shape != (state.p,):
        raise ValueError(f"new point must have dimension {state.p}")
    if not state.kernel.is_dirac and not h_new > 0:
        raise ValueError("h_new must be positive for non-dirac kernels")
    return KernelMixtureState(
        state.kernel,
        np.vstack([state.centers, x[None, :]]),
        np.append(state.bandwidths, 0.0 if state.kernel.is_dirac else float(h_new)),
    )


def _atom_kernel_values(state, xs, coords=None):
    """Matrix ``[K_i(x_q)]`` of per-atom densities over the selected coordinates."""
    kern = state.kernel
    c = state.centers if coords is None else state.centers[:, coords]
    h = state.bandwidths
    u = (xs[:, None, :] - c[None, :, :]) / h[None, :, None]
    return kern.pdf_std(u) / h[None, :] ** c.shape[1]


def kp_density(state: KernelMixtureState, x):
    """Mixture density ``p_n(x) = (1/n) sum_i K_i(x - X_i)``."""
    if state.kernel.is_dirac:
        raise UnsupportedOperationError("the empirical measure has no density")
    xs = np.asarray(x, dtype=float)
    scalar = xs.ndim == 0 or (state.p > 1 and xs.ndim == 1)
    pts = _points(xs, state.p)
    out = np.empty(pts.shape[0])
    for s in range(0, pts.shape[0], _BLOCK):
        out[s : s + _BLOCK] = _atom_kernel_values(state, pts[s : s + _BLOCK]).mean(axis=1)
    return float(out[0]) if scalar else out


def kp_cdf(state: KernelMixtureState, t):
    """Predictive CDF ``alpha_n((-inf, t])`` (univariate states only)."""
    if state.p != 1:
        raise UnsupportedOperationError("CDF is only defined for univariate states")
    ts = np.asarray(t, dtype=float)
    flat = ts.reshape(-1)
    c = state.centers[:, 0]
    out = np.empty(flat.size)
    for s in range(0, flat.size, _BLOCK):
        block = flat[s : s + _BLOCK, None] - c[None, :]
        if state.kernel.is_dirac:
            vals = (block >= 0).astype(float)
        else:
            vals = state.kernel.cdf1_std(block / state.bandwidths[None, :])
        out[s : s + _BLOCK] = vals.mean(axis=1)
    return float(out[0]) if ts.ndim == 0 else out.reshape(ts.shape)


def kp_box_prob(state: KernelMixtureState, lo, hi) -> float:
    """``alpha_n(box)`` for the half-open box ``(lo, hi]`` (entries may be infinite)."""
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (state.p,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (state.p,))
    c, h = state.centers, state.bandwidths
    if state.kernel.is_dirac:
        inside = np.all((c > lo) & (c <= hi), axis=1)
        return float(inside.mean())
    with np.errstate(invalid="ignore"):
        upper = state.kernel.cdf1_std((hi - c) / h[:, None])
        lower = state.kernel.cdf1_std((lo - c) / h[:, None])
    return float(np.prod(upper - lower, axis=1).mean())


def kp_sample(state: KernelMixtureState, stream, size=None):
    """Exact mixture draw: uniform atom index, then a kernel draw around it."""
    rng = as_generator(stream)
    m = 1 if size is None else int(size)
    idx = rng.integers(0, state.n, size=m)
    noise = state.kernel.sample_std(rng, (m, state.p))
    draws = state.centers[idx] + state.bandwidths[idx, None] * noise
    if size is None:
        return float(draws[0, 0]) if state.p == 1 else draws[0]
    return draws[:, 0] if state.p == 1 else draws


def _x_weights(state, x_query, normalized):
    pts = _points(x_query, state.p - 1)
    coords = np.arange(1, state.p)
    w = _atom_kernel_values(state, pts, coords)
    if not normalized:
        w = w * state.bandwidths[None, :] ** (state.p - 1)
    return pts, w


def kp_regression_mean(state: KernelMixtureState, x_query, normalized: bool = True):
    """Conditional mean ``E(Y_{n+1} | x)`` of a joint ``(y, x)`` state.

    The weights are the per-atom covariate densities ``K_x((x - X_i)/h_i)/h_i**p``,
    which makes the result the exact conditional mean of the joint
    predictive.  ``normalized=False`` drops the ``1/h_i**p`` factor, giving
    the plain Nadaraya-Watson weights; both coincide when all bandwidths are
    equal.
    """
    if state.p < 2:
        raise ValueError("regression needs a joint (y, x) state")
    if state.kernel.is_dirac:
        raise UnsupportedOperationError("dirac states have no kernel weights")
    xs = np.asarray(x_query, dtype=float)
    scalar = xs.ndim == 0 or (state.p > 2 and xs.ndim == 1)
    pts = _points(xs, state.p - 1)
    y = state.centers[:, 0]
    out = np.empty(pts.shape[0])
    for s in range(0, pts.shape[0], _BLOCK):
        _, w = _x_weights(state, pts[s : s + _BLOCK], normalized)
        tot = w.sum(axis=1)
        if np.any(tot <= 0):
            bad = pts[s : s + _BLOCK][tot <= 0][0]
            raise NoSupportError(f"no kernel mass at query point {bad}")
        out[s : s + _BLOCK] = (w @ y) / tot
    return float(out[0]) if scalar else out


def kp_conditional_density(state: KernelMixtureState, y, x_query):
    """Joint density at ``(y, x)`` divided by the covariate marginal at ``x``."""
    if state.p < 2:
        raise ValueError("conditional density needs a joint (y, x) state")
    if state.kernel.is_dirac:
        raise UnsupportedOperationError("the empirical measure has no density")
    xq = _points(x_query, state.p - 1)
    if xq.shape[0] != 1:
        raise ValueError("conditional density takes a single covariate point")
    _, wx = _x_weights(state, xq, True)
    marg = wx.sum()
    if marg <= 0:
        raise NoSupportError(f"zero covariate marginal at {xq[0]}")
    ys = np.asarray(y, dtype=float)
    flat = ys.reshape(-1)
    h = state.bandwidths
    ky = state.kernel.pdf1_std((flat[:, None] - state.centers[None, :, 0]) / h[None, :]) / h[None, :]
    out = (ky @ wx[0]) / marg
    return float(out[0]) if ys.ndim == 0 else out.reshape(ys.shape)


# Kernel view of random forests ----------------------------------------------


@dataclass(frozen=True)
class RfKernelConfig:
    leaves: int
    dimension: int

    def __post_init__(self):
        if self.leaves < 2:
            raise ValueError("a tree needs at least two leaves")
        if self.dimension < 1:
            raise ValueError("dimension must be positive")

    @property
    def lam(self) -> float:
        return math.log(self.leaves) / self.dimension


def rf_lambda(l: int, p: int) -> float:
    """Decay rate ``log(l) / p`` of the kernel limit of a random forest."""
    return RfKernelConfig(int(l), int(p)).lam


def rf_state(y, X, l: int) -> KernelMixtureState:
    """Laplace product joint state whose regression mean is the kernel-RF mean.

    With every atom at bandwidth ``1/lambda`` the regression weights are
    proportional to ``exp(-lambda * ||x - X_i||_1)``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size != X.shape[0]:
        raise ValueError("y and X must have the same number of rows")
    lam = rf_lambda(l, X.shape[1])
    joint = np.column_stack([y, X])
    return kp_init(joint, 1.0 / lam, KernelSpec("laplace", X.shape[1] + 1))
