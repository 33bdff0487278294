"""Kernel families, their convolutions and total-variation distances.

A kernel with bandwidth ``h`` centred at ``c`` has density
``prod_j K((x_j - c_j) / h) / h**p``; multivariate kernels are isotropic
products of the univariate shape.  The total-variation values computed here
compare the one-step kernel ``mu_i`` (bandwidth ``h_old``) with its
convolution against the next kernel (bandwidth ``h_new``), which is the
quantity that drives the almost-c.i.d. slack of kernel predictives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate as _integrate
from scipy import optimize, special

from .exceptions import NumericalError, UnsupportedOperationError
from .sequences import as_generator

__all__ = [
    "SHAPES",
    "KernelSpec",
    "TvResult",
    "AcidConstants",
    "ConvolutionLaw",
    "acid_constants",
    "kernel_density",
    "kernel_sample",
    "convolution_params",
    "convolution_tv",
    "laplace_scale_tv",
    "tv_gaussian_bound",
    "tv_numeric",
    "integrate_1d",
]

SHAPES = ("gaussian", "uniform", "laplace", "dirac")

_SQRT2PI = math.sqrt(2.0 * math.pi)


# Unit-bandwidth univariate kernels ------------------------------------------


def _pdf1(shape, u):
    if shape == "gaussian":
        return np.exp(-0.5 * u * u) / _SQRT2PI
    if shape == "uniform":
        return np.where(np.abs(u) <= 1.0, 0.5, 0.0)
    if shape == "laplace":
        return 0.5 * np.exp(-np.abs(u))
    raise UnsupportedOperationError("the dirac kernel has no density")


def _cdf1(shape, u):
    if shape == "gaussian":
        return special.ndtr(u)
    if shape == "uniform":
        return np.clip(0.5 * (u + 1.0), 0.0, 1.0)
    if shape == "laplace":
        e = 0.5 * np.exp(-np.abs(u))
        return np.where(u < 0, e, 1.0 - e)
    return np.where(u >= 0, 1.0, 0.0)


def _selfconv1(shape, u):
    """Density of the sum of two independent unit kernels (used by LSCV)."""
    a = np.abs(u)
    if shape == "gaussian":
        return np.exp(-0.25 * u * u) / (2.0 * math.sqrt(math.pi))
    if shape == "uniform":
        return np.where(a <= 2.0, (2.0 - a) / 4.0, 0.0)
    if shape == "laplace":
        return 0.25 * (1.0 + a) * np.exp(-a)
    raise UnsupportedOperationError("the dirac kernel has no density")


_UNIT_SD = {"gaussian": 1.0, "uniform": 1.0 / math.sqrt(3.0), "laplace": math.sqrt(2.0), "dirac": 0.0}


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family: ``shape`` in {gaussian, uniform, laplace, dirac}.

    ``dimension > 1`` means an isotropic product kernel: every coordinate
    uses the same shape and the same scalar bandwidth.
    """

    shape: str = "gaussian"
    dimension: int = 1

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown kernel shape {self.shape!r}; choose from {SHAPES}")
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ValueError("kernel dimension must be a positive integer")

    @property
    def structure(self) -> str:
        return "univariate" if self.dimension == 1 else "isotropic-product"

    @property
    def is_dirac(self) -> bool:
        return self.shape == "dirac"

    @property
    def unit_sd(self) -> float:
        """Standard deviation of one coordinate of the unit-bandwidth kernel."""
        return _UNIT_SD[self.shape]

    def with_dimension(self, p: int) -> "KernelSpec":
        return KernelSpec(self.shape, p)

    # vectorised building blocks; ``u`` has the coordinate axis last
    def pdf_std(self, u):
        return np.prod(_pdf1(self.shape, np.asarray(u, dtype=float)), axis=-1)

    def cdf1_std(self, u):
        return _cdf1(self.shape, np.asarray(u, dtype=float))

    def pdf1_std(self, u):
        return _pdf1(self.shape, np.asarray(u, dtype=float))

    def selfconv_std(self, u):
        return np.prod(_selfconv1(self.shape, np.asarray(u, dtype=float)), axis=-1)

    def sample_std(self, rng: np.random.Generator, size) -> np.ndarray:
        """Unit-bandwidth noise of shape ``size`` (last axis = coordinates)."""
        if self.shape == "gaussian":
            return rng.standard_normal(size)
        if self.shape == "uniform":
            return rng.uniform(-1.0, 1.0, size)
        if self.shape == "laplace":
            return rng.laplace(0.0, 1.0, size)
        return np.zeros(size)


def _as_point(v, p):
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if arr.shape[-1] != p:
        if p == 1:
            return arr[..., None]
        raise ValueError(f"expected points of dimension {p}, got shape {arr.shape}")
    return arr


def kernel_density(spec: KernelSpec, center, h: float, x):
    """Density at ``x`` of the kernel centred at ``center`` with bandwidth ``h``.

    ``x`` may hold many points (coordinate axis last, or a flat vector when
    ``p == 1``); a float is returned for a single point.
    """
    if spec.is_dirac:
        raise UnsupportedOperationError("the dirac kernel has no density")
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    p = spec.dimension
    c = _as_point(center, p)
    if c.shape != (p,):
        raise ValueError("center must be a single point")
    xs = np.asarray(x, dtype=float)
    scalar = xs.ndim == 0 or (p > 1 and xs.ndim == 1)
    xs = _as_point(xs, p)
    out = spec.pdf_std((xs - c) / h) / h**p
    return float(out.reshape(-1)[0]) if scalar else out


def kernel_sample(spec: KernelSpec, center, h: float, stream, size=None):
    """Exact draw(s) from the kernel measure centred at ``center``."""
    if h < 0 or (h == 0 and not spec.is_dirac):
        raise ValueError("bandwidth must be positive (zero only for dirac)")
    rng = as_generator(stream)
    p = spec.dimension
    c = _as_point(center, p)
    shape = (p,) if size is None else (int(size), p)
    draw = c + h * spec.sample_std(rng, shape)
    if p == 1:
        return float(draw[0]) if size is None else draw[:, 0]
    return draw


# Convolution laws -----------------------------------------------------------


@dataclass(frozen=True)
class ConvolutionLaw:
    """Law of ``X + h_new * U`` for ``X`` drawn from the ``h_old`` kernel.

    ``family`` is ``gaussian`` (``scale`` = standard deviation), ``laplace``
    (``scale`` = Laplace scale) or ``trapezoid`` (flat on ``center +- inner``,
    linear ramps out to ``center +- outer``).
    """

    family: str
    scale: float
    inner: float = 0.0
    outer: float = 0.0

    def pdf(self, x, center=0.0):
        z = np.asarray(x, dtype=float) - center
        if self.family == "gaussian":
            return np.exp(-0.5 * (z / self.scale) ** 2) / (_SQRT2PI * self.scale)
        if self.family == "laplace":
            return 0.5 * np.exp(-np.abs(z) / self.scale) / self.scale
        a = np.abs(z)
        w_in, w_out = self.inner, self.outer
        h_big = 0.5 * (w_out + w_in)  # the larger of the two bandwidths
        h_small = 0.5 * (w_out - w_in)
        flat = 1.0 / (2.0 * h_big)
        ramp = (w_out - a) / (4.0 * h_small * h_big)
        return np.where(a < w_in, flat, np.where(a < w_out, ramp, 0.0))

    def breakpoints(self, center=0.0):
        if self.family == "trapezoid":
            return tuple(center + s for s in (-self.outer, -self.inner, self.inner, self.outer))
        return (center,) if self.family == "laplace" else ()


def convolution_params(spec: KernelSpec, h_new: float, h_old: float) -> ConvolutionLaw:
    """Per-coordinate law of the kernel convolution ``K_{n+1} * K_i``.

    Gaussian kernels convolve to a Gaussian with variance
    ``h_old**2 + h_new**2``; uniform kernels to a trapezoid with breakpoints
    ``+-|h_old - h_new|`` and ``+-(h_old + h_new)``.  For Laplace kernels the
    Laplace law with scale ``h_old + h_new`` is returned, the form used in the
    a.c.i.d. bound (the exact convolution of two Laplace densities is not
    itself Laplace).
    """
    if spec.is_dirac:
        raise UnsupportedOperationError("convolution of dirac kernels is a dirac kernel")
    if not (h_new > 0 and h_old > 0):
        raise ValueError("bandwidths must be positive")
    if spec.shape == "gaussian":
        return ConvolutionLaw("gaussian", math.sqrt(h_old * h_old + h_new * h_new))
    if spec.shape == "laplace":
        return ConvolutionLaw("laplace", h_old + h_new)
    return ConvolutionLaw("trapezoid", max(h_old, h_new), abs(h_old - h_new), h_old + h_new)


# Total variation ------------------------------------------------------------


@dataclass(frozen=True)
class TvResult:
    value: float
    kind: str  # "exact" | "upper-bound"

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"TV value {self.value} outside [0, 1]")
        if self.kind not in ("exact", "upper-bound"):
            raise ValueError(f"unknown TV kind {self.kind!r}")

    def as_row(self, spec: KernelSpec, h_new, h_old) -> dict:
        return {"shape": spec.shape, "h_new": h_new, "h_old": h_old, "value": self.value, "kind": self.kind}


@dataclass(frozen=True)
class AcidConstants:
    """``(C, epsilon)`` with ``TV(mu_{n+1*i}, mu_i) <= C (h_{n+1}/h_i)**epsilon``."""

    C: float
    epsilon: float

    def __post_init__(self):
        if not (self.C > 0 and self.epsilon > 0):
            raise ValueError("C and epsilon must be positive")


def acid_constants(spec: KernelSpec, laplace_c: float = 1.0) -> AcidConstants:
    """Default constants for ``spec``; ``laplace_c`` is the per-coordinate Laplace C."""
    p = spec.dimension
    if spec.shape == "gaussian":
        return AcidConstants(1.5 * p, 2.0)
    if spec.shape == "uniform":
        return AcidConstants(0.25 * p, 1.0)
    if spec.shape == "laplace":
        return AcidConstants(laplace_c * p, 1.0)
    raise UnsupportedOperationError("the dirac kernel is exactly c.i.d.; no constants")


def laplace_scale_tv(c: float, a: float) -> float:
    """``TV(Laplace(0, c), Laplace(0, c + a))`` in closed form."""
    r = c / (c + a)
    return r ** (c / a) - r ** ((c + a) / a)


def convolution_tv(spec: KernelSpec, h_new: float, h_old: float) -> TvResult:
    """TV between the ``h_old`` kernel and its convolution with the ``h_new`` kernel."""
    if spec.is_dirac:
        raise UnsupportedOperationError("dirac convolution TV is identically zero")
    if not (h_new > 0 and h_old > 0):
        raise ValueError("bandwidths must be positive")
    ratio = h_new / h_old
    if spec.shape == "gaussian":
        value, kind = 1.5 * ratio * ratio, "upper-bound"
    elif spec.shape == "uniform":
        value, kind = 0.25 * ratio, "exact"
    else:
        value, kind = laplace_scale_tv(h_old, h_new), "exact"
    if h_new > h_old and kind == "exact":
        kind = "upper-bound"
    if spec.dimension > 1:
        value, kind = spec.dimension * value, "upper-bound"
    if value > 1.0:
        value, kind = 1.0, "upper-bound"
    return TvResult(float(value), kind)


def tv_gaussian_bound(mean, sigma1_diag, sigma2_diag) -> TvResult:
    """Upper bound on TV between two equal-mean Gaussians with diagonal covariance."""
    s1 = np.atleast_1d(np.asarray(sigma1_diag, dtype=float))
    s2 = np.atleast_1d(np.asarray(sigma2_diag, dtype=float))
    mu = np.atleast_1d(np.asarray(mean, dtype=float))
    if s1.shape != s2.shape or mu.shape != s1.shape:
        raise ValueError("mean and covariance diagonals must share one dimension")
    if np.any(s1 <= 0) or np.any(s2 <= 0):
        raise ValueError("covariance entries must be positive")
    lam = s2 / s1 - 1.0
    value = 1.5 * min(1.0, float(np.sqrt(np.sum(lam * lam))))
    return TvResult(min(1.0, value), "upper-bound")


# Quadrature -----------------------------------------------------------------


def integrate_1d(f, lo, hi, breakpoints=(), abs_tol=1e-10):
    """Adaptive quadrature of ``f`` on ``[lo, hi]`` split at ``breakpoints``.

    Returns ``(value, error_estimate)``; raises :class:`NumericalError` when
    the summed error estimate exceeds ``abs_tol``.
    """
    knots = sorted({float(lo), float(hi), *(float(b) for b in breakpoints if lo < b < hi)})
    total, err = 0.0, 0.0
    tol = abs_tol / max(1, len(knots) - 1)
    for a, b in zip(knots[:-1], knots[1:]):
        if b <= a:
            continue
        val, e = _integrate.quad(f, a, b, epsabs=tol, epsrel=1e-13, limit=500)
        total += val
        err += e
    if err > abs_tol:
        raise NumericalError(
            f"quadrature did not reach tolerance {abs_tol:g} (achieved {err:g})", achieved=err
        )
    return total, err


def tv_numeric(density1, density2, support_hint, abs_tol=1e-9, breakpoints=(), n_scan=4001):
    """``0.5 * integral |f - g|`` over ``support_hint`` by adaptive quadrature.

    Sign changes of ``f - g`` are located on a scan grid and refined with a
    root finder so the absolute value is integrated piecewise-smooth.
    """
    lo, hi = map(float, support_hint)

    def diff(x):
        return float(density1(x)) - float(density2(x))

    grid = np.linspace(lo, hi, n_scan)
    d = np.array([diff(x) for x in grid])
    knots = list(breakpoints)
    for k in np.nonzero(np.sign(d[:-1]) * np.sign(d[1:]) < 0)[0]:
        try:
            knots.append(optimize.brentq(diff, grid[k], grid[k + 1], xtol=1e-15))
        except ValueError:
            pass
    value, _ = integrate_1d(lambda x: 0.5 * abs(diff(x)), lo, hi, knots, abs_tol)
    return value
