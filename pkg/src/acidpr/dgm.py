"""Simulated data-generating mechanisms for the benchmarks.

* random univariate mixtures of Gaussian and Student-t components;
* Gaussian-process regression functions with Gaussian or Student-t noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, stats

from .exceptions import NumericalError
from .sequences import as_generator

__all__ = [
    "DgmSpec",
    "dgm_mixture",
    "gp_kernel",
    "gp_cholesky",
    "dgm_gp_regression",
    "RegressionDataset",
    "regression_dataset",
    "REGRESSION_TEST_GRID",
]

_MAX_REJECT = 100_000
_MIX_DF = 5.0
_NUGGET = 1e-8
_JITTERS = (1e-8, 1e-7, 1e-6, 1e-5, 1e-4)

REGRESSION_TEST_GRID = np.arange(100) * 0.05


@dataclass
class DgmSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def to_json(self):
        def clean(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, (np.floating, np.integer)):
                return v.item()
            if isinstance(v, (list, tuple)):
                return [clean(u) for u in v]
            return v

        return {"kind": self.kind, "params": {k: clean(v) for k, v in self.params.items()}}


class _Mixture:
    def __init__(self, weights, means, scales, types):
        self.weights = np.asarray(weights)
        self.means = np.asarray(means)
        self.scales = np.asarray(scales)
        self.types = list(types)

    def _component(self, k):
        if self.types[k] == "gaussian":
            return stats.norm(self.means[k], self.scales[k])
        return stats.t(_MIX_DF, self.means[k], self.scales[k])

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return sum(w * self._component(k).pdf(x) for k, w in enumerate(self.weights))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return sum(w * self._component(k).cdf(x) for k, w in enumerate(self.weights))

    def sample(self, stream, size):
        rng = as_generator(stream)
        comp = rng.choice(len(self.weights), size=size, p=self.weights)
        z = rng.standard_normal(size)
        t = rng.standard_t(_MIX_DF, size)
        is_t = np.array([self.types[k] == "student-t" for k in range(len(self.types))])[comp]
        return self.means[comp] + self.scales[comp] * np.where(is_t, t, z)


def dgm_mixture(stream):
    """Random mixture density.

    Two or three components; means uniform on ``(-3, 3)`` redrawn until all
    pairwise gaps are at least 1.5; component scales uniform on ``(0.5, 2)``;
    each component Gaussian or Student-t with 5 degrees of freedom; weights
    are normalised uniforms.  Returns ``(pdf, sampler, spec)`` where
    ``sampler(stream, size)`` draws i.i.d. observations.
    """
    rng = as_generator(stream)
    k = int(rng.integers(2, 4))
    for _ in range(_MAX_REJECT):
        mu = rng.uniform(-3.0, 3.0, k)
        gaps = np.abs(mu[:, None] - mu[None, :])[np.triu_indices(k, 1)]
        if np.all(gaps >= 1.5):
            break
    else:
        raise NumericalError("mixture mean rejection sampler exceeded its cap")
    scale = rng.uniform(0.5, 2.0, k)
    types = ["gaussian" if t == 0 else "student-t" for t in rng.integers(0, 2, k)]
    u = rng.uniform(0.0, 1.0, k)
    w = u / u.sum()
    mix = _Mixture(w, mu, scale, types)
    spec = DgmSpec(
        "mixture-density",
        {"n_comp": k, "means": mu, "scales": scale, "types": types, "weights": w, "df": _MIX_DF},
    )
    return mix.pdf, mix.sample, spec


def gp_kernel(x1, x2, variant: str = "dgm1", form: str = "gaussian"):
    """Covariance between design points.

    ``form="gaussian"`` uses ``exp(-d^2)`` for dgm1/dgm2 and
    ``0.8 exp(-d^2) + 0.2 exp(-|d|_1)`` for dgm3; ``form="exponential"``
    replaces ``d^2`` by the Euclidean distance ``d``.
    """
    a = np.asarray(x1, dtype=float)
    b = np.asarray(x2, dtype=float)
    a = a[:, None] if a.ndim == 1 else a
    b = b[:, None] if b.ndim == 1 else b
    diff = a[:, None, :] - b[None, :, :]
    d2 = np.sum(diff**2, axis=-1)
    d1 = np.sum(np.abs(diff), axis=-1)
    if form == "gaussian":
        base = np.exp(-d2)
    elif form == "exponential":
        base = np.exp(-np.sqrt(d2))
    else:
        raise ValueError(f"unknown kernel form {form!r}")
    if variant in ("dgm1", "dgm2"):
        return base
    if variant == "dgm3":
        return 0.8 * base + 0.2 * np.exp(-d1)
    raise ValueError(f"unknown regression variant {variant!r}")


def gp_cholesky(K):
    """Lower Cholesky factor of ``K + nugget I``, escalating the nugget by
    factors of ten from 1e-8 up to 1e-4."""
    n = K.shape[0]
    for jit in _JITTERS:
        try:
            return linalg.cholesky(K + jit * np.eye(n), lower=True), jit
        except linalg.LinAlgError:
            continue
    raise NumericalError("kernel matrix is not positive definite even with jitter 1e-4", _JITTERS[-1])


def dgm_gp_regression(stream, variant: str, design, form: str = "gaussian"):
    """Draw ``f ~ GP(0, k)`` at the design points.

    Returns ``(f_values, noise_sampler)``; the sampler draws standard
    Gaussian noise for dgm1 and dgm3 and Student-t(5) noise for dgm2, as
    ``noise_sampler(stream, size)``.
    """
    x = np.asarray(design, dtype=float)
    if x.shape[0] > 2000:
        raise ValueError("design is limited to 2000 points")
    L, _ = gp_cholesky(gp_kernel(x, x, variant, form))
    rng = as_generator(stream)
    f = L @ rng.standard_normal(L.shape[0])

    if variant == "dgm2":
        def noise(s, size):
            return as_generator(s).standard_t(5.0, size)
    else:
        def noise(s, size):
            return as_generator(s).standard_normal(size)

    return f, noise


@dataclass
class RegressionDataset:
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    f_test: np.ndarray
    spec: DgmSpec

    @property
    def train_joint(self):
        return np.column_stack([self.y_train, self.x_train])

    @property
    def test_pairs(self):
        return np.column_stack([self.y_test, self.x_test])


def regression_dataset(stream, variant: str = "dgm1", n_train: int = 200, x_test=None, form="gaussian"):
    """Training covariates uniform on ``(0, 5)``, test covariates on a fixed
    grid, ``f`` drawn jointly at both and noisy responses everywhere."""
    rng = as_generator(stream)
    x_test = REGRESSION_TEST_GRID if x_test is None else np.asarray(x_test, dtype=float)
    x_train = rng.uniform(0.0, 5.0, n_train)
    design = np.concatenate([x_train, x_test])
    f, noise = dgm_gp_regression(rng, variant, design, form)
    eps = noise(rng, design.size)
    y = f + eps
    spec = DgmSpec("gp-regression", {"variant": variant, "form": form, "n_train": n_train})
    return RegressionDataset(
        x_train, y[:n_train], x_test, y[n_train:], f[n_train:], spec
    )
