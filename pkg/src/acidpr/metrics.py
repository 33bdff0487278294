"""Evaluation metrics for posterior bands against a known truth."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

__all__ = ["EvaluationGrid", "MetricsReport", "compute_metrics", "mse"]


@dataclass(frozen=True, eq=False)
class EvaluationGrid:
    points: np.ndarray
    construction: str = "explicit"

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if self.construction == "affine-in-sample-stats" and np.any(np.diff(pts) <= 0):
            raise ValueError("affine grids must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def affine(cls, sample, lo=-4.0, hi=3.95, size=100):
        """``linspace(lo, hi, size) * sd + mean`` of the sample."""
        x = np.asarray(sample, dtype=float)
        sd = float(np.std(x, ddof=1))
        if not sd > 0:
            raise ValueError("sample has zero spread")
        return cls(np.linspace(lo, hi, size) * sd + x.mean(), "affine-in-sample-stats")

    @classmethod
    def explicit(cls, points):
        return cls(points, "explicit")

    def __len__(self):
        return self.points.size


@dataclass
class MetricsReport:
    """Coverage ``env``, L1 bias ``dev``, band width ``awd``, their relative
    versions ``rdev``/``rwd`` and a test ``mse`` (fields may be ``None``)."""

    env: float
    dev: float
    awd: float
    rdev: float | None = None
    rwd: float | None = None
    mse: float | None = None

    def as_dict(self):
        return asdict(self)


def compute_metrics(truth, summary) -> MetricsReport:
    """Pointwise comparison of a posterior summary with the truth on a grid.

    ``env`` is the share of grid points with ``q025 <= truth <= q975``;
    ``dev`` the mean ``|mean - truth|``; ``awd`` the mean of ``q975 - q025``.
    ``rdev`` and ``rwd`` divide by ``|truth|`` pointwise and are omitted
    when the truth vanishes somewhere.
    """
    th = np.asarray(truth, dtype=float).reshape(-1)
    mean = np.asarray(summary.mean, dtype=float).reshape(-1)
    lo = np.asarray(summary.q025, dtype=float).reshape(-1)
    hi = np.asarray(summary.q975, dtype=float).reshape(-1)
    if not (th.size == mean.size == lo.size == hi.size):
        raise ValueError("truth and summary must have the same length")
    cover = (lo <= th) & (th <= hi)
    width = hi - lo
    err = np.abs(mean - th)
    rdev = rwd = None
    if np.all(th != 0):
        rdev = float(np.mean(err / np.abs(th)))
        rwd = float(np.mean(width / np.abs(th)))
    return MetricsReport(float(cover.mean()), float(err.mean()), float(width.mean()), rdev, rwd)


def mse(test_pairs, fhat) -> float:
    """``(1/n_test) sum (y_i - fhat(x_i))^2``.

    ``test_pairs`` is a sequence of ``(y, x)`` or an ``(n, 1 + p)`` array with
    the response first; ``fhat`` is a callable on the covariates or an array
    of predictions.
    """
    arr = np.asarray(test_pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("test set must be a non-empty (n, 1 + p) array")
    y, x = arr[:, 0], arr[:, 1:]
    pred = fhat(x[:, 0] if x.shape[1] == 1 else x) if callable(fhat) else fhat
    pred = np.asarray(pred, dtype=float).reshape(-1)
    if pred.size != y.size:
        raise ValueError("one prediction per test pair is required")
    return float(np.mean((y - pred) ** 2))
