"""Random streams and the deterministic step-size / bandwidth schedules.

Every random draw in the package flows through a :class:`RandomStream`, an
immutable descriptor keyed by ``(master_seed, stream_id, *path)``.  Streams
are built on :class:`numpy.random.SeedSequence` spawn keys, so two distinct
keys never share generator state and replaying a key reproduces all draws
bit-for-bit, whatever the thread count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RandomStream",
    "derive_stream",
    "as_generator",
    "StepSchedule",
    "eta_at",
    "BandwidthSchedule",
]

_MAX_SEED = 2**64


@dataclass(frozen=True)
class RandomStream:
    """Immutable key for a reproducible stream of random draws.

    Call :meth:`generator` to obtain a fresh draw cursor positioned at the
    start of the stream.  Cursors are single-owner; the descriptor itself can
    be shared freely.
    """

    master_seed: int
    stream_id: int = 0
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < _MAX_SEED:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if int(self.stream_id) < 0 or any(int(k) < 0 for k in self.path):
            raise ValueError("stream ids must be non-negative")

    @property
    def spawn_key(self) -> tuple[int, ...]:
        return (int(self.stream_id), *map(int, self.path))

    def child(self, key: int) -> "RandomStream":
        """Independent sub-stream; ``child(k)`` never overlaps its parent."""
        return RandomStream(self.master_seed, self.stream_id, (*self.path, int(key)))

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(int(self.master_seed), spawn_key=self.spawn_key)

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed_sequence()))


def derive_stream(master_seed: int, stream_id: int) -> RandomStream:
    """Return the stream for replicate ``stream_id`` under ``master_seed``."""
    return RandomStream(int(master_seed), int(stream_id))


def as_generator(stream) -> np.random.Generator:
    """Accept a RandomStream, a Generator, an int seed or None."""
    if isinstance(stream, RandomStream):
        return stream.generator()
    if isinstance(stream, np.random.Generator):
        return stream
    if stream is None or isinstance(stream, (int, np.integer)):
        return np.random.default_rng(stream)
    raise TypeError(f"cannot build a generator from {type(stream).__name__}")


_STEP_FAMILIES = ("harmonic", "power", "constant", "explicit-list")


@dataclass(frozen=True)
class StepSchedule:
    """Step sizes ``eta_n`` for recursive parameter updates.

    Families
    --------
    harmonic
        ``eta_n = a / n`` (``params = (a,)``, default ``a = 1``).
    power
        ``eta_n = a * n**(-b)`` (``params = (a, b)``).
    constant
        ``eta_n = c`` (``params = (c,)``).
    explicit-list
        ``eta_n = params[n - 1]``.
    """

    family: str
    params: tuple[float, ...] = ()

    def __post_init__(self):
        if self.family not in _STEP_FAMILIES:
            raise ValueError(f"unknown step family {self.family!r}")
        params = tuple(float(p) for p in self.params)
        if self.family == "harmonic" and not params:
            params = (1.0,)
        object.__setattr__(self, "params", params)
        if self.family == "harmonic" and (len(params) != 1 or params[0] <= 0):
            raise ValueError("harmonic schedule takes one positive scale")
        if self.family == "power":
            if len(params) != 2 or params[0] <= 0 or params[1] <= 0:
                raise ValueError("power schedule takes (a > 0, b > 0)")
        if self.family == "constant" and (len(params) != 1 or params[0] < 0):
            raise ValueError("constant schedule takes one non-negative value")
        if self.family == "explicit-list":
            if not params or min(params) < 0:
                raise ValueError("explicit-list needs non-negative entries")

    @classmethod
    def harmonic(cls, a=1.0):
        return cls("harmonic", (a,))

    @classmethod
    def power(cls, a, b):
        return cls("power", (a, b))

    @classmethod
    def constant(cls, c):
        return cls("constant", (c,))

    @classmethod
    def explicit(cls, values):
        return cls("explicit-list", tuple(values))

    @property
    def square_summable_flag(self) -> bool:
        if self.family == "harmonic":
            return True
        if self.family == "power":
            return self.params[1] > 0.5
        return False

    def __call__(self, n):
        return eta_at(self, n)

    def values(self, n_max: int) -> np.ndarray:
        """Vector ``eta_1, ..., eta_{n_max}``."""
        n = np.arange(1, n_max + 1, dtype=float)
        if self.family == "harmonic":
            return self.params[0] / n
        if self.family == "power":
            return self.params[0] * n ** (-self.params[1])
        if self.family == "constant":
            return np.full(n_max, self.params[0])
        if n_max > len(self.params):
            raise IndexError(f"explicit schedule has only {len(self.params)} entries")
        return np.asarray(self.params[:n_max])


def eta_at(schedule: StepSchedule, n: int) -> float:
    """Step size ``eta_n`` for ``n >= 1``."""
    if int(n) != n or n < 1:
        raise ValueError(f"step index must be a positive integer, got {n!r}")
    n = int(n)
    fam, par = schedule.family, schedule.params
    if fam == "harmonic":
        return par[0] / n
    if fam == "power":
        return par[0] * n ** (-par[1])
    if fam == "constant":
        return par[0]
    if n > len(par):
        raise IndexError(f"explicit schedule has only {len(par)} entries")
    return par[n - 1]


_BW_FAMILIES = ("exponential", "polynomial", "constant", "explicit-list")


@dataclass(frozen=True)
class BandwidthSchedule:
    """Per-atom bandwidths ``h_1, ..., h_{n+M}``.

    ``observed_part`` holds the bandwidths of the ``n`` observed points (all
    equal to the selected ``h_n``), ``forward_part`` those of the ``M``
    synthetic points.  Both are stored already multiplied by ``scale_c``.
    ``params`` records the family parameters: ``(b1, b2)`` for exponential,
    ``(b1, b)`` for polynomial and ``(b1,)`` for constant.
    """

    observed_part: np.ndarray
    forward_part: np.ndarray
    decay_family: str = "explicit-list"
    scale_c: float = 1.0
    params: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.decay_family not in _BW_FAMILIES:
            raise ValueError(f"unknown bandwidth family {self.decay_family!r}")
        obs = np.array(self.observed_part, dtype=float).reshape(-1)
        fwd = np.array(self.forward_part, dtype=float).reshape(-1)
        if np.any(obs <= 0) or np.any(fwd <= 0) or not (
            np.all(np.isfinite(obs)) and np.all(np.isfinite(fwd))
        ):
            raise ValueError("bandwidths must be finite and strictly positive")
        if self.scale_c <= 0:
            raise ValueError("scale_c must be positive")
        obs.setflags(write=False)
        fwd.setflags(write=False)
        object.__setattr__(self, "observed_part", obs)
        object.__setattr__(self, "forward_part", fwd)
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    @classmethod
    def exponential(cls, b1, b2, n_obs, M, scale_c=1.0):
        """``h_{n+i} = c * b1 * exp(-b2 * i)`` with ``n_obs`` leading ``c * b1``."""
        i = np.arange(1, M + 1, dtype=float)
        return cls(
            np.full(n_obs, scale_c * b1),
            scale_c * (b1 * np.exp(-b2 * i)),
            "exponential",
            scale_c,
            (b1, b2),
        )

    @classmethod
    def polynomial(cls, b1, b, n_obs, M, scale_c=1.0):
        """``h_{n+i} = c * b1 * i**(-b)``."""
        i = np.arange(1, M + 1, dtype=float)
        return cls(
            np.full(n_obs, scale_c * b1),
            scale_c * b1 * i ** (-b),
            "polynomial",
            scale_c,
            (b1, b),
        )

    @classmethod
    def constant(cls, b1, n_obs, M, scale_c=1.0):
        return cls(
            np.full(n_obs, scale_c * b1),
            np.full(M, scale_c * b1),
            "constant",
            scale_c,
            (b1,),
        )

    @classmethod
    def explicit(cls, observed, forward, scale_c=1.0):
        return cls(
            scale_c * np.asarray(observed, dtype=float),
            scale_c * np.asarray(forward, dtype=float),
            "explicit-list",
            scale_c,
        )

    @property
    def n_obs(self) -> int:
        return self.observed_part.size

    @property
    def M(self) -> int:
        return self.forward_part.size

    @property
    def full(self) -> np.ndarray:
        return np.concatenate([self.observed_part, self.forward_part])

    def h(self, i: int) -> float:
        """Bandwidth of atom ``i`` (1-based over observed then forward)."""
        if i < 1 or i > self.n_obs + self.M:
            raise IndexError(f"bandwidth index {i} outside 1..{self.n_obs + self.M}")
        if i <= self.n_obs:
            return float(self.observed_part[i - 1])
        return float(self.forward_part[i - self.n_obs - 1])

    @property
    def decay_rate(self) -> float:
        """Exponential rate ``b2`` (0 for non-exponential families)."""
        if self.decay_family == "exponential":
            return self.params[1]
        return 0.0

    @property
    def is_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.full) <= 0))

