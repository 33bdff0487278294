"""Flat, typed ``key = value`` run configuration.

Grammar
-------
* one ``key = value`` pair per line; keys are dotted names such as
  ``resample.M``;
* ``#`` starts a comment that runs to the end of the line; blank lines are
  ignored;
* values are parsed by the schema type of the key: ``int``, ``float``,
  ``str``, ``bool`` (``true``/``false``), or comma-separated lists of ints or
  floats;
* unknown keys, repeated keys and values that fail to parse are errors.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .exceptions import ConfigError

__all__ = ["SCHEMA", "RunConfig", "parse_config", "load_config"]


def _choice(*opts):
    return ("choice", opts)


# key -> (type, default)
SCHEMA = {
    "command": (_choice("resample", "diagnose", "simulate", "benchmark", "bandwidth"), None),
    "scheme": (_choice("kernel", "parametric", "gaussian-mean", "dirac"), "kernel"),
    "seed": ("int", 0),
    "threads": ("int", 1),
    "data_in": ("str", None),
    "out_dir": ("str", None),
    "kernel.shape": (_choice("gaussian", "uniform", "laplace"), "gaussian"),
    "kernel.bandwidth": (_choice("silverman", "scott", "lscv"), "scott"),
    "kernel.h": ("float", None),
    "kernel.scale_c": ("float", 1.0),
    "kernel.endpoint_reps": ("int", 10),
    "kernel.laplace_c": ("float", 1.0),
    "model.name": (_choice("gaussian-location", "student-t-location"), "gaussian-location"),
    "model.sigma2": ("float", 1.0),
    "model.tau": ("float", 1.0),
    "model.nu": ("float", 3.0),
    "theta0": ("floats", None),
    "sigma_diag": ("floats", None),
    "constraints.low": ("float", None),
    "constraints.high": ("float", None),
    "eta.family": (_choice("harmonic", "power", "constant", "explicit-list"), "harmonic"),
    "eta.a": ("float", 1.0),
    "eta.b": ("float", 1.0),
    "eta.c": ("float", 0.1),
    "eta.values": ("floats", None),
    "resample.M": ("int", 1000),
    "resample.B": ("int", 200),
    "resample.functional": (
        _choice(
            "mean", "quantile", "density-grid", "cdf-point",
            "regression-grid", "conditional-density", "parameter",
        ),
        "density-grid",
    ),
    "resample.q": ("float", 0.5),
    "resample.t": ("float", 0.0),
    "resample.x": ("floats", None),
    "grid.kind": (_choice("affine", "linspace", "explicit"), "affine"),
    "grid.lo": ("float", -4.0),
    "grid.hi": ("float", 3.95),
    "grid.size": ("int", 100),
    "grid.points": ("floats", None),
    "diagnose.K": ("int", 10_000),
    "diagnose.n_half": ("int", 20),
    "diagnose.n_central": ("int", 10),
    "diagnose.horizon": ("int", 10_000),
    "diagnose.checkpoints": ("ints", None),
    "diagnose.threshold": ("float", 0.05),
    "simulate.kind": (_choice("mixture-density", "gp-regression"), "mixture-density"),
    "simulate.variant": (_choice("dgm1", "dgm2", "dgm3"), "dgm1"),
    "simulate.gp_form": (_choice("gaussian", "exponential"), "gaussian"),
    "simulate.n": ("int", 200),
    "simulate.datasets": ("int", 1),
    "benchmark.kind": (_choice("density", "regression"), "density"),
    "benchmark.datasets": ("int", 20),
    "benchmark.n": ("int", 200),
}


def _parse_value(key, typ, raw):
    try:
        if isinstance(typ, tuple):
            if raw not in typ[1]:
                raise ValueError(f"must be one of {', '.join(typ[1])}")
            return raw
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        if typ == "str":
            return raw
        if typ == "bool":
            if raw.lower() not in ("true", "false"):
                raise ValueError("must be true or false")
            return raw.lower() == "true"
        if typ == "floats":
            return tuple(float(v) for v in raw.split(",") if v.strip())
        if typ == "ints":
            return tuple(int(v) for v in raw.split(",") if v.strip())
    except ValueError as err:
        raise ConfigError(f"invalid value for {key!r}: {raw!r} ({err})") from None
    raise AssertionError(typ)


@dataclass(frozen=True)
class RunConfig:
    """Parsed configuration: explicit values layered over schema defaults."""

    values: dict
    explicit: tuple

    def __getitem__(self, key):
        if key not in SCHEMA:
            raise KeyError(key)
        return self.values.get(key, SCHEMA[key][1])

    def get(self, key, default=None):
        v = self[key]
        return default if v is None else v

    def with_overrides(self, **kv):
        vals = dict(self.values)
        for k, v in kv.items():
            key = k.replace("__", ".")
            if key not in SCHEMA:
                raise ConfigError(f"unknown configuration key {key!r}")
            if v is not None:
                vals[key] = v
        return RunConfig(vals, tuple(sorted(set(self.explicit) | set(vals))))

    def canonical(self) -> str:
        """Sorted ``key = value`` text of every explicitly set key."""
        lines = []
        for k in sorted(self.values):
            v = self.values[k]
            if isinstance(v, tuple):
                v = ",".join(repr(x) for x in v)
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def parse_config(text: str) -> RunConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"unknown configuration key {key!r} (line {lineno})")
        if key in values:
            raise ConfigError(f"configuration key {key!r} repeated (line {lineno})")
        values[key] = _parse_value(key, SCHEMA[key][0], raw)
    return RunConfig(values, tuple(sorted(values)))


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read configuration file {path}: {err.strerror}") from None
    return parse_config(text)
