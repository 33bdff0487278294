"""Command-line entry point.

``acidpr <command> --config FILE [--data CSV] [--out DIR] [--seed N] [--threads N]``

Commands: ``resample``, ``diagnose``, ``simulate``, ``benchmark`` and
``bandwidth``.  Every run writes its artifacts into the output directory,
each through a temporary file and an atomic rename, followed by a
``manifest.json`` listing the configuration digest, seed, library versions
and the SHA-256 of every artifact.  Exit status is 0 on success, 2 for
configuration errors, 3 for data errors and 4 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import platform
import sys
import tempfile
from dataclasses import replace

import numpy as np
import scipy

from . import __version__
from .benchmark import density_benchmark, regression_benchmark
from .config import RunConfig, load_config, parse_config
from .dgm import dgm_mixture, regression_dataset
from .diagnostics import (
    DiagnosticsReport,
    acid_discrepancy_mc,
    bandwidth_condition_check,
    default_sets,
    mstep_convergence_diag,
    summability_check,
    xi_kernel_sequence,
    xi_parametric_sequence,
)
from .exceptions import AcidError, ConfigError, DataError, NumericalError
from .kernel_predictive import kp_init
from .kernels import KernelSpec, acid_constants
from .metrics import EvaluationGrid
from .parametric import (
    GaussianMeanState,
    ParametricState,
    gaussian_mean_step,
    make_model,
    natural_gradient_step,
)
from .resampling import (
    Functional,
    ResampleConfig,
    estimate_terminal_bandwidth,
    posterior_summary,
    predictive_resample,
    prepare_kernel,
    ENDPOINT_KEY,
    select_bandwidth,
)
from .sequences import BandwidthSchedule, StepSchedule, derive_stream

__all__ = ["main", "run", "read_data_csv"]

COMMANDS = ("resample", "diagnose", "simulate", "benchmark", "bandwidth")


# Input ----------------------------------------------------------------------


def read_data_csv(path):
    """Read ``x1..xp`` (density) or ``y,x1..xp`` (regression) columns.

    Returns ``(array, mode)`` where regression arrays hold ``y`` first.
    """
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as err:
        raise DataError(f"cannot read data file {path}: {err.strerror}") from None
    if not rows:
        raise DataError(f"data file {path} is empty")
    header = [h.strip() for h in rows[0]]
    p = len(header) - (1 if header and header[0] == "y" else 0)
    expected_x = [f"x{j}" for j in range(1, p + 1)]
    if header[0] == "y":
        mode, ok = "regression", header[1:] == expected_x and p >= 1
    else:
        mode, ok = "density", header == expected_x
    if not ok:
        raise DataError(f"data header must be x1..xp or y,x1..xp, got {','.join(header)}")
    body = [r for r in rows[1:] if r]
    try:
        arr = np.array([[float(v) for v in r] for r in body], dtype=float)
    except ValueError as err:
        raise DataError(f"non-numeric entry in {path}: {err}") from None
    if arr.size == 0 or arr.shape[1] != len(header):
        raise DataError(f"data file {path} has no complete rows")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"data file {path} contains non-finite values")
    return arr, mode


# Output ---------------------------------------------------------------------


def _atomic_write(directory, name, text):
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, os.path.join(directory, name))
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_artifacts(out_dir, files: dict, cfg: RunConfig, command: str):
    os.makedirs(out_dir, exist_ok=True)
    hashes = {}
    for name in sorted(files):
        text = files[name]
        _atomic_write(out_dir, name, text)
        hashes[name] = hashlib.sha256(text.encode("utf-8")).hexdigest()
    manifest = {
        "command": command,
        "config_sha256": cfg.digest,
        "config": cfg.canonical(),
        "seed": cfg["seed"],
        "versions": {
            "acidpr": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "files": hashes,
    }
    _atomic_write(out_dir, "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _csv_text(header, rows):
    out = [",".join(header)]
    for r in rows:
        out.append(",".join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v) for v in r))
    return "\n".join(out) + "\n"


# Scheme construction ----------------------------------------------------------


def _step(cfg):
    fam = cfg["eta.family"]
    if fam == "harmonic":
        return StepSchedule.harmonic(cfg["eta.a"])
    if fam == "power":
        return StepSchedule.power(cfg["eta.a"], cfg["eta.b"])
    if fam == "constant":
        return StepSchedule.constant(cfg["eta.c"])
    if not cfg["eta.values"]:
        raise ConfigError("eta.family = explicit-list needs eta.values")
    return StepSchedule.explicit(cfg["eta.values"])


def _grid(cfg, X, mode):
    kind = cfg["grid.kind"]
    if kind == "explicit":
        if not cfg["grid.points"]:
            raise ConfigError("grid.kind = explicit needs grid.points")
        return np.array(cfg["grid.points"])
    if kind == "linspace":
        return np.linspace(cfg["grid.lo"], cfg["grid.hi"], cfg["grid.size"])
    col = X[:, 1] if mode == "regression" else X[:, 0]
    return EvaluationGrid.affine(col, cfg["grid.lo"], cfg["grid.hi"], cfg["grid.size"]).points


def _functional(cfg, X, mode):
    kind = cfg["resample.functional"]
    if kind in ("regression-grid", "conditional-density") and mode != "regression":
        raise ConfigError(f"resample.functional = {kind} needs y,x1..xp data")
    if kind == "mean":
        return Functional.mean()
    if kind == "quantile":
        return Functional.quantile(cfg["resample.q"])
    if kind == "cdf-point":
        return Functional.cdf_point(cfg["resample.t"])
    if kind == "parameter":
        return Functional.parameter()
    grid = _grid(cfg, X, mode)
    if kind == "density-grid":
        return Functional.density_grid(grid)
    if kind == "regression-grid":
        return Functional.regression_grid(grid)
    if cfg["resample.x"] is None:
        raise ConfigError("conditional-density needs resample.x")
    return Functional.conditional_density(cfg["resample.x"], grid)


def _resample_config(cfg, func):
    try:
        return ResampleConfig(
            cfg["resample.M"],
            cfg["resample.B"],
            cfg["seed"],
            func,
            cfg["kernel.scale_c"],
            cfg["kernel.bandwidth"],
            cfg["kernel.endpoint_reps"],
            cfg["threads"],
        )
    except ValueError as err:
        raise ConfigError(str(err)) from None


def _build_scheme(cfg, X, rcfg):
    """Predictive state after the observed data, and the kernel schedule."""
    scheme = cfg["scheme"]
    root = derive_stream(cfg["seed"], 0)
    if scheme in ("kernel", "dirac"):
        shape = "dirac" if scheme == "dirac" else cfg["kernel.shape"]
        spec = KernelSpec(shape, X.shape[1])
        if cfg["kernel.h"] is not None and scheme == "kernel":
            h = cfg["kernel.h"] * cfg["kernel.scale_c"]
            sched = BandwidthSchedule.constant(h, X.shape[0], rcfg.M)
            return kp_init(X, h, spec), sched
        return prepare_kernel(X, spec, rcfg, root)
    step = _step(cfg)
    if scheme == "parametric":
        if X.shape[1] != 1:
            raise DataError("the parametric scheme is univariate")
        model = make_model(
            cfg["model.name"], sigma2=cfg["model.sigma2"], tau=cfg["model.tau"], nu=cfg["model.nu"]
        )
        theta0 = cfg["theta0"][0] if cfg["theta0"] else 0.0
        lo, hi = cfg["constraints.low"], cfg["constraints.high"]
        box = None
        if (lo is None) != (hi is None):
            raise ConfigError("constraints.low and constraints.high must be set together")
        if lo is not None:
            box = (lo, hi)
            theta0 = min(max(theta0, lo), hi)
        state = ParametricState(model, theta0, step, 0, box)
        for x in X[:, 0]:
            state = natural_gradient_step(state, x)
        return state, None
    p = X.shape[1]
    theta0 = np.array(cfg["theta0"]) if cfg["theta0"] else np.zeros(p)
    sig = np.array(cfg["sigma_diag"]) if cfg["sigma_diag"] else np.ones(p)
    if theta0.size != p or sig.size != p:
        raise ConfigError(f"theta0 and sigma_diag must have {p} entries")
    state = GaussianMeanState(theta0, sig, step, 0)
    for x in X:
        state = gaussian_mean_step(state, x)
    return state, None


# Commands -----------------------------------------------------------------------


def _load(cfg, data_path):
    path = data_path or cfg["data_in"]
    if not path:
        raise ConfigError("no data file given (use --data or data_in)")
    return read_data_csv(path)


def cmd_resample(cfg, data_path):
    X, mode = _load(cfg, data_path)
    func = _functional(cfg, X, mode)
    rcfg = _resample_config(cfg, func)
    state, sched = _build_scheme(cfg, X, rcfg)
    draws = predictive_resample(state, sched, rcfg, data=X, stream=derive_stream(cfg["seed"], 0))
    files = {"draws.csv": draws.to_csv()}
    if draws.B >= 2:
        files["summary.csv"] = posterior_summary(draws).to_csv()
    if sched is not None:
        files["schedule.csv"] = _csv_text(
            ["atom_index", "bandwidth"], [(i + 1, float(h)) for i, h in enumerate(sched.full)]
        )
    return files


def cmd_diagnose(cfg, data_path):
    X, mode = _load(cfg, data_path)
    rcfg = _resample_config(cfg, Functional.mean())
    state, sched = _build_scheme(cfg, X, rcfg)
    root = derive_stream(cfg["seed"], 3)
    rep = DiagnosticsReport()
    h_next = float(sched.forward_part[0]) if sched is not None else None
    sets = default_sets(state, cfg["diagnose.n_half"], cfg["diagnose.n_central"], stream=root.child(0))
    disc = acid_discrepancy_mc(
        state, sets, cfg["diagnose.K"], root.child(1), h_next=h_next, n_jobs=cfg["threads"]
    )
    rep.add("acid_discrepancy", disc.verdict, rows=disc.rows())
    N = cfg["diagnose.horizon"]
    if isinstance(state, (ParametricState, GaussianMeanState)):
        path = [replace(state, n=state.n + k) for k in range(N + 1)]
        xi = xi_parametric_sequence(path)
    elif sched is not None:
        const = acid_constants(state.kernel, cfg["kernel.laplace_c"])
        log_h = np.log(sched.full)
        n_max = min(N, log_h.size - 1)
        xi = xi_kernel_sequence(log_h, n_max, const, sched.decay_family)
        bc = bandwidth_condition_check(sched, const.epsilon, max(N, 1000))
        last = int(bc.n[-1])
        rep.add(
            "bandwidth_condition",
            bc.verdict,
            rows=[{
                "check": "bandwidth_condition", "verdict": bc.verdict, "n": last,
                "set_id": None, "estimate": float(bc.c_n[-1]), "se": 0.0, "xi_n": None,
            }],
        )
    else:
        xi = None
    if xi is not None and xi.N >= 100:
        verdict, ev = summability_check(xi)
        rep.add(
            "summability",
            verdict,
            ev,
            rows=[{
                "check": "summability", "verdict": verdict, "n": xi.N, "set_id": None,
                "estimate": ev["partial_sum"], "se": 0.0, "xi_n": ev["xi_N"],
            }],
        )
    if state.p == 1:
        if "diagnose.checkpoints" in cfg.values:
            cps = list(cfg["diagnose.checkpoints"])
        else:
            cps = [rcfg.M // 2, rcfg.M]
        if sched is not None and max(cps) > sched.M:
            raise ConfigError("diagnose.checkpoints exceed resample.M")
        ms = mstep_convergence_diag(
            state, [0, *cps] if cps[0] > 0 else cps, root.child(2),
            bandwidths=sched, threshold=cfg["diagnose.threshold"],
        )
        rep.add("mstep_convergence", ms.verdict, rows=ms.rows())
    return {"diagnostics.jsonl": rep.to_json_lines()}


def cmd_simulate(cfg, data_path):
    files = {}
    for j in range(cfg["simulate.datasets"]):
        stream = derive_stream(cfg["seed"], 1).child(j)
        if cfg["simulate.kind"] == "mixture-density":
            rng = stream.generator()
            _, sampler, spec = dgm_mixture(rng)
            x = sampler(rng, cfg["simulate.n"])
            files[f"dataset_{j:03d}.csv"] = _csv_text(["x1"], [(float(v),) for v in x])
        else:
            ds = regression_dataset(stream, cfg["simulate.variant"], cfg["simulate.n"], form=cfg["simulate.gp_form"])
            spec = ds.spec
            files[f"dataset_{j:03d}.csv"] = _csv_text(
                ["y", "x1"], zip(map(float, ds.y_train), map(float, ds.x_train))
            )
            files[f"dataset_{j:03d}_test.csv"] = _csv_text(
                ["y", "x1", "f"], zip(map(float, ds.y_test), map(float, ds.x_test), map(float, ds.f_test))
            )
        files[f"dataset_{j:03d}.json"] = json.dumps(spec.to_json(), indent=2, sort_keys=True) + "\n"
    return files


def cmd_benchmark(cfg, data_path):
    common = dict(
        n_datasets=cfg["benchmark.datasets"],
        kernel=cfg["kernel.shape"],
        method=cfg["kernel.bandwidth"],
        M=cfg["resample.M"],
        B=cfg["resample.B"],
        seed=cfg["seed"],
        scale_c=cfg["kernel.scale_c"],
        n_jobs=cfg["threads"],
    )
    if cfg["benchmark.kind"] == "density":
        res = density_benchmark(n=cfg["benchmark.n"], **common)
    else:
        res = regression_benchmark(
            cfg["simulate.variant"], n_train=cfg["benchmark.n"], form=cfg["simulate.gp_form"], **common
        )
    names = ("env", "dev", "awd", "rdev", "rwd", "mse")
    per = [
        [j, *("" if getattr(r, k) is None else float(getattr(r, k)) for k in names)]
        for j, r in enumerate(res.reports)
    ]
    med = res.medians()
    return {
        "benchmark_metrics.csv": _csv_text(["dataset", *names], per),
        "benchmark_medians.csv": _csv_text(["metric", "median"], [(k, float(med[k])) for k in names]),
    }


def cmd_bandwidth(cfg, data_path):
    X, mode = _load(cfg, data_path)
    spec = KernelSpec(cfg["kernel.shape"], X.shape[1])
    method = cfg["kernel.bandwidth"]
    M = cfg["resample.M"]
    h_n = select_bandwidth(X, method, spec)
    h_t = estimate_terminal_bandwidth(
        X, M, method, cfg["kernel.endpoint_reps"], derive_stream(cfg["seed"], 0).child(ENDPOINT_KEY), spec
    )
    b2 = float(np.log(h_n / h_t) / M)
    return {
        "bandwidth.csv": _csv_text(
            ["method", "kernel", "n", "M", "h_n", "h_terminal", "b2"],
            [(method, spec.shape, X.shape[0], M, float(h_n), float(h_t), b2)],
        )
    }


_DISPATCH = {
    "resample": cmd_resample,
    "diagnose": cmd_diagnose,
    "simulate": cmd_simulate,
    "benchmark": cmd_benchmark,
    "bandwidth": cmd_bandwidth,
}


def run(command, cfg: RunConfig, data_path=None, out_dir=None):
    """Execute one command and write its artifacts; returns the file map."""
    if cfg["command"] is not None and cfg["command"] != command:
        raise ConfigError(f"configuration is for {cfg['command']!r}, not {command!r}")
    out = out_dir or cfg["out_dir"]
    if not out:
        raise ConfigError("no output directory given (use --out or out_dir)")
    if cfg["threads"] < 1:
        raise ConfigError("threads must be >= 1")
    files = _DISPATCH[command](cfg, data_path)
    _write_artifacts(out, files, cfg, command)
    return files


def _parser():
    ap = argparse.ArgumentParser(prog="acidpr", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="key = value configuration file")
    ap.add_argument("--data", help="input CSV (x1..xp or y,x1..xp)")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--seed", type=int, help="master seed (overrides the config)")
    ap.add_argument("--threads", type=int, help="worker threads (overrides the config)")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else parse_config("")
        cfg = cfg.with_overrides(seed=args.seed, threads=args.threads)
        run(args.command, cfg, args.data, args.out)
    except ConfigError as err:
        print(f"acidpr: configuration error: {err}", file=sys.stderr)
        return 2
    except DataError as err:
        print(f"acidpr: data error: {err}", file=sys.stderr)
        return 3
    except NumericalError as err:
        print(f"acidpr: numerical error: {err}", file=sys.stderr)
        return 4
    except (AcidError, ValueError) as err:
        print(f"acidpr: invalid run: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
