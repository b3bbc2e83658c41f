"""Command-line front end.

``nhito run CONFIG`` executes one experiment described by a YAML/JSON
document, ``nhito catalog`` lists the built-in models and ``nhito emit``
turns a saved report into plot-ready files.

Exit codes: 0 success, 2 parse/config error, 3 hypothesis violation,
4 numerical failure, 5 I/O error.
"""

import argparse
import json
import os
import platform
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import catalog as cat
from .errors import HypothesisViolation, ModelParseError, NumericalFailure
from .estimate import EstimatorConfig, estimate_sweep
from .indices import R_LARGE, R_SMALL, compute_indices
from .reporting import csv_text, dumps_json, emit_plot_data, plain, plot_tables, report_to_dict
from .specio import model_from_dict, model_to_dict
from .symbol import symbol_analytic, symbol_values
from .verify import (
    T_GRID_LARGE,
    T_GRID_SMALL,
    asymptotic_scaling,
    check_max_inequality_lower,
    check_max_inequality_upper,
    exponential_moment_check,
    flip_location,
    p_variation,
)

OUTPUT_ENV = "NHITO_OUTPUT_ROOT"
EXIT_OK, EXIT_PARSE, EXIT_HYPOTHESIS, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4, 5

TASKS = {
    "symbol-sweep": ("tau", "xi"),
    "estimate-sweep": ("n_paths", "xi"),
    "indices": (),
    "verify-max-inequality": ("t_grid", "radii", "n_paths"),
    "verify-scaling": ("lambda", "direction", "n_paths"),
    "verify-pvariation": ("p", "n_paths"),
    "verify-expmoment": ("xi", "t", "n_paths"),
}


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


def _grid(value, path):
    """A list of numbers, or ``{start, stop, num[, spacing]}``."""
    if isinstance(value, dict):
        try:
            start, stop, num = float(value["start"]), float(value["stop"]), int(value["num"])
        except (KeyError, TypeError, ValueError):
            raise ModelParseError(path, "grid mapping needs numeric start, stop and num") from None
        if value.get("spacing", "linear") == "geometric":
            return np.geomspace(start, stop, num)
        return np.linspace(start, stop, num)
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ModelParseError(path, "expected a number or a list of numbers") from None
    return np.atleast_1d(arr)


def _vectors(value, d, path):
    """Frequencies or states: scalars (d = 1), a list of scalars or a list of vectors."""
    arr = _grid(value, path) if isinstance(value, dict) else None
    if arr is None:
        try:
            arr = np.asarray(value, dtype=float)
        except (TypeError, ValueError):
            raise ModelParseError(path, "expected numbers or vectors") from None
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr[:, None] if d == 1 else arr[None, :]
    if arr.shape[-1] != d:
        raise ModelParseError(path, f"vectors must have length {d}")
    return arr


def _load_model(ref, base_dir):
    if isinstance(ref, str):
        path = Path(ref)
        if not path.is_absolute():
            path = base_dir / path
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ModelParseError("model", f"cannot read model file: {exc}") from None
        try:
            ref = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ModelParseError("model", f"invalid model file: {exc}") from None
    if not isinstance(ref, dict):
        raise ModelParseError("model", "expected an inline model, a file path or a catalog reference")
    if set(ref) <= {"catalog", "params"} and isinstance(ref.get("catalog"), str):
        params = ref.get("params") or {}
        try:
            return cat.build_from_tag(ref["catalog"], **params)
        except KeyError:
            raise ModelParseError("model.catalog", f"unknown family {ref['catalog']!r}") from None
        except (TypeError, ValueError) as exc:
            raise ModelParseError("model.params", str(exc)) from None
    try:
        return model_from_dict(ref)
    except ModelParseError as exc:
        raise ModelParseError(f"model.{exc.path}" if exc.path else "model", exc.message) from None


def load_config(path):
    """Parse and validate an experiment document; returns ``(config, model)``."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelParseError("", f"cannot read config: {exc}") from None
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ModelParseError("", f"invalid config document: {exc}") from None
    if not isinstance(cfg, dict):
        raise ModelParseError("", "config must be a mapping")
    for key in ("model", "task", "seed"):
        if key not in cfg:
            raise ModelParseError(key, "missing required parameter")
    task = cfg["task"]
    if task not in TASKS:
        raise ModelParseError("task", f"unknown task {task!r}")
    seed = cfg["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ModelParseError("seed", "seed must be an explicit 64-bit unsigned integer")
    params = cfg.get("params") or {}
    if not isinstance(params, dict):
        raise ModelParseError("params", "expected a mapping")
    for key in TASKS[task]:
        if key not in params:
            raise ModelParseError(f"params.{key}", "missing required parameter")
    model = _load_model(cfg["model"], path.parent)
    return cfg, model


# --------------------------------------------------------------------------
# tasks; each returns (tables, summary)
# --------------------------------------------------------------------------


def _start(params, model):
    x = _vectors(params.get("x", [0.0] * model.dimension), model.dimension, "params.x")[0]
    return float(params.get("tau", 0.0)), x


def _task_symbol_sweep(model, params, seed):
    taus = _grid(params["tau"], "params.tau")
    xis = _vectors(params["xi"], model.dimension, "params.xi")
    x = _vectors(params.get("x", [0.0] * model.dimension), model.dimension, "params.x")[0]
    method = params.get("method", "closed")
    if method not in ("closed", "quadrature"):
        raise ModelParseError("params.method", "must be closed or quadrature")
    rows = []
    for tau in taus:
        if method == "closed":
            vals = symbol_values(model, tau, x, xis)
        else:
            vals = [symbol_analytic(model, tau, x, xi, method="quadrature").value for xi in xis]
        for xi, p in zip(xis, vals):
            rows.append((tau, *x, *xi, p.real, p.imag))
    d = model.dimension
    header = ["tau", *[f"x{i}" for i in range(d)], *[f"xi{i}" for i in range(d)], "re_p", "im_p"]
    return {"symbol": (header, rows)}, {"type": "table", "header": header, "rows": rows, "n_rows": len(rows)}


def _task_estimate_sweep(model, params, seed):
    d = model.dimension
    n = params["n_paths"]
    if isinstance(n, bool) or not isinstance(n, int):
        raise ModelParseError("params.n_paths", "must be an integer")
    try:
        ecfg = EstimatorConfig(
            radius=float(params.get("radius", 1.0)),
            lags=tuple(_grid(params.get("lags", (4e-3, 2e-3, 1e-3)), "params.lags")),
            n_paths=n,
            extrapolation=params.get("extrapolation", "richardson-2point"),
            seed=seed,
        )
    except ValueError as exc:
        raise ModelParseError("params", str(exc)) from None
    taus = _grid(params.get("tau", 0.0), "params.tau")
    states = _vectors(params.get("x", [0.0] * d), d, "params.x")
    xis = _vectors(params["xi"], d, "params.xi")
    points = [(tau, x) for tau in taus for x in states]
    raw = estimate_sweep(model, points, xis, ecfg)
    rows = [(tau, *x, *xi, h, re, im, r, ef) for tau, x, xi, h, re, im, r, ef in raw]
    header = ["tau", *[f"x{i}" for i in range(d)], *[f"xi{i}" for i in range(d)], "h", "re_p", "im_p",
              "confidence_radius", "exited_fraction"]
    return {"estimates": (header, rows)}, {"type": "table", "header": header, "rows": rows, "n_rows": len(rows)}


def _task_indices(model, params, seed):
    tau, x = _start(params, model)
    r_small = _grid(params.get("R_small", R_SMALL), "params.R_small")
    r_large = _grid(params.get("R_large", R_LARGE), "params.R_large")
    report = report_to_dict(compute_indices(model, tau, x, R_small=r_small, R_large=r_large))
    return plot_tables(plain(report)), report


def _task_max_inequality(model, params, seed):
    tau, x = _start(params, model)
    side = params.get("side", "upper")
    t_grid = _grid(params["t_grid"], "params.t_grid")
    radii = _grid(params["radii"], "params.radii")
    common = dict(seed=seed, steps_per_min_lag=int(params.get("steps_per_min_lag", 64)))
    if side == "upper":
        rep = check_max_inequality_upper(model, tau, x, t_grid, radii, int(params["n_paths"]), params.get("constant"), **common)
    elif side == "lower":
        rep = check_max_inequality_lower(model, tau, x, t_grid, radii, int(params["n_paths"]), params.get("constant"), **common)
    else:
        raise ModelParseError("params.side", "must be upper or lower")
    report = report_to_dict(rep)
    return plot_tables(plain(report)), report


def _task_scaling(model, params, seed):
    tau, x = _start(params, model)
    direction = params["direction"]
    if direction not in ("t->0", "t->inf"):
        raise ModelParseError("params.direction", "must be t->0 or t->inf")
    default = T_GRID_SMALL if direction == "t->0" else T_GRID_LARGE
    t_grid = _grid(params.get("t_grid", default), "params.t_grid")
    lams = _grid(params["lambda"], "params.lambda")
    reports = [
        report_to_dict(asymptotic_scaling(model, tau, x, lam, direction, t_grid, int(params["n_paths"]), seed, i))
        for i, lam in enumerate(lams)
    ]
    summary = {"type": "scaling-set", "reports": reports}
    return plot_tables(plain(summary)), summary


def _task_pvariation(model, params, seed):
    tau, x = _start(params, model)
    ps = _grid(params["p"], "params.p")
    reps = p_variation(
        model, tau, x, list(ps), K=int(params.get("K", 14)), n_paths=int(params["n_paths"]),
        horizon=float(params.get("horizon", 1.0)), seed=seed,
    )
    summary = {"type": "pvariation-scan", "reports": [report_to_dict(r) for r in reps], "flip": flip_location(reps)}
    return plot_tables(plain(summary)), summary


def _task_expmoment(model, params, seed):
    tau, x = _start(params, model)
    xi = _vectors(params["xi"], model.dimension, "params.xi")[0]
    rep = exponential_moment_check(model, tau, x, xi, float(params["t"]), int(params["n_paths"]), seed=seed)
    report = report_to_dict(rep)
    return plot_tables(plain(report)), report


RUNNERS = {
    "symbol-sweep": _task_symbol_sweep,
    "estimate-sweep": _task_estimate_sweep,
    "indices": _task_indices,
    "verify-max-inequality": _task_max_inequality,
    "verify-scaling": _task_scaling,
    "verify-pvariation": _task_pvariation,
    "verify-expmoment": _task_expmoment,
}


def _versions():
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__, "package": pkg}


def output_dir(cfg, override=None):
    if override:
        return Path(override)
    root = Path(os.environ.get(OUTPUT_ENV, "nhito-output"))
    sub = cfg.get("output") or cfg.get("name") or cfg["task"]
    return Path(sub) if Path(sub).is_absolute() else root / sub


def run_experiment(config_path, out=None):
    """Run one experiment; returns ``(exit status, output directory or None)``.

    Parse errors are detected before anything is written.
    """
    try:
        cfg, model = load_config(config_path)
    except ModelParseError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_PARSE, None
    target = output_dir(cfg, out)
    start = time.perf_counter()
    try:
        tables, summary = RUNNERS[cfg["task"]](model, cfg.get("params") or {}, cfg["seed"])
    except ModelParseError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_PARSE, None
    except HypothesisViolation as exc:
        print(f"hypothesis violated: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS, None
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL, None
    except ValueError as exc:
        # remaining value errors come from inconsistent task parameters
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_PARSE, None
    wall = time.perf_counter() - start
    manifest = {
        "config": cfg,
        "model": model_to_dict(model),
        "model_hash": model.hash(),
        "versions": _versions(),
        "wall_time_seconds": wall,
    }
    try:
        target.mkdir(parents=True, exist_ok=True)
        for name, (header, rows) in tables.items():
            (target / f"{name}.csv").write_text(csv_text(header, rows), encoding="utf-8")
        summary = dict(summary, model_hash=model.hash(), seed=cfg["seed"], task=cfg["task"])
        (target / "summary.json").write_text(dumps_json(summary), encoding="utf-8")
        (target / "manifest.json").write_text(dumps_json(manifest), encoding="utf-8")
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO, None
    return EXIT_OK, target


# --------------------------------------------------------------------------
# catalog
# --------------------------------------------------------------------------

CATALOG_INFO = {
    "additive-bm": ("1/2 xi^2 d+sigma2(tau)", "beta0 = beta_inf = delta0 = delta_inf = 2", ""),
    "pure-drift": ("-i l xi", "beta0 = beta_inf = 1; delta undefined (sector violated)", ""),
    "alpha-stable-levy": ("gamma^alpha |xi|^alpha", "beta_inf = beta0 = delta_inf = delta0 = alpha", ""),
    "compound-poisson": ("lambda (1 - cos(a xi))", "beta_inf = 0, beta0 = 2", ""),
    "jump-diffusion": (
        "i xi x/2 + 1/2 q(s) xi^2 + lambda(s)(1 - E e^{i xi J} + i xi E[J chi(J)])",
        "beta_inf = 2, beta0 = 1 (drift dominates)",
        "",
    ),
    "det-jump-unit": ("0", "none", "symbol ≡ 0, uninformative"),
}


def list_catalog():
    """Rows ``(tag, symbol, known indices, note)`` for every catalog model."""
    rows = []
    for tag, model in cat.catalog_models().items():
        sym, idx, note = CATALOG_INFO[tag]
        if tag == "alpha-stable-levy":
            a = model.jumps.alpha
            idx = f"beta_inf = beta0 = delta_inf = delta0 = alpha = {a:g}"
        rows.append((tag, sym, idx, note))
    return rows


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def _parser():
    ap = argparse.ArgumentParser(prog="nhito", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config")
    run.add_argument("--output", help=f"output directory (default: ${OUTPUT_ENV}/<name>)")
    sub.add_parser("catalog", help="list built-in models")
    emit = sub.add_parser("emit", help="write plot-ready files from a summary.json")
    emit.add_argument("report")
    emit.add_argument("--format", choices=("csv", "json-lines"), default="csv")
    emit.add_argument("--output", help="target directory (default: next to the report)")
    return ap


def main(argv=None):
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    if args.command == "run":
        status, target = run_experiment(args.config, args.output)
        if status == EXIT_OK:
            print(target)
        return status
    if args.command == "catalog":
        for tag, sym, idx, note in list_catalog():
            line = f"{tag:18s} p = {sym:40s} {idx}"
            print(line + (f"  [{note}]" if note else ""))
        return EXIT_OK
    path = Path(args.report)
    try:
        report = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"invalid report: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        written = emit_plot_data(report, args.format, args.output or path.parent, stem=path.stem)
    except (KeyError, ValueError) as exc:
        print(f"invalid report: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    for p in written:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
