"""Serialization of reports and plot-ready data files.

All writers are deterministic: floats use Python's shortest round-trip
representation, keys are sorted and rows keep their computed order.
"""

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .indices import IndexReport
from .verify import ExpMomentReport, InequalityReport, PVariationReport, ScalingReport


def plain(obj):
    """Convert numpy containers and scalars to JSON-compatible Python objects."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def dumps_json(obj):
    return json.dumps(plain(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def report_to_dict(report):
    """Tagged dictionary form of any report type."""
    if isinstance(report, IndexReport):
        fits = {
            name: {
                "direction": f.direction,
                "R": f.R,
                "values": f.values,
                "exponent": f.exponent,
                "residual": f.residual,
                "window_exponents": f.window_exponents,
                "window_centers": f.window_centers,
            }
            for name, f in report.fits.items()
        }
        return {
            "type": "index",
            "tau": report.tau,
            "x": report.x,
            "kappa": report.kappa,
            "R_small": report.R_small,
            "R_large": report.R_large,
            "at_start": report.at_start,
            "at_infinity": report.at_infinity,
            "fits": fits,
            "grid_doubling": report.grid_doubling,
            "ordering_holds": report.check_ordering(),
            "notes": report.notes,
        }
    if isinstance(report, InequalityReport):
        cells = [
            {
                "t": c.t,
                "R": c.R,
                "lhs": c.lhs,
                "lhs_radius": c.lhs_radius,
                "functional": c.functional,
                "rhs": c.rhs,
                "constant": c.constant,
                "margin": c.margin,
                "passed": c.passed,
            }
            for c in report.cells
        ]
        return {
            "type": "inequality",
            "kind": report.kind,
            "model_hash": report.model_hash,
            "seed": report.seed,
            "n_paths": report.n_paths,
            "constant": report.constant,
            "fitted_constant": report.fitted_constant,
            "passed": report.passed,
            "cells": cells,
        }
    if isinstance(report, ScalingReport):
        return {
            "type": "scaling",
            "lambda": report.lam,
            "direction": report.direction,
            "t_grid": report.t_grid,
            "quantiles": report.quantiles,
            "verdict": report.verdict,
            "trend": report.trend,
            "model_hash": report.model_hash,
            "seed": report.seed,
            "n_paths": report.n_paths,
            "note": "quantile trends are a distributional surrogate for almost-sure limits",
        }
    if isinstance(report, ExpMomentReport):
        return {
            "type": "expmoment",
            "xi": report.xi,
            "t": report.t,
            "b": report.b,
            "mean": report.mean,
            "stderr": report.stderr,
            "bound": report.bound,
            "passed": report.passed,
            "model_hash": report.model_hash,
            "seed": report.seed,
            "n_paths": report.n_paths,
        }
    if isinstance(report, PVariationReport):
        return {
            "type": "pvariation",
            "p": report.p,
            "levels": report.levels,
            "sums": report.sums,
            "running_max": report.running_max,
            "verdict": report.verdict,
        }
    raise TypeError(f"no serializer for {type(report).__name__}")


# --------------------------------------------------------------------------
# tables
# --------------------------------------------------------------------------


def _cell(v):
    v = plain(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return " ".join(_cell(u) for u in v)
    return str(v)


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def jsonl_text(header, rows):
    return "".join(json.dumps(dict(zip(header, plain(list(r)))), sort_keys=False) + "\n" for r in rows)


def plot_tables(report):
    """Columnar projections of a report dictionary: ``{suffix: (header, rows)}``."""
    kind = report["type"]
    if kind == "index":
        curve, windows = [], []
        for name, f in sorted(report["fits"].items()):
            for R, v in zip(f["R"], f["values"]):
                curve.append((name, R, math.log(R), v, math.log(v)))
            for c, e in zip(f["window_centers"], f["window_exponents"]):
                windows.append((name, f["direction"], c, math.log(c), e))
        return {
            "h_curve": (["functional", "R", "log_R", "value", "log_value"], curve),
            "fit_windows": (["functional", "direction", "R_center", "log_R_center", "exponent"], windows),
        }
    if kind == "inequality":
        cols = ["t", "R", "lhs", "lhs_radius", "functional", "rhs", "constant", "margin", "passed"]
        return {"cells": (cols, [tuple(c[k] for k in cols) for c in report["cells"]])}
    if kind == "scaling":
        rows = [(report["lambda"], t, *q) for t, q in zip(report["t_grid"], report["quantiles"])]
        return {"quantiles": (["lambda", "t", "q10", "q50", "q90"], rows)}
    if kind == "pvariation":
        rows = [(report["p"], k, s, m) for k, s, m in zip(report["levels"], report["sums"], report["running_max"])]
        return {"levels": (["p", "level", "median_sum", "running_max"], rows)}
    if kind == "pvariation-scan":
        rows = []
        for r in report["reports"]:
            rows += [(r["p"], k, s, m) for k, s, m in zip(r["levels"], r["sums"], r["running_max"])]
        return {"levels": (["p", "level", "median_sum", "running_max"], rows)}
    if kind == "expmoment":
        return {"moment": (["t", "b", "mean", "stderr", "bound", "passed"], [tuple(report[k] for k in ("t", "b", "mean", "stderr", "bound", "passed"))])}
    if kind == "scaling-set":
        rows = []
        for r in report["reports"]:
            rows += [(r["lambda"], t, *q) for t, q in zip(r["t_grid"], r["quantiles"])]
        return {"quantiles": (["lambda", "t", "q10", "q50", "q90"], rows)}
    if kind == "table":
        return {"table": (report["header"], report["rows"])}
    raise ValueError(f"unknown report type {kind!r}")


def emit_plot_data(report, fmt, out_dir, stem="report"):
    """Write the plot tables of ``report`` (dict or report object) to ``out_dir``.

    Returns the list of written paths. ``fmt`` is ``"csv"`` or ``"json-lines"``.
    """
    if not isinstance(report, dict):
        report = plain(report_to_dict(report))
    if fmt not in ("csv", "json-lines"):
        raise ValueError("format must be csv or json-lines")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for suffix, (header, rows) in plot_tables(report).items():
        ext = "csv" if fmt == "csv" else "jsonl"
        text = csv_text(header, rows) if fmt == "csv" else jsonl_text(header, rows)
        p = out_dir / f"{stem}.{suffix}.{ext}"
        p.write_text(text, encoding="utf-8")
        paths.append(p)
    return paths
