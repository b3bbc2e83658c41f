"""Model specification documents.

A document is a key-value tree (YAML or JSON) with top-level keys
``dimension``, ``drift``, ``diffusion``, ``jumps``, ``truncation``,
``catalog`` and, for space-time lifts, ``space_time`` (number of lifts).
Coefficient fields are either a bare number/array (constant) or a mapping
with a ``kind`` key. Serialization is canonical JSON, so
``dumps(loads(dumps(m))) == dumps(m)`` byte for byte.
"""

import json

import numpy as np
import yaml

from .errors import ModelParseError
from .model import (
    CATALOG_TAGS,
    FIELD_KINDS,
    JUMP_FAMILIES,
    LAW_KINDS,
    TRUNCATION_SHAPES,
    CatalogTag,
    CoefficientField,
    JumpKernelSpec,
    JumpLaw,
    ProcessModel,
    TruncationSpec,
    lift_space_time,
    zero_field,
)

TOP_KEYS = ("dimension", "drift", "diffusion", "jumps", "truncation", "catalog", "space_time")


def model_to_dict(model):
    base = {
        "dimension": model.base_dimension,
        "drift": model.drift.to_dict(),
        "diffusion": model.diffusion.to_dict(),
        "jumps": model.jumps.to_dict(),
        "truncation": model.truncation.to_dict(),
        "catalog": None if model.catalog is None else model.catalog.to_dict(),
    }
    if model.lift_depth:
        base["space_time"] = model.lift_depth
    return base


def dumps(model):
    return json.dumps(model_to_dict(model), sort_keys=True, indent=2) + "\n"


def loads(text):
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ModelParseError("", f"not a valid YAML/JSON document: {exc}") from None
    return model_from_dict(doc)


parse_model_spec = loads


# --------------------------------------------------------------------------


def _require(doc, key, path):
    if not isinstance(doc, dict):
        raise ModelParseError(path, "expected a mapping")
    if key not in doc:
        raise ModelParseError(f"{path}.{key}" if path else key, "missing required parameter")
    return doc[key]


def _number(value, path, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ModelParseError(path, "expected a number")
    value = float(value)
    if not np.isfinite(value):
        raise ModelParseError(path, "must be finite")
    if positive and value <= 0:
        raise ModelParseError(path, "must be positive")
    return value


def _array(value, path, shape):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ModelParseError(path, "expected a numeric array") from None
    try:
        return np.broadcast_to(arr, shape).copy()
    except ValueError:
        raise ModelParseError(path, f"array of shape {arr.shape} does not fit shape {shape}") from None


def field_from_dict(doc, path, dimension, shape):
    if doc is None:
        return zero_field(dimension, shape)
    if not isinstance(doc, dict):
        return CoefficientField.constant(_array(doc, path, shape), dimension=dimension)
    kind = _require(doc, "kind", path)
    if kind not in FIELD_KINDS:
        raise ModelParseError(f"{path}.kind", f"unknown coefficient kind {kind!r}")
    try:
        if kind == "constant":
            return CoefficientField.constant(
                _array(_require(doc, "value", path), f"{path}.value", shape), dimension=dimension
            )
        if kind == "time-polynomial":
            coeffs = _require(doc, "coefficients", path)
            if not isinstance(coeffs, list) or not coeffs:
                raise ModelParseError(f"{path}.coefficients", "expected a non-empty list")
            arrs = [_array(c, f"{path}.coefficients[{i}]", shape) for i, c in enumerate(coeffs)]
            return CoefficientField.time_polynomial(arrs, dimension=dimension, shape=shape)
        if kind == "tabulated-grid":
            axes = _require(doc, "axes", path)
            values = _require(doc, "values", path)
            return CoefficientField.tabulated(axes, values, dimension=dimension, shape=shape)
        exprs = _require(doc, "expressions", path)
        params = doc.get("parameters") or {}
        if not isinstance(params, dict):
            raise ModelParseError(f"{path}.parameters", "expected a mapping")
        params = {k: _number(v, f"{path}.parameters.{k}") for k, v in params.items()}
        arr = np.asarray(exprs, dtype=object)
        if arr.shape != tuple(shape):
            if arr.shape == () and shape == ():
                pass
            else:
                raise ModelParseError(f"{path}.expressions", f"expected shape {tuple(shape)}, got {arr.shape}")
        return CoefficientField.expression(arr, dimension=dimension, parameters=params, shape=shape)
    except ModelParseError:
        raise
    except ValueError as exc:
        raise ModelParseError(path, str(exc)) from None


def _law_from_dict(doc, path):
    kind = _require(doc, "kind", path)
    if kind not in LAW_KINDS:
        raise ModelParseError(f"{path}.kind", f"unknown jump law {kind!r}")
    try:
        if kind == "gaussian":
            return JumpLaw.gaussian(
                _number(doc.get("mean", 0.0), f"{path}.mean"),
                _number(_require(doc, "std", path), f"{path}.std", positive=True),
            )
        if kind == "two-point":
            return JumpLaw.two_point(_number(_require(doc, "a", path), f"{path}.a", positive=True))
        return JumpLaw.two_sided_exponential(_number(_require(doc, "rate", path), f"{path}.rate", positive=True))
    except ValueError as exc:
        raise ModelParseError(path, str(exc)) from None


def _jumps_from_dict(doc, path, d):
    if doc is None:
        return JumpKernelSpec()
    family = _require(doc, "family", path)
    if family not in JUMP_FAMILIES:
        raise ModelParseError(f"{path}.family", f"unknown family {family!r}")
    if family == "none":
        return JumpKernelSpec()
    if family == "compound-poisson":
        intensity = field_from_dict(_require(doc, "intensity", path), f"{path}.intensity", d, ())
        law = _law_from_dict(_require(doc, "law", path), f"{path}.law")
        return JumpKernelSpec("compound-poisson", intensity=intensity, law=law)
    alpha = _number(_require(doc, "alpha", path), f"{path}.alpha")
    if not 0.0 < alpha < 2.0:
        raise ModelParseError(f"{path}.alpha", "alpha outside (0,2)")
    scale = field_from_dict(doc.get("scale", 1.0), f"{path}.scale", d, ())
    return JumpKernelSpec("symmetric-alpha-stable", alpha=alpha, scale=scale)


def _truncation_from_dict(doc, path):
    if doc is None:
        return TruncationSpec()
    if not isinstance(doc, dict):
        raise ModelParseError(path, "expected a mapping")
    shape = doc.get("shape", "piecewise-linear")
    if shape not in TRUNCATION_SHAPES:
        raise ModelParseError(f"{path}.shape", f"unknown truncation shape {shape!r}")
    r = _number(doc.get("inner_radius", 1.0), f"{path}.inner_radius", positive=True)
    big = _number(doc.get("outer_radius", max(r, 1.0)), f"{path}.outer_radius", positive=True)
    if big < r:
        raise ModelParseError(f"{path}.outer_radius", "must be at least inner_radius")
    return TruncationSpec(r, big, shape)


def _catalog_from_dict(doc, path):
    if doc is None:
        return None
    if isinstance(doc, str):
        doc = {"tag": doc}
    tag = _require(doc, "tag", path)
    if tag not in CATALOG_TAGS:
        raise ModelParseError(f"{path}.tag", f"unknown family {tag!r}")
    params = []
    for k in sorted(doc):
        if k == "tag":
            continue
        v = doc[k]
        params.append((k, tuple(float(c) for c in v) if isinstance(v, list) else v))
    return CatalogTag(tag, tuple(params))


def model_from_dict(doc):
    if not isinstance(doc, dict):
        raise ModelParseError("", "model document must be a mapping")
    unknown = sorted(set(doc) - set(TOP_KEYS))
    if unknown:
        raise ModelParseError(unknown[0], "unknown top-level key")
    dim = doc.get("dimension", 1)
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise ModelParseError("dimension", "must be a positive integer")
    catalog = _catalog_from_dict(doc.get("catalog"), "catalog")
    drift = field_from_dict(doc.get("drift"), "drift", dim, (dim,))
    diffusion = field_from_dict(doc.get("diffusion"), "diffusion", dim, (dim, dim))
    jumps = _jumps_from_dict(doc.get("jumps"), "jumps", dim)
    truncation = _truncation_from_dict(doc.get("truncation"), "truncation")
    try:
        model = ProcessModel(dim, drift, diffusion, jumps, truncation, catalog)
    except ValueError as exc:
        raise ModelParseError("", str(exc)) from None
    lifts = doc.get("space_time", 0)
    if isinstance(lifts, bool) or not isinstance(lifts, int) or lifts < 0:
        raise ModelParseError("space_time", "must be a nonnegative integer")
    for _ in range(lifts):
        model = lift_space_time(model)
    return model
