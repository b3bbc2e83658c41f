"""Built-in models."""

import numpy as np

from .model import (
    CatalogTag,
    CoefficientField,
    JumpKernelSpec,
    JumpLaw,
    NO_JUMPS,
    ProcessModel,
    TruncationSpec,
    zero_field,
)


def _as_field(value, dimension, shape):
    if isinstance(value, CoefficientField):
        return value
    return CoefficientField.constant(value, dimension=dimension, shape=shape)


def additive_bm(sigma2=(0.0, 1.0), dimension=1):
    """Brownian motion with variance function ``sigma2(t) = sum_k sigma2[k] t**k``.

    The diffusion coefficient is the right derivative of sigma2 times the
    identity; there is no drift and no jump part.
    """
    sigma2 = tuple(float(c) for c in sigma2)
    deriv = [k * c for k, c in enumerate(sigma2)][1:] or [0.0]
    eye = np.eye(dimension)
    q = CoefficientField.time_polynomial([c * eye for c in deriv], dimension=dimension)
    return ProcessModel(
        dimension,
        zero_field(dimension, (dimension,)),
        q,
        catalog=CatalogTag("additive-bm", (("sigma2", sigma2),)),
    )


def pure_drift(ell=1.0, dimension=1):
    drift = CoefficientField.constant(ell, dimension=dimension, shape=(dimension,))
    return ProcessModel(
        dimension,
        drift,
        zero_field(dimension, (dimension, dimension)),
        catalog=CatalogTag("pure-drift"),
    )


def alpha_stable(alpha=1.5, gamma=1.0, dimension=1, truncation=None):
    """Rotationally symmetric stable-like process with symbol gamma^alpha |xi|^alpha.

    ``gamma`` may be a number or a scalar :class:`CoefficientField`; only the
    constant case carries the ``alpha-stable-levy`` catalog tag.
    """
    scale = _as_field(gamma, dimension, ())
    tag = None if isinstance(gamma, CoefficientField) else CatalogTag("alpha-stable-levy")
    return ProcessModel(
        dimension,
        zero_field(dimension, (dimension,)),
        zero_field(dimension, (dimension, dimension)),
        JumpKernelSpec("symmetric-alpha-stable", alpha=float(alpha), scale=scale),
        truncation or TruncationSpec(),
        catalog=tag,
    )


def compound_poisson(rate=1.0, law=None, drift=0.0, dimension=1, truncation=None):
    law = law or JumpLaw.two_point(1.0)
    return ProcessModel(
        dimension,
        _as_field(drift, dimension, (dimension,)),
        zero_field(dimension, (dimension, dimension)),
        JumpKernelSpec("compound-poisson", intensity=_as_field(rate, dimension, ()), law=law),
        truncation or TruncationSpec(),
        catalog=CatalogTag("compound-poisson"),
    )


def jump_diffusion(dimension=1):
    """Mean-reverting diffusion with time-varying intensity and skewed gaussian jumps.

    drift -x/2, diffusion 0.5 + 0.25 s/(1+s), intensity 1 + 0.5 sin(s),
    jumps N(0.1, 0.3^2) per coordinate.
    """
    d = dimension
    drift = CoefficientField.expression([f"-0.5*x[{i}]" for i in range(d)], dimension=d)
    diag = [["0.5 + 0.25*s/(1+s)" if i == j else "0" for j in range(d)] for i in range(d)]
    diffusion = CoefficientField.expression(diag, dimension=d)
    intensity = CoefficientField.expression("1 + 0.5*sin(s)", dimension=d)
    return ProcessModel(
        d,
        drift,
        diffusion,
        JumpKernelSpec("compound-poisson", intensity=intensity, law=JumpLaw.gaussian(0.1, 0.3)),
        TruncationSpec(),
        catalog=CatalogTag("jump-diffusion"),
    )


def det_jump_unit(dimension=1):
    """Deterministic unit jump at clock time 1; all characteristics vanish."""
    return ProcessModel(
        dimension,
        zero_field(dimension, (dimension,)),
        zero_field(dimension, (dimension, dimension)),
        NO_JUMPS,
        TruncationSpec(0.5, 0.5, "piecewise-linear"),
        catalog=CatalogTag("det-jump-unit"),
    )


def constant_process(dimension=1):
    """No drift, no diffusion, no jumps."""
    return ProcessModel(
        dimension,
        zero_field(dimension, (dimension,)),
        zero_field(dimension, (dimension, dimension)),
    )


def catalog_models():
    """Default instance of every catalog entry, keyed by tag."""
    return {
        "additive-bm": additive_bm(),
        "pure-drift": pure_drift(2.0),
        "alpha-stable-levy": alpha_stable(1.5),
        "compound-poisson": compound_poisson(),
        "jump-diffusion": jump_diffusion(),
        "det-jump-unit": det_jump_unit(),
    }


def build_from_tag(tag, **params):
    """Construct a catalog model from its tag and parameters."""
    builders = {
        "additive-bm": lambda: additive_bm(params.get("sigma2", (0.0, 1.0)), params.get("dimension", 1)),
        "pure-drift": lambda: pure_drift(params.get("ell", 1.0), params.get("dimension", 1)),
        "alpha-stable-levy": lambda: alpha_stable(
            params.get("alpha", 1.5), params.get("gamma", 1.0), params.get("dimension", 1)
        ),
        "compound-poisson": lambda: compound_poisson(params.get("rate", 1.0), dimension=params.get("dimension", 1)),
        "jump-diffusion": lambda: jump_diffusion(params.get("dimension", 1)),
        "det-jump-unit": lambda: det_jump_unit(params.get("dimension", 1)),
    }
    if tag not in builders:
        raise KeyError(tag)
    return builders[tag]()
