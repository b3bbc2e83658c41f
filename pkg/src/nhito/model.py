"""Process models given by differential characteristics.

A model is the triplet (drift, diffusion, jump kernel) of a time-inhomogeneous
Ito process together with a truncation function chi. All coefficient fields
evaluate vectorised: ``s`` may be an array and ``x`` may carry leading batch
axes, the last axis always being the state coordinate.

Space-time lifts are represented by ``ProcessModel.lift_depth``: a lifted
model has ``lift_depth`` leading clock coordinates with unit drift, no
diffusion and no jumps, followed by the original state.
"""

from dataclasses import dataclass, field, replace
from functools import cached_property
from math import gamma as _gamma
from math import pi

import numpy as np
from scipy import integrate, special, stats
from scipy.interpolate import RegularGridInterpolator

from ._expr import Expression
from .errors import OutOfDomainError, ValidationError

FIELD_KINDS = ("constant", "time-polynomial", "tabulated-grid", "expression-tree")
JUMP_FAMILIES = ("none", "compound-poisson", "symmetric-alpha-stable")
LAW_KINDS = ("gaussian", "two-point", "two-sided-exponential")
TRUNCATION_SHAPES = ("piecewise-linear", "smooth-bump", "zero")
CATALOG_TAGS = (
    "additive-bm",
    "pure-drift",
    "alpha-stable-levy",
    "compound-poisson",
    "jump-diffusion",
    "det-jump-unit",
)


def _nested(a):
    return np.asarray(a).tolist()


# --------------------------------------------------------------------------
# coefficient fields
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """A coefficient ``(s, x) -> array of shape `shape```.

    Use the classmethod constructors rather than building ``params`` by hand.
    """

    kind: str
    dimension: int
    shape: tuple
    params: dict = field(repr=False)

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise ValueError(f"unknown coefficient kind {self.kind!r}")
        if self.dimension < 1:
            raise ValueError("dimension must be positive")

    # constructors ---------------------------------------------------------

    @classmethod
    def constant(cls, value, dimension=1, shape=None):
        value = np.asarray(value, dtype=float)
        if shape is not None:
            value = np.broadcast_to(value, shape).copy()
        return cls("constant", dimension, value.shape, {"value": value})

    @classmethod
    def time_polynomial(cls, coefficients, dimension=1, shape=None):
        """Polynomial in ``s``; ``coefficients[k]`` multiplies ``s**k``."""
        coefficients = [np.asarray(c, dtype=float) for c in coefficients]
        if not coefficients:
            raise ValueError("time-polynomial needs at least one coefficient")
        if shape is None:
            shape = coefficients[0].shape
        coeffs = np.stack([np.broadcast_to(c, shape) for c in coefficients])
        return cls("time-polynomial", dimension, tuple(shape), {"coefficients": coeffs})

    @classmethod
    def tabulated(cls, axes, values, dimension=1, shape=()):
        """Multilinear interpolation on a grid.

        ``axes`` is ``[s_axis]`` for a time-only table or
        ``[s_axis, x0_axis, ..., x{d-1}_axis]``.
        """
        axes = tuple(np.asarray(a, dtype=float) for a in axes)
        if len(axes) not in (1, 1 + dimension):
            raise ValueError("tabulated field needs a time axis and optionally one axis per state coordinate")
        for a in axes:
            if a.ndim != 1 or a.size < 2 or np.any(np.diff(a) <= 0):
                raise ValueError("grid axes must be strictly increasing with at least 2 points")
        values = np.asarray(values, dtype=float)
        expected = tuple(a.size for a in axes) + tuple(shape)
        if values.shape != expected:
            raise ValueError(f"tabulated values have shape {values.shape}, expected {expected}")
        return cls("tabulated-grid", dimension, tuple(shape), {"axes": axes, "values": values})

    @classmethod
    def expression(cls, expressions, dimension=1, parameters=None, shape=None):
        exprs = np.asarray(expressions, dtype=object)
        if shape is not None and exprs.shape != tuple(shape):
            exprs = np.broadcast_to(exprs, shape).copy()
        params = dict(parameters or {})
        compiled = np.empty(exprs.shape, dtype=object)
        for idx in np.ndindex(exprs.shape):
            compiled[idx] = Expression(str(exprs[idx]), params)
        return cls(
            "expression-tree",
            dimension,
            exprs.shape,
            {"expressions": exprs, "parameters": params, "compiled": compiled},
        )

    # properties -----------------------------------------------------------

    @property
    def state_dependent(self):
        if self.kind == "tabulated-grid":
            return len(self.params["axes"]) > 1
        if self.kind == "expression-tree":
            return any("x" in e.names for e in self.params["compiled"].flat)
        return False

    @property
    def time_dependent(self):
        if self.kind == "constant":
            return False
        if self.kind == "time-polynomial":
            return self.params["coefficients"].shape[0] > 1
        if self.kind == "tabulated-grid":
            return True
        return any("s" in e.names for e in self.params["compiled"].flat)

    @cached_property
    def _interpolator(self):
        return RegularGridInterpolator(
            self.params["axes"], self.params["values"], method="linear", bounds_error=False, fill_value=None
        )

    # evaluation -----------------------------------------------------------

    def __call__(self, s, x):
        s = np.asarray(s, dtype=float)
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dimension,):
            raise ValueError(f"state has trailing size {x.shape[-1:]}, expected {self.dimension}")
        lead = np.broadcast_shapes(s.shape, x.shape[:-1])
        out_shape = lead + self.shape
        kind = self.kind
        if kind == "constant":
            return np.broadcast_to(self.params["value"], out_shape)
        if kind == "time-polynomial":
            coeffs = self.params["coefficients"]
            se = s.reshape(s.shape + (1,) * len(self.shape))
            out = np.broadcast_to(coeffs[-1], se.shape[: s.ndim] + self.shape)
            for c in coeffs[-2::-1]:
                out = out * se + c
            return np.broadcast_to(out, out_shape)
        if kind == "tabulated-grid":
            axes = self.params["axes"]
            cols = [np.broadcast_to(s, lead)]
            if len(axes) > 1:
                xb = np.broadcast_to(x, lead + (self.dimension,))
                cols += [xb[..., i] for i in range(self.dimension)]
            pts = np.stack(cols, axis=-1)
            for i, a in enumerate(axes):
                coord = pts[..., i]
                tol = 1e-12 * max(1.0, abs(a[0]), abs(a[-1]))
                bad = (coord < a[0] - tol) | (coord > a[-1] + tol)
                if np.any(bad):
                    where = pts[bad][0]
                    raise OutOfDomainError(
                        f"tabulated coefficient evaluated outside its grid on axis {i} at {where.tolist()}"
                    )
            return self._interpolator(pts.reshape(-1, len(axes))).reshape(out_shape)
        compiled = self.params["compiled"]
        out = np.empty(out_shape)
        for idx in np.ndindex(self.shape):
            out[(Ellipsis,) + idx] = np.broadcast_to(compiled[idx](s, x), lead)
        return out

    # serialization --------------------------------------------------------

    def to_dict(self):
        if self.kind == "constant":
            return {"kind": "constant", "value": _nested(self.params["value"])}
        if self.kind == "time-polynomial":
            return {"kind": "time-polynomial", "coefficients": _nested(self.params["coefficients"])}
        if self.kind == "tabulated-grid":
            return {
                "kind": "tabulated-grid",
                "axes": [_nested(a) for a in self.params["axes"]],
                "values": _nested(self.params["values"]),
            }
        return {
            "kind": "expression-tree",
            "expressions": self.params["expressions"].tolist(),
            "parameters": dict(sorted(self.params["parameters"].items())),
        }

    def __eq__(self, other):
        if not isinstance(other, CoefficientField):
            return NotImplemented
        return (self.dimension, self.shape) == (other.dimension, other.shape) and self.to_dict() == other.to_dict()

    __hash__ = None


def zero_field(dimension, shape):
    return CoefficientField.constant(np.zeros(shape), dimension=dimension)


# --------------------------------------------------------------------------
# truncation function
# --------------------------------------------------------------------------


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class TruncationSpec:
    """Symmetric cut-off chi: 1 on ``|y| <= inner_radius``, 0 on ``|y| >= 2*outer_radius``."""

    inner_radius: float = 1.0
    outer_radius: float = 1.0
    shape: str = "piecewise-linear"

    def __post_init__(self):
        if self.shape not in TRUNCATION_SHAPES:
            raise ValueError(f"unknown truncation shape {self.shape!r}")
        if not self.inner_radius > 0:
            raise ValueError("inner radius must be positive")
        if not self.outer_radius >= self.inner_radius:
            raise ValueError("outer radius must be at least the inner radius")

    def __call__(self, y):
        """Evaluate chi on points ``y`` of shape ``(..., d)`` (Euclidean norm)."""
        rho = np.linalg.norm(np.asarray(y, dtype=float), axis=-1)
        return self.radial(rho)

    def radial(self, rho):
        rho = np.asarray(rho, dtype=float)
        if self.shape == "zero":
            return np.zeros_like(rho)
        r, top = self.inner_radius, 2.0 * self.outer_radius
        t = (rho - r) / (top - r)
        if self.shape == "piecewise-linear":
            return np.clip(1.0 - t, 0.0, 1.0)
        return 1.0 - _smoothstep(t)

    @property
    def breakpoints(self):
        if self.shape == "zero":
            return ()
        return (self.inner_radius, 2.0 * self.outer_radius)

    def to_dict(self):
        return {"shape": self.shape, "inner_radius": float(self.inner_radius), "outer_radius": float(self.outer_radius)}


# --------------------------------------------------------------------------
# jump laws and kernels
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class JumpLaw:
    """Jump-size law of a compound-Poisson kernel.

    In dimension d the coordinates of a jump are independent copies of the
    one-dimensional law: gaussian(mean, std), two-point(+-a) or
    two-sided-exponential(rate), i.e. Laplace with density rate/2 exp(-rate|y|).
    """

    kind: str
    mean: float = 0.0
    std: float = 1.0
    a: float = 1.0
    rate: float = 1.0

    def __post_init__(self):
        if self.kind not in LAW_KINDS:
            raise ValueError(f"unknown jump law {self.kind!r}")
        if self.kind == "gaussian" and not self.std > 0:
            raise ValueError("gaussian jump std must be positive")
        if self.kind == "two-point" and not self.a > 0:
            raise ValueError("two-point jump size must be positive")
        if self.kind == "two-sided-exponential" and not self.rate > 0:
            raise ValueError("exponential jump rate must be positive")

    @classmethod
    def gaussian(cls, mean=0.0, std=1.0):
        return cls("gaussian", mean=float(mean), std=float(std))

    @classmethod
    def two_point(cls, a=1.0):
        return cls("two-point", a=float(a))

    @classmethod
    def two_sided_exponential(cls, rate=1.0):
        return cls("two-sided-exponential", rate=float(rate))

    @property
    def symmetric(self):
        return self.kind != "gaussian" or self.mean == 0.0

    def to_dict(self):
        if self.kind == "gaussian":
            return {"kind": "gaussian", "mean": self.mean, "std": self.std}
        if self.kind == "two-point":
            return {"kind": "two-point", "a": self.a}
        return {"kind": "two-sided-exponential", "rate": self.rate}

    def cf(self, xi):
        """Characteristic function E exp(i xi'J) for xi of shape ``(..., d)``."""
        xi = np.asarray(xi, dtype=float)
        if self.kind == "gaussian":
            return np.exp(1j * self.mean * xi.sum(axis=-1) - 0.5 * self.std**2 * (xi**2).sum(axis=-1))
        if self.kind == "two-point":
            return np.prod(np.cos(self.a * xi), axis=-1).astype(complex)
        r2 = self.rate**2
        return np.prod(r2 / (r2 + xi**2), axis=-1).astype(complex)

    def cf1(self, u):
        """One-coordinate characteristic function."""
        return self.cf(np.asarray(u, dtype=float)[..., None])

    def mgf(self, xi):
        """E exp(xi'J); ``inf`` where it diverges."""
        xi = np.asarray(xi, dtype=float)
        if self.kind == "gaussian":
            return np.exp(self.mean * xi.sum(axis=-1) + 0.5 * self.std**2 * (xi**2).sum(axis=-1))
        if self.kind == "two-point":
            return np.prod(np.cosh(self.a * xi), axis=-1)
        r2 = self.rate**2
        with np.errstate(divide="ignore"):
            per = np.where(np.abs(xi) < self.rate, r2 / (r2 - xi**2), np.inf)
        return np.prod(per, axis=-1)

    def density1(self, y):
        if self.kind == "gaussian":
            z = (y - self.mean) / self.std
            return np.exp(-0.5 * z * z) / (self.std * np.sqrt(2.0 * pi))
        if self.kind == "two-sided-exponential":
            return 0.5 * self.rate * np.exp(-self.rate * np.abs(y))
        raise ValueError("two-point law has no density")

    def sample(self, rng, n, d):
        if self.kind == "gaussian":
            return self.mean + self.std * rng.standard_normal((n, d))
        if self.kind == "two-point":
            return self.a * (2.0 * rng.integers(0, 2, size=(n, d)) - 1.0)
        return rng.laplace(0.0, 1.0 / self.rate, size=(n, d))

    def truncated_second_moment(self, d):
        """E[min(1, |J|^2)]."""
        if self.kind == "two-point":
            return min(1.0, d * self.a**2)
        if self.kind == "gaussian":
            # |J|^2 / std^2 is noncentral chi-square with d dof
            nc = d * self.mean**2 / self.std**2
            sf = lambda y: stats.ncx2.sf(y / self.std**2, d, nc) if nc > 0 else stats.chi2.sf(y / self.std**2, d)
            return integrate.quad(sf, 0.0, 1.0, epsabs=1e-13)[0]
        if d == 1:
            r = self.rate
            return 2.0 * (1.0 - np.exp(-r) * (1.0 + r)) / r**2
        # sum of d squared Laplace variables; deterministic quasi-Monte Carlo
        from scipy.stats import qmc

        u = qmc.Sobol(d, scramble=False).random_base2(14)[1:]
        y = -np.sign(u - 0.5) * np.log1p(-np.abs(2 * u - 1)) / self.rate
        return float(np.mean(np.minimum(1.0, (y**2).sum(axis=1))))

    def mean_chi(self, truncation, d):
        """E[J chi(J)] as a vector of length d."""
        if self.symmetric or truncation.shape == "zero":
            return np.zeros(d)
        if d != 1:
            # Gauss-Hermite tensor rule for the shifted gaussian
            nodes, weights = np.polynomial.hermite_e.hermegauss(60)
            weights = weights / weights.sum()
            grids = np.meshgrid(*([nodes] * d), indexing="ij")
            pts = self.mean + self.std * np.stack([g.ravel() for g in grids], axis=-1)
            w = np.prod(np.meshgrid(*([weights] * d), indexing="ij"), axis=0).ravel()
            return (w[:, None] * pts * truncation(pts)[:, None]).sum(axis=0)
        lo, hi = -2.0 * truncation.outer_radius, 2.0 * truncation.outer_radius
        pts = sorted({lo, -truncation.inner_radius, truncation.inner_radius, hi})
        f = lambda y: y * truncation.radial(abs(y)) * self.density1(y)
        val = sum(integrate.quad(f, a, b, epsabs=1e-14, epsrel=1e-12, limit=200)[0] for a, b in zip(pts, pts[1:]))
        return np.array([val])


def stable_levy_constant(alpha, d):
    """Density constant C with N(dy) = C gamma^alpha |y|^(-d-alpha) dy.

    Chosen so that the symbol equals gamma^alpha |xi|^alpha.
    """
    return alpha * 2.0 ** (alpha - 1.0) * _gamma((d + alpha) / 2.0) / (pi ** (d / 2.0) * _gamma(1.0 - alpha / 2.0))


def sphere_area(d):
    return 2.0 * pi ** (d / 2.0) / _gamma(d / 2.0)


@dataclass(frozen=True, eq=False)
class JumpKernelSpec:
    family: str = "none"
    intensity: CoefficientField = None
    law: JumpLaw = None
    alpha: float = None
    scale: CoefficientField = None

    def __post_init__(self):
        if self.family not in JUMP_FAMILIES:
            raise ValueError(f"unknown jump family {self.family!r}")
        if self.family == "compound-poisson":
            if self.intensity is None or self.law is None:
                raise ValueError("compound-poisson kernel needs an intensity and a jump law")
            if self.intensity.shape != ():
                raise ValueError("intensity must be scalar")
        if self.family == "symmetric-alpha-stable":
            if self.alpha is None or not 0.0 < self.alpha < 2.0:
                raise ValueError("alpha outside (0,2)")
            if self.scale is None or self.scale.shape != ():
                raise ValueError("stable kernel needs a scalar scale field")

    @property
    def finite_activity(self):
        return self.family != "symmetric-alpha-stable"

    def to_dict(self):
        if self.family == "none":
            return {"family": "none"}
        if self.family == "compound-poisson":
            return {"family": "compound-poisson", "intensity": self.intensity.to_dict(), "law": self.law.to_dict()}
        return {"family": "symmetric-alpha-stable", "alpha": float(self.alpha), "scale": self.scale.to_dict()}

    def __eq__(self, other):
        if not isinstance(other, JumpKernelSpec):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = None


NO_JUMPS = JumpKernelSpec()


@dataclass(frozen=True, eq=False)
class KernelAt:
    """Jump kernel frozen at evaluation points.

    ``rate`` (compound-poisson) and ``gamma`` (stable) are arrays over the
    evaluation points. Jumps live in state coordinates ``offset:``.
    """

    family: str
    dim: int
    offset: int
    truncation: TruncationSpec
    rate: np.ndarray = None
    law: JumpLaw = None
    alpha: float = None
    gamma: np.ndarray = None

    @property
    def intensity(self):
        """Total jump intensity (infinite for stable kernels)."""
        if self.family == "compound-poisson":
            return self.rate
        if self.family == "none":
            return 0.0
        return np.inf

    def kernel_integral(self):
        """Integral of min(1, |y|^2) against the kernel."""
        if self.family == "none":
            return 0.0
        if self.family == "compound-poisson":
            return self.rate * self.law.truncated_second_moment(self.dim)
        a = self.alpha
        c = stable_levy_constant(a, self.dim) * sphere_area(self.dim)
        return c * self.gamma**a * (1.0 / (2.0 - a) + 1.0 / a)

    def big_jump_rate(self, eps):
        """Stable kernel mass outside the ball of radius ``eps``."""
        a = self.alpha
        return stable_levy_constant(a, self.dim) * sphere_area(self.dim) * self.gamma**a * eps ** (-a) / a

    def small_jump_variance(self, eps):
        """Per-coordinate variance rate of stable jumps smaller than ``eps``."""
        a = self.alpha
        c = stable_levy_constant(a, self.dim) * sphere_area(self.dim)
        return c * self.gamma**a * eps ** (2.0 - a) / ((2.0 - a) * self.dim)


# --------------------------------------------------------------------------
# process model
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CatalogTag:
    name: str
    params: tuple = ()

    def __post_init__(self):
        if self.name not in CATALOG_TAGS:
            raise ValueError(f"unknown catalog tag {self.name!r}")

    def to_dict(self):
        out = {"tag": self.name}
        for k, v in self.params:
            out[k] = list(v) if isinstance(v, tuple) else v
        return out

    def get(self, key, default=None):
        return dict(self.params).get(key, default)


@dataclass(frozen=True, eq=False)
class ProcessModel:
    """Non-homogeneous Ito process given by its differential characteristics.

    ``dimension`` is the state dimension. For a space-time lift it includes
    the ``lift_depth`` leading clock coordinates; the coefficient fields keep
    the base dimension.
    """

    dimension: int
    drift: CoefficientField
    diffusion: CoefficientField
    jumps: JumpKernelSpec = NO_JUMPS
    truncation: TruncationSpec = TruncationSpec()
    catalog: CatalogTag = None
    lift_depth: int = 0

    def __post_init__(self):
        d = self.base_dimension
        if d < 1:
            raise ValueError("dimension must exceed the lift depth")
        if self.drift.shape != (d,) or self.drift.dimension != d:
            raise ValueError(f"drift must be a length-{d} vector field")
        if self.diffusion.shape != (d, d) or self.diffusion.dimension != d:
            raise ValueError(f"diffusion must be a {d}x{d} matrix field")
        for f in (self.jumps.intensity, self.jumps.scale):
            if f is not None and f.dimension != d:
                raise ValueError("jump kernel fields must share the model dimension")
        if self.truncation.shape == "zero" and not self.jumps.finite_activity:
            raise ValueError("zero truncation is only allowed for finite-activity kernels")

    @property
    def base_dimension(self):
        return self.dimension - self.lift_depth

    @property
    def is_det_jump(self):
        return self.catalog is not None and self.catalog.name == "det-jump-unit"

    @property
    def state_dependent(self):
        fields = [self.drift, self.diffusion, self.jumps.intensity, self.jumps.scale]
        return any(f is not None and f.state_dependent for f in fields)

    @property
    def time_dependent(self):
        fields = [self.drift, self.diffusion, self.jumps.intensity, self.jumps.scale]
        return any(f is not None and f.time_dependent for f in fields)

    def __eq__(self, other):
        if not isinstance(other, ProcessModel):
            return NotImplemented
        from .specio import model_to_dict

        return model_to_dict(self) == model_to_dict(other)

    __hash__ = None

    def hash(self):
        """Stable hex digest of the canonical serialization."""
        import hashlib

        from .specio import dumps

        return hashlib.sha256(dumps(self).encode()).hexdigest()


def _split_state(model, s, x):
    """Map a (possibly lifted) state onto base time and base state."""
    k = model.lift_depth
    if k == 0:
        return np.asarray(s, dtype=float), x
    return x[..., k - 1], x[..., k:]


def eval_characteristics(model, s, x):
    """Drift, diffusion matrix and kernel handle at ``(s, x)``.

    Vectorised over leading axes of ``s`` and ``x``. For lifted models the
    time argument is ignored and the clock is read off the state.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.dimension:
        raise ValueError(f"state has size {x.shape[-1]}, model dimension is {model.dimension}")
    if model.lift_depth == 0 and np.any(np.asarray(s) < 0):
        raise ValueError("time must be nonnegative")
    lead = np.broadcast_shapes(np.shape(s), x.shape[:-1])
    D, k = model.dimension, model.lift_depth
    if model.is_det_jump:
        kernel = KernelAt("none", model.base_dimension, k, model.truncation)
        ell = np.zeros(lead + (D,))
        ell[..., :k] = 1.0
        return ell, np.zeros(lead + (D, D)), kernel
    bs, bx = _split_state(model, s, x)
    ell = model.drift(bs, bx)
    q = model.diffusion(bs, bx)
    if k:
        ell = np.concatenate([np.ones(ell.shape[:-1] + (k,)), ell], axis=-1)
        qq = np.zeros(q.shape[:-2] + (D, D))
        qq[..., k:, k:] = q
        q = qq
    ell = np.broadcast_to(ell, lead + (D,))
    q = np.broadcast_to(q, lead + (D, D))
    j = model.jumps
    common = dict(dim=model.base_dimension, offset=k, truncation=model.truncation)
    if j.family == "compound-poisson":
        kernel = KernelAt("compound-poisson", rate=np.broadcast_to(j.intensity(bs, bx), lead), law=j.law, **common)
    elif j.family == "symmetric-alpha-stable":
        kernel = KernelAt(
            "symmetric-alpha-stable", alpha=j.alpha, gamma=np.broadcast_to(j.scale(bs, bx), lead), **common
        )
    else:
        kernel = KernelAt("none", **common)
    return ell, q, kernel


def lift_space_time(model):
    """Homogeneous space-time counterpart of ``model`` (one more dimension)."""
    return replace(model, dimension=model.dimension + 1, lift_depth=model.lift_depth + 1)


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Box:
    """Compact region ``[s_lo, s_hi] x prod [x_lo_i, x_hi_i]``."""

    s_lo: float
    s_hi: float
    x_lo: tuple
    x_hi: tuple

    def __post_init__(self):
        if not (np.isfinite(self.s_lo) and np.isfinite(self.s_hi) and self.s_hi >= self.s_lo >= 0):
            raise ValueError("time range must be finite with 0 <= s_lo <= s_hi")
        lo, hi = np.atleast_1d(self.x_lo), np.atleast_1d(self.x_hi)
        if lo.shape != hi.shape or not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)) or np.any(hi < lo):
            raise ValueError("state box must be finite and non-empty")

    @classmethod
    def around(cls, s_lo, s_hi, center, half_width):
        c = np.atleast_1d(np.asarray(center, dtype=float))
        return cls(float(s_lo), float(s_hi), tuple(c - half_width), tuple(c + half_width))

    def grid(self, resolution):
        s = np.linspace(self.s_lo, self.s_hi, resolution)
        axes = [np.linspace(a, b, resolution) for a, b in zip(np.atleast_1d(self.x_lo), np.atleast_1d(self.x_hi))]
        pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)
        return s, pts


@dataclass
class ValidationReport:
    max_drift: float
    max_diffusion: float
    max_kernel_integral: float
    psd_violations: list
    resolution: int

    @property
    def ok(self):
        return not self.psd_violations


def _psd_check(q):
    """Return (ok mask, min eigenvalue) for a stack of matrices."""
    sym = np.max(np.abs(q - np.swapaxes(q, -1, -2)), axis=(-2, -1))
    eig = np.linalg.eigvalsh(0.5 * (q + np.swapaxes(q, -1, -2)))
    rho = np.max(np.abs(eig), axis=-1)
    floor = -1e-10 * rho
    ok = (eig.min(axis=-1) >= floor) & (sym <= 1e-10 * (1.0 + rho))
    return ok, eig.min(axis=-1)


def validate_model(model, box, resolution=17):
    """Sweep a sampling grid of ``box`` and report coefficient bounds.

    Raises :class:`ValidationError` naming the first ``(s, x)`` at which a
    coefficient is not finite.
    """
    s_grid, pts = box.grid(resolution)
    if pts.shape[-1] != model.dimension:
        raise ValueError(f"box has dimension {pts.shape[-1]}, model has {model.dimension}")
    max_l = max_q = max_k = 0.0
    violations = []
    for s in s_grid:
        ell, q, kern = eval_characteristics(model, s, pts)
        kint = np.broadcast_to(kern.kernel_integral(), pts.shape[:1])
        for name, arr in (("drift", ell), ("diffusion", q), ("kernel", kint)):
            finite = np.isfinite(arr).reshape(len(pts), -1).all(axis=1)
            if not finite.all():
                i = int(np.argmin(finite))
                raise ValidationError(f"non-finite {name} coefficient", where=(float(s), pts[i].tolist()))
        max_l = max(max_l, float(np.max(np.linalg.norm(ell, axis=-1))))
        max_q = max(max_q, float(np.max(np.linalg.norm(q, ord=2, axis=(-2, -1)))))
        max_k = max(max_k, float(np.max(kint)))
        ok, mins = _psd_check(q)
        for i in np.flatnonzero(~ok):
            violations.append((float(s), pts[i].tolist(), float(mins[i])))
    return ValidationReport(max_l, max_q, max_k, violations, resolution)
