"""Time-dependent probabilistic symbol.

Sign convention::

    p(tau, x, xi) = -i l(tau,x)'xi + 1/2 xi'Q(tau,x)xi
                    - int (exp(i y'xi) - 1 - i y'xi chi(y)) N_tau(x, dy)

so that Re p >= 0 for symmetric chi.
"""

import warnings
from dataclasses import dataclass
from functools import lru_cache
from math import atan, pi

import numpy as np
from scipy import integrate

from .errors import QuadratureError, RightDerivativeError
from .model import KernelAt, eval_characteristics, stable_levy_constant

QUAD_TOL = 1e-8


@dataclass(frozen=True)
class SymbolValue:
    real: float
    imag: float
    confidence_radius: float = None
    low_precision: bool = False

    def __post_init__(self):
        if not (np.isfinite(self.real) and np.isfinite(self.imag)):
            raise ValueError("symbol value must be finite")
        if self.confidence_radius is not None and not self.confidence_radius >= 0:
            raise ValueError("confidence radius must be nonnegative")

    @classmethod
    def from_complex(cls, z, confidence_radius=None, low_precision=False):
        z = complex(z)
        return cls(z.real, z.imag, confidence_radius, low_precision)

    @property
    def value(self):
        return complex(self.real, self.imag)

    def __complex__(self):
        return self.value

    def __abs__(self):
        return abs(self.value)


# --------------------------------------------------------------------------
# closed forms
# --------------------------------------------------------------------------


@lru_cache(maxsize=64)
def _mean_chi(law, truncation, d):
    return law.mean_chi(truncation, d)


def jump_exponent(kernel, xi):
    """Jump part ``-int(e^{iy'xi} - 1 - iy'xi chi(y)) N(dy)`` in closed form.

    ``xi`` has shape ``(..., D)`` and broadcasts against the kernel's
    evaluation points.
    """
    xi = np.asarray(xi, dtype=float)[..., kernel.offset :]
    if kernel.family == "none":
        return np.zeros(xi.shape[:-1], dtype=complex)
    if kernel.family == "compound-poisson":
        m = _mean_chi(kernel.law, kernel.truncation, kernel.dim)
        inner = 1.0 - kernel.law.cf(xi) + 1j * (xi @ m)
        return kernel.rate * inner
    norm = np.linalg.norm(xi, axis=-1)
    return (kernel.gamma**kernel.alpha) * norm**kernel.alpha + 0j


def symbol_values(model, s, x, xi):
    """Vectorised closed-form symbol; ``s``, ``x``, ``xi`` broadcast together."""
    xi = np.asarray(xi, dtype=float)
    ell, q, kernel = eval_characteristics(model, s, x)
    drift = np.einsum("...i,...i->...", ell, xi)
    quad = np.einsum("...i,...ij,...j->...", xi, q, xi)
    return -1j * drift + 0.5 * quad + jump_exponent(kernel, xi)


def _point(a):
    return np.asarray(a, dtype=float).reshape(-1)


def symbol_analytic(model, tau, x, xi, method="closed"):
    """Symbol at one point.

    ``method="closed"`` uses the closed form of the kernel family,
    ``method="quadrature"`` evaluates the Levy integral numerically.
    """
    x, xi = _point(x), _point(xi)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if method == "closed":
        return SymbolValue.from_complex(complex(symbol_values(model, tau, x, xi)), 0.0)
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    ell, q, kernel = eval_characteristics(model, tau, x)
    local = -1j * (ell @ xi) + 0.5 * xi @ q @ xi
    jump = -levy_integral_quadrature(kernel, xi)
    return SymbolValue.from_complex(local + jump, 0.0)


# --------------------------------------------------------------------------
# quadrature
# --------------------------------------------------------------------------


def _check(err, what, value=0.0):
    """Absolute tolerance 1e-8, relative once the integral exceeds 1 in size."""
    tol = QUAD_TOL * max(1.0, abs(value))
    if not err <= tol:
        raise QuadratureError(f"{what}: estimated error {err:.3g} above {tol:g}", error_estimate=err)


def _stable_radial_1d(k, alpha):
    """int_0^inf (cos(k y) - 1) y^(-1-alpha) dy, by quadrature.

    The substitution u = k y gives k^alpha times the integral at k = 1,
    which is evaluated in two pieces split at u = 1.
    """
    if k == 0.0:
        return 0.0, 0.0
    # near zero: (cos u - 1) = -u^2 g(u), g bounded; weight u^(1-alpha)
    g = lambda u: 2.0 * np.sin(0.5 * u) ** 2 / (u * u) if u > 0 else 0.5
    a, ea = integrate.quad(g, 0.0, 1.0, weight="alg", wvar=(1.0 - alpha, 0.0), epsabs=1e-14, epsrel=1e-13, limit=200)
    # tail: cosine-weighted Fourier integral, integrated cycle by cycle
    f = lambda u: u ** (-1.0 - alpha)
    with warnings.catch_warnings():
        # QAWF reports cycle-level trouble as a warning; the returned error estimate is checked instead
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        b, eb = integrate.quad(f, 1.0, np.inf, weight="cos", wvar=1.0, epsabs=1e-14, limlst=200, limit=200)
    scale = k**alpha
    return scale * (-a + b - 1.0 / alpha), scale * (ea + eb)


def _periodic_breaks(lo, hi, k, extra=(), periods_per_piece=4):
    pts = {lo, hi, *[p for p in extra if lo < p < hi]}
    if k > 0:
        step = periods_per_piece * 2.0 * pi / k
        n = int((hi - lo) / step)
        pts.update(lo + step * np.arange(1, n + 1))
    return sorted(p for p in pts if lo <= p <= hi)


def _cp_coordinate_cf(law, u):
    """int exp(i u y) law1(dy) by quadrature on the real line."""
    if law.kind == "two-point":
        return complex(np.cos(law.a * u)), 0.0
    if law.kind == "gaussian":
        lo, hi, extra = law.mean - 12 * law.std, law.mean + 12 * law.std, (law.mean,)
    else:
        lo, hi, extra = -40.0 / law.rate, 40.0 / law.rate, (0.0,)
    pts = _periodic_breaks(lo, hi, abs(u), extra)
    re = im = err = 0.0
    for a, b in zip(pts, pts[1:]):
        r, er = integrate.quad(lambda y: np.cos(u * y) * law.density1(y), a, b, epsabs=1e-14, epsrel=1e-12, limit=200)
        i, ei = integrate.quad(lambda y: np.sin(u * y) * law.density1(y), a, b, epsabs=1e-14, epsrel=1e-12, limit=200)
        re, im, err = re + r, im + i, err + er + ei
    return complex(re, im), err


def _cp_mean_chi_quad(law, truncation, d):
    if law.symmetric or truncation.shape == "zero":
        return np.zeros(d), 0.0
    if d != 1:
        return law.mean_chi(truncation, d), 0.0
    lo, hi = -2.0 * truncation.outer_radius, 2.0 * truncation.outer_radius
    pts = sorted({lo, -truncation.inner_radius, truncation.inner_radius, hi})
    f = lambda y: y * truncation.radial(abs(y)) * law.density1(y)
    total = err = 0.0
    for a, b in zip(pts, pts[1:]):
        v, e = integrate.quad(f, a, b, epsabs=1e-14, epsrel=1e-12, limit=200)
        total, err = total + v, err + e
    return np.array([total]), err


def levy_integral_quadrature(kernel, xi, truncation=None):
    """``int (e^{iy'xi} - 1 - iy'xi chi(y)) N(dy)`` for a kernel at one point.

    The estimated error must stay below 1e-8, relative once the integral
    exceeds 1 in modulus; otherwise :class:`QuadratureError` is raised
    carrying the estimate.
    """
    if not isinstance(kernel, KernelAt):
        raise TypeError("expected a kernel handle from eval_characteristics")
    truncation = truncation or kernel.truncation
    xi = _point(xi)[kernel.offset :]
    if xi.size != kernel.dim:
        raise ValueError("frequency has the wrong dimension")
    if kernel.family == "none":
        return 0j
    if kernel.family == "compound-poisson":
        rate = float(np.asarray(kernel.rate))
        cf, err = 1.0 + 0j, 0.0
        for u in xi:
            c, e = _cp_coordinate_cf(kernel.law, float(u))
            cf, err = cf * c, err + e
        m, em = _cp_mean_chi_quad(kernel.law, truncation, kernel.dim)
        err = rate * (err + em * np.abs(xi).sum())
        _check(err, "compound-poisson Levy integral", rate * abs(cf - 1.0))
        return rate * (cf - 1.0 - 1j * (xi @ m))
    if kernel.dim != 1:
        raise NotImplementedError("stable Levy-integral quadrature is implemented for d = 1 only")
    gamma, alpha = float(np.asarray(kernel.gamma)), kernel.alpha
    scale = 2.0 * stable_levy_constant(alpha, 1) * gamma**alpha
    val, err = _stable_radial_1d(abs(float(xi[0])), alpha)
    _check(scale * err, "stable Levy integral", scale * val)
    # odd parts (sine and the chi-compensator) cancel against the symmetric measure
    return complex(scale * val, 0.0)


# --------------------------------------------------------------------------
# additive processes
# --------------------------------------------------------------------------


def right_derivative(f, tau, h0=0.5, rtol=1e-7, atol=1e-10, kmax=28, order=4):
    """Right derivative of ``f`` at ``tau``.

    One-sided difference quotients on h_k = h0 * 2^-k, accelerated by a
    Richardson table of at most ``order`` columns. Raises
    :class:`RightDerivativeError` if successive extrapolants do not settle.
    """
    f0 = np.asarray(f(tau))
    prev_row, prev_best = None, None
    for k in range(kmax):
        h = h0 * 2.0**-k
        row = [(np.asarray(f(tau + h)) - f0) / h]
        if prev_row is not None:
            for j in range(min(len(prev_row), order)):
                row.append(row[j] + (row[j] - prev_row[j]) / (2.0 ** (j + 1) - 1.0))
        best = row[-1]
        if prev_best is not None and k >= 3:
            diff = np.max(np.abs(best - prev_best))
            if diff <= rtol * np.max(np.abs(best)) + atol:
                return best
        prev_row, prev_best = row, best
    raise RightDerivativeError(f"right derivative at {tau} did not converge", error_estimate=float(diff))


def symbol_additive(B, C, nu_integral, tau, xi, **kwargs):
    """Symbol of an additive process from its deterministic characteristics.

    ``B(t)`` (vector), ``C(t)`` (matrix) and ``nu_integral(t)`` (the jump
    integral over (0, t] at this frequency, or ``None``) are functions of
    time. Returns ``-(i xi'dB - 1/2 xi'dC xi + d nu_integral)`` with ``d``
    the right derivative at ``tau``.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    db = np.atleast_1d(right_derivative(lambda t: np.atleast_1d(np.asarray(B(t), dtype=float)), tau, **kwargs))
    dc = np.atleast_2d(right_derivative(lambda t: np.atleast_2d(np.asarray(C(t), dtype=float)), tau, **kwargs))
    dn = 0j
    if nu_integral is not None:
        dn = complex(right_derivative(lambda t: np.asarray(nu_integral(t), dtype=complex), tau, **kwargs))
    exponent = 1j * (xi @ db) - 0.5 * (xi @ dc @ xi) + dn
    return SymbolValue.from_complex(-exponent, 0.0)


# --------------------------------------------------------------------------
# growth and sector constants
# --------------------------------------------------------------------------


def kappa_from_c0(c0):
    """kappa = 1/(4 arctan(1/(2 c0))), continued to 1/(2 pi) at c0 = 0."""
    if c0 is None:
        return None
    if c0 < 0:
        raise ValueError("c0 must be nonnegative")
    if c0 == 0:
        return 1.0 / (2.0 * pi)
    return 1.0 / (4.0 * atan(1.0 / (2.0 * c0)))


@dataclass(frozen=True)
class ConditionConstants:
    growth_c: float
    sector_c0: float  # None when the sector condition is violated

    @property
    def sector_violated(self):
        return self.sector_c0 is None

    @property
    def kappa(self):
        return kappa_from_c0(self.sector_c0)


def sphere_points(d, n=64):
    """Deterministic points on the unit sphere of R^d."""
    if d == 1:
        return np.array([[-1.0], [1.0]])
    if d == 2:
        t = 2 * pi * np.arange(n) / n
        return np.stack([np.cos(t), np.sin(t)], axis=-1)
    from scipy.stats import norm, qmc

    m = int(np.ceil(np.log2(max(n, 2))))
    u = qmc.Sobol(d, scramble=True, seed=0).random_base2(m)[:n]
    g = norm.ppf(u)
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def ball_points(d, n=64, levels=16):
    """Grid on the closed unit ball: radial levels times sphere directions, plus 0."""
    if d == 1:
        return np.linspace(-1.0, 1.0, 2 * (n // 2) + 1)[:, None]
    dirs = sphere_points(d, n)
    radii = np.linspace(1.0 / levels, 1.0, levels)
    pts = (radii[:, None, None] * dirs[None]).reshape(-1, d)
    return np.vstack([np.zeros((1, d)), pts])


@dataclass(frozen=True)
class SamplingGrid:
    """Finite ``(s, x, xi)`` grid; ``x`` and ``xi`` are ``(n, D)`` arrays."""

    s: np.ndarray
    x: np.ndarray
    xi: np.ndarray

    @classmethod
    def default(cls, model, s_max=10.0, half_width=10.0, n_s=16, n_x=9, center=None):
        D = model.dimension
        center = np.zeros(D) if center is None else np.asarray(center, dtype=float)
        axes = [np.linspace(c - half_width, c + half_width, n_x) for c in center]
        if model.lift_depth:
            axes[: model.lift_depth] = [np.linspace(0.0, s_max, n_x)] * model.lift_depth
        x = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)
        radii = np.geomspace(1e-3, 1e3, 25)
        xi = (radii[:, None, None] * sphere_points(D, 16)[None]).reshape(-1, D)
        return cls(np.linspace(0.0, s_max, n_s), x, xi)


def condition_constants(model, grid):
    """Growth constant c and sector constant c0 sampled on ``grid``."""
    if len(grid.s) == 0 or len(grid.x) == 0 or len(grid.xi) == 0:
        raise ValueError("grid must be non-empty")
    xi = np.asarray(grid.xi, dtype=float)
    nxi = np.linalg.norm(xi, axis=-1)
    growth, c0, violated = 0.0, 0.0, False
    for s in np.atleast_1d(grid.s):
        p = symbol_values(model, s, grid.x[:, None, :], xi[None, :, :])
        growth = max(growth, float(np.max(np.abs(p) / (1.0 + nxi**2))))
        re, im = p.real, np.abs(p.imag)
        pos = re > 1e-12
        if np.any(pos):
            c0 = max(c0, float(np.max(im[pos] / re[pos])))
        if np.any(~pos & (im > 1e-12)):
            violated = True
    return ConditionConstants(growth, None if violated else c0)
