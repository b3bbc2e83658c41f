"""The functionals H, h and the generalized Blumenthal-Getoor indices.

``H`` maximizes ``|p|`` over frequencies ``eps/R`` with ``|eps| <= 1``
(Euclidean); ``h`` takes the real part at ``eps/(4 kappa R)``. The start
versions range over a compact ``(s, y)`` grid, the localized versions over
the max-norm ball ``|y - x| <= 2R`` at a fixed time.

The frequency set is a grid on the whole unit ball rather than its sphere:
``|p|`` need not be monotone along rays (compound-Poisson symbols oscillate).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import IllPosedFitError, SectorViolatedError
from .symbol import SamplingGrid, ball_points, condition_constants, symbol_values

WINDOW = 4
MAX_SPREAD = 0.5


@dataclass(frozen=True)
class IndexGrids:
    """Sampling grids: times ``s``, states ``y`` of shape (n, D) and the unit-ball grid ``eps`` (m, D)."""

    s: np.ndarray
    y: np.ndarray
    eps: np.ndarray

    @classmethod
    def default(cls, model, n_s=64, half_width=10.0, n_y=33, n_eps=64, s_max=10.0, center=None):
        D = model.dimension
        center = np.zeros(D) if center is None else np.atleast_1d(np.asarray(center, dtype=float))
        axes = [np.linspace(c - half_width, c + half_width, n_y) for c in center]
        k = model.lift_depth
        if k:
            axes[:k] = [np.linspace(0.0, s_max, n_y)] * k
        if k == 0 and not model.state_dependent:
            y = center[None, :]
        else:
            y = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)
        if k or not model.time_dependent:
            s = np.zeros(1)
        else:
            s = np.linspace(0.0, s_max, n_s)
        return cls(s, y, ball_points(D, n_eps))

    def doubled(self, model):
        """Grids with roughly twice the resolution along every axis."""
        s = self.s if len(self.s) == 1 else np.linspace(self.s[0], self.s[-1], 2 * len(self.s) - 1)
        y = self.y
        if len(y) > 1:
            axes = []
            for i in range(y.shape[1]):
                u = np.unique(y[:, i])
                axes.append(u if len(u) == 1 else np.linspace(u[0], u[-1], 2 * len(u) - 1))
            y = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)
        n = len(self.eps)
        return IndexGrids(s, y, ball_points(self.eps.shape[1], 2 * (n - 1) if y.shape[1] == 1 else 128))


def _local_y(model, x, R, n_y=33):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if model.lift_depth == 0 and not model.state_dependent:
        return x[None, :]
    axes = [np.linspace(c - 2 * R, c + 2 * R, n_y) for c in x]
    k = model.lift_depth
    for i in range(k):
        axes[i] = np.clip(axes[i], 0.0, None)
    return np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)


def _sym(model, s, y, xi):
    """p(s, y_i, xi_j) as an (n_y, n_xi) array."""
    return symbol_values(model, s, y[:, None, :], xi[None, :, :])


def _resolve_kappa(model, kappa):
    if kappa is None:
        kappa = condition_constants(model, SamplingGrid.default(model)).kappa
    if kappa is None:
        raise SectorViolatedError("sector condition violated: delta-type indices and h are undefined for this model")
    return kappa


def H_start(model, R, grids=None):
    """max over (s, y, eps) of |p(s, y, eps/R)|."""
    grids = grids or IndexGrids.default(model)
    return float(max(np.max(np.abs(_sym(model, s, grids.y, grids.eps / R))) for s in grids.s))


def h_start(model, R, grids=None, kappa=None):
    """min over (s, y) of max over eps of Re p(s, y, eps/(4 kappa R))."""
    grids = grids or IndexGrids.default(model)
    kappa = _resolve_kappa(model, kappa)
    xi = grids.eps / (4.0 * kappa * R)
    return float(min(np.min(np.max(_sym(model, s, grids.y, xi).real, axis=1)) for s in grids.s))


def H_inf(model, tau, x, R, n_y=33, eps=None, s=None):
    """Localized H: sup over |y - x| <= 2R (max norm) at time ``tau``, or over the times ``s`` if given."""
    eps = ball_points(model.dimension, 64) if eps is None else eps
    y = _local_y(model, x, R, n_y)
    times = [tau] if s is None else np.atleast_1d(s)
    return float(max(np.max(np.abs(_sym(model, t, y, eps / R))) for t in times))


def h_inf(model, tau, x, R, kappa=None, n_y=33, eps=None, s=None):
    """Localized h: inf over |y - x| <= 2R of max over eps of Re p(tau, y, eps/(4 kappa R))."""
    kappa = _resolve_kappa(model, kappa)
    eps = ball_points(model.dimension, 64) if eps is None else eps
    y = _local_y(model, x, R, n_y)
    xi = eps / (4.0 * kappa * R)
    times = [tau] if s is None else np.atleast_1d(s)
    return float(min(np.min(np.max(_sym(model, t, y, xi).real, axis=1)) for t in times))


def H_curve(model, radii, tau=0.0, x=None, grids=None, localized=False):
    """H on a grid of radii, made nonincreasing in R.

    Every frequency sampled at a larger radius also lies in the ball of any
    smaller one, so the running maximum toward small R is still a lower
    bound of the true supremum and restores its monotonicity.
    """
    radii = np.asarray(radii, dtype=float)
    if localized:
        x = np.zeros(model.dimension) if x is None else x
        vals = np.array([H_inf(model, tau, x, R) for R in radii])
    else:
        grids = grids or IndexGrids.default(model)
        vals = np.array([H_start(model, R, grids) for R in radii])
    order = np.argsort(radii)[::-1]
    vals[order] = np.maximum.accumulate(vals[order])
    return vals


# --------------------------------------------------------------------------
# slope fits
# --------------------------------------------------------------------------


@dataclass
class IndexFit:
    """Log-log fit of samples toward the limit ``direction``.

    ``exponent`` is minus the least-squares slope over the half of the grid
    nearest the limit; ``window_exponents`` are minus the slopes over
    sliding windows of 4 points there, with ``window_centers`` their
    geometric-mean radii.
    """

    direction: str
    R: np.ndarray
    values: np.ndarray
    exponent: float
    residual: float
    window_exponents: np.ndarray
    window_centers: np.ndarray

    @property
    def upper(self):
        return float(self.window_exponents.max())

    @property
    def lower(self):
        return float(self.window_exponents.min())

    @property
    def spread(self):
        return self.upper - self.lower


def extract_indices(samples, direction):
    """Fit a power law to ``[(R, value), ...]`` toward ``direction`` ("R->0" or "R->inf").

    Raises :class:`IllPosedFitError` if a value is not positive and finite
    or the windowed exponents spread by more than 0.5.
    """
    if direction not in ("R->0", "R->inf"):
        raise ValueError("direction must be 'R->0' or 'R->inf'")
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) < 6:
        raise ValueError("need at least 6 (R, value) samples")
    arr = arr[np.argsort(arr[:, 0])]
    R, v = arr[:, 0], arr[:, 1]
    if np.any(R <= 0) or np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise IllPosedFitError("samples must have positive radii and positive finite values")
    half = max(WINDOW, (len(R) + 1) // 2)
    sel = slice(0, half) if direction == "R->0" else slice(len(R) - half, len(R))
    lr, lv = np.log(R[sel]), np.log(v[sel])
    A = np.stack([lr, np.ones_like(lr)], axis=1)
    (slope, icpt), *_ = np.linalg.lstsq(A, lv, rcond=None)
    resid = float(np.sqrt(np.mean((lv - A @ [slope, icpt]) ** 2)))
    wins, centers = [], []
    for i in range(len(lr) - WINDOW + 1):
        a, b = lr[i : i + WINDOW], lv[i : i + WINDOW]
        wins.append(-np.polyfit(a, b, 1)[0])
        centers.append(np.exp(a.mean()))
    wins = np.array(wins)
    fit = IndexFit(direction, R, v, float(-slope), resid, wins, np.array(centers))
    if fit.spread > MAX_SPREAD:
        raise IllPosedFitError(f"windowed exponents spread by {fit.spread:.3g} (> {MAX_SPREAD})", error_estimate=fit.spread)
    return fit


# --------------------------------------------------------------------------
# full report
# --------------------------------------------------------------------------

R_SMALL = np.geomspace(1e-3, 1e-1, 16)
R_LARGE = np.geomspace(1e1, 1e3, 16)


@dataclass
class IndexReport:
    """All eight indices with their fits.

    ``at_start`` holds beta0, beta0_lower, delta0_bar, delta0 (R -> inf);
    ``at_infinity`` holds beta_inf, beta_inf_lower, delta_inf_bar,
    delta_inf (R -> 0) at ``(tau, x)``. delta-type entries are ``None`` when
    the sector condition is violated.
    """

    tau: float
    x: np.ndarray
    kappa: float
    R_small: np.ndarray
    R_large: np.ndarray
    at_start: dict
    at_infinity: dict
    fits: dict
    grid_doubling: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def check_ordering(self):
        s, f = self.at_start, self.at_infinity
        ok = s["beta0_lower"] >= s["beta0"] - 1e-12 and f["beta_inf"] >= f["beta_inf_lower"] - 1e-12
        if s["delta0"] is not None:
            ok = ok and s["delta0"] >= s["delta0_bar"] - 1e-12
        if f["delta_inf"] is not None:
            ok = ok and f["delta_inf_bar"] >= f["delta_inf"] - 1e-12
        return ok


def compute_indices(model, tau=0.0, x=None, grids=None, R_small=R_SMALL, R_large=R_LARGE, kappa="auto", doubling=True):
    """Sample H and h on both R-grids and extract the eight indices."""
    x = np.zeros(model.dimension) if x is None else np.atleast_1d(np.asarray(x, dtype=float))
    grids = grids or IndexGrids.default(model, center=x if model.lift_depth == 0 else None)
    notes = []
    if kappa == "auto":
        kappa = condition_constants(model, SamplingGrid.default(model)).kappa
    fits = {}
    fits["H_start"] = extract_indices(list(zip(R_large, H_curve(model, R_large, grids=grids))), "R->inf")
    fits["H_inf"] = extract_indices(list(zip(R_small, H_curve(model, R_small, tau, x, localized=True))), "R->0")
    at_start = {"beta0": fits["H_start"].lower, "beta0_lower": fits["H_start"].upper, "delta0_bar": None, "delta0": None}
    at_inf = {"beta_inf": fits["H_inf"].upper, "beta_inf_lower": fits["H_inf"].lower, "delta_inf_bar": None, "delta_inf": None}
    if kappa is None:
        notes.append("sector condition violated: delta-type indices undefined")
    else:
        fits["h_start"] = extract_indices([(R, h_start(model, R, grids, kappa)) for R in R_large], "R->inf")
        fits["h_inf"] = extract_indices([(R, h_inf(model, tau, x, R, kappa)) for R in R_small], "R->0")
        at_start.update(delta0_bar=fits["h_start"].lower, delta0=fits["h_start"].upper)
        at_inf.update(delta_inf_bar=fits["h_inf"].upper, delta_inf=fits["h_inf"].lower)
    diag = {}
    if doubling:
        fine = grids.doubled(model)
        for R in (R_large[0], R_large[-1]):
            a, b = H_start(model, R, grids), H_start(model, R, fine)
            diag[f"H_start(R={R:g})"] = abs(b - a) / max(abs(b), 1e-300)
    return IndexReport(tau, x, kappa, np.asarray(R_small), np.asarray(R_large), at_start, at_inf, fits, diag, notes)
