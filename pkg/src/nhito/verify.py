"""Monte Carlo checks of maximal inequalities, scaling limits, exponential
moments and p-variation.

Every report carries the model hash and the seed used so that it can be
regenerated. Empirical probabilities come with a binomial confidence radius
of three standard errors.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import HypothesisViolation, SectorViolatedError
from .indices import H_inf, h_inf
from .model import eval_characteristics
from .simulate import SimConfig, simulate_paths
from .symbol import SamplingGrid, condition_constants

T_GRID_SMALL = tuple(2.56e-2 * 4.0**-k for k in range(8))
T_GRID_LARGE = tuple(4.0 * 4.0**k for k in range(8))
TREND_FACTOR = 4.0


# --------------------------------------------------------------------------
# maximal inequalities
# --------------------------------------------------------------------------


@dataclass
class InequalityCell:
    t: float
    R: float
    lhs: float
    lhs_radius: float
    functional: float
    rhs: float
    constant: float

    @property
    def margin(self):
        return self.rhs - (self.lhs - self.lhs_radius)

    @property
    def passed(self):
        return self.margin >= 0


@dataclass
class InequalityReport:
    """Cells of one maximal inequality.

    ``functional`` is ``sup_s H`` (upper) or ``inf_s h`` (lower); the
    fitted constant is the smallest one that makes every cell's point
    estimate satisfy the inequality.
    """

    kind: str
    model_hash: str
    seed: int
    n_paths: int
    constant: float
    fitted_constant: float
    cells: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.cells)

    def fitted_for(self, t_values):
        """Fitted constant restricted to cells whose t is in ``t_values``."""
        ts = np.asarray(sorted(t_values), dtype=float)
        cells = [c for c in self.cells if np.any(np.isclose(ts, c.t, rtol=1e-9, atol=0))]
        if self.kind == "upper":
            vals = [c.lhs / (c.t * c.functional) for c in cells if c.functional > 0]
        else:
            vals = [c.lhs * c.t * c.functional for c in cells]
        return float(max(vals, default=0.0))

    def with_constant(self, c):
        """Same cells re-evaluated with constant ``c``."""
        cells = []
        for cell in self.cells:
            rhs = _rhs(self.kind, c, cell.t, cell.functional)
            cells.append(InequalityCell(cell.t, cell.R, cell.lhs, cell.lhs_radius, cell.functional, rhs, c))
        return InequalityReport(self.kind, self.model_hash, self.seed, self.n_paths, c, self.fitted_constant, cells)


def _rhs(kind, c, t, functional):
    if kind == "upper":
        return c * t * functional
    return np.inf if functional == 0 else c / (t * functional)


def _binomial(hits, n):
    p = hits / n
    return float(p), float(3.0 * np.sqrt(p * (1.0 - p) / n))


def _sup_times(model, tau, t, n=8):
    """Times in (tau, tau+t] over which H and h are optimized."""
    if model.lift_depth or not model.time_dependent:
        return np.array([tau + t])
    return tau + t * np.arange(1, n + 1) / n


def _run_sups(model, tau, x, t_grid, n_paths, seed, stream, steps_per_min_lag, workers, max_steps=2**16):
    horizon = max(t_grid)
    step = max(min(t_grid) / steps_per_min_lag, horizon / max_steps)
    cfg = SimConfig(step=step, horizon=horizon, seed=seed, stream_index=stream, record_mode="endpoint-and-sup")
    batch = simulate_paths(model, tau, x, cfg, n_paths, checkpoints=t_grid, workers=workers)
    return batch.sups[:, : len(t_grid)]


def check_max_inequality_upper(
    model, tau, x, t_grid, radii, n_paths, c_d=None, seed=0, stream_index=0, steps_per_min_lag=64, workers=1
):
    """P(sup_{s<=t} |X_s - x| >= R) against c_d t sup_s H(s, x, R)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t_grid = tuple(sorted(float(t) for t in t_grid))
    radii = tuple(float(r) for r in np.atleast_1d(radii))
    c = 16.0 * model.base_dimension if c_d is None else float(c_d)
    sups = _run_sups(model, tau, x, t_grid, n_paths, seed, stream_index, steps_per_min_lag, workers)
    cells = []
    for j, t in enumerate(t_grid):
        for R in radii:
            lhs, rad = _binomial(np.count_nonzero(sups[:, j] >= R), n_paths)
            H = H_inf(model, tau, x, R, s=_sup_times(model, tau, t))
            if H == 0 and lhs > 0:
                raise HypothesisViolation(f"H vanishes at R={R} but exits occur (t={t}); model violates the hypotheses")
            cells.append(InequalityCell(t, R, lhs, rad, H, _rhs("upper", c, t, H), c))
    ratios = [cell.lhs / (cell.t * cell.functional) for cell in cells if cell.functional > 0]
    fitted = max(ratios, default=0.0)
    return InequalityReport("upper", model.hash(), seed, n_paths, c, float(fitted), cells)


def check_max_inequality_lower(
    model, tau, x, t_grid, radii, n_paths, c_k=None, seed=0, stream_index=0, steps_per_min_lag=64, workers=1,
    kappa=None,
):
    """P(sup_{s<=t} |X_s - x| < R) against c_k / (t inf_s h(s, x, R))."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if kappa is None:
        kappa = condition_constants(model, SamplingGrid.default(model, center=x)).kappa
    if kappa is None:
        raise SectorViolatedError("the lower maximal inequality needs the sector condition, which this model violates")
    t_grid = tuple(sorted(float(t) for t in np.atleast_1d(t_grid)))
    radii = tuple(float(r) for r in np.atleast_1d(radii))
    funcs = {}
    for t in t_grid:
        for R in radii:
            h = h_inf(model, tau, x, R, kappa=kappa, s=_sup_times(model, tau, t))
            if not h > 0:
                raise SectorViolatedError(
                    "the real part of the symbol vanishes near the start point; the sector condition holds only "
                    "degenerately and the lower bound is uninformative"
                )
            funcs[t, R] = h
    c = 16.0 if c_k is None else float(c_k)
    sups = _run_sups(model, tau, x, t_grid, n_paths, seed, stream_index, steps_per_min_lag, workers)
    cells = []
    for j, t in enumerate(t_grid):
        for R in radii:
            lhs, rad = _binomial(np.count_nonzero(sups[:, j] < R), n_paths)
            h = funcs[t, R]
            cells.append(InequalityCell(t, R, lhs, rad, h, _rhs("lower", c, t, h), c))
    fitted = max(cell.lhs * cell.t * cell.functional for cell in cells)
    return InequalityReport("lower", model.hash(), seed, n_paths, c, float(fitted), cells)


# --------------------------------------------------------------------------
# scaling limits
# --------------------------------------------------------------------------


@dataclass
class ScalingReport:
    """Quantiles of t^(-1/lam) sup_{s<=t}|X_s - x| per t, ordered toward the limit.

    The verdict is a distributional surrogate for an almost-sure limit: it
    looks at monotone trends of quantiles, which is strictly weaker.
    """

    lam: float
    direction: str
    t_grid: np.ndarray
    quantiles: np.ndarray  # (n_t, 3): 10%, 50%, 90%
    verdict: str
    trend: dict
    model_hash: str = ""
    seed: int = 0
    n_paths: int = 0


def _trend(q):
    """Verdict from quantile rows already ordered toward the limit."""
    lo, hi = q[:, 0], q[:, 2]
    down = bool(np.all(np.diff(hi) < 0)) and hi[-1] > 0 and hi[0] / hi[-1] >= TREND_FACTOR
    down = down or (bool(np.all(np.diff(hi) <= 0)) and hi[-1] == 0 and hi[0] > 0)
    up = bool(np.all(np.diff(lo) > 0)) and (lo[0] == 0 or lo[-1] / lo[0] >= TREND_FACTOR)
    stats = {
        "q90_ratio": float(hi[0] / hi[-1]) if hi[-1] > 0 else np.inf,
        "q10_ratio": float(lo[-1] / lo[0]) if lo[0] > 0 else np.inf,
        "q90_monotone": bool(np.all(np.diff(hi) < 0)),
        "q10_monotone": bool(np.all(np.diff(lo) > 0)),
    }
    if down and not up:
        return "→0", stats
    if up and not down:
        return "→∞", stats
    return "inconclusive", stats


def asymptotic_scaling(
    model, tau, x, lam, direction, t_grid=None, n_paths=2000, seed=0, stream_index=0, steps_per_t=256, workers=1
):
    """Trend of the scaled running supremum as t -> 0 or t -> inf.

    Each ``t`` is simulated independently with ``steps_per_t`` Euler steps.
    """
    if direction not in ("t->0", "t->inf"):
        raise ValueError("direction must be 't->0' or 't->inf'")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if t_grid is None:
        t_grid = T_GRID_SMALL if direction == "t->0" else T_GRID_LARGE
    t_grid = np.array(sorted(t_grid, reverse=direction == "t->0"), dtype=float)
    if len(t_grid) < 5:
        raise ValueError("the t-grid needs at least 5 points toward the limit")
    rows = []
    for j, t in enumerate(t_grid):
        cfg = SimConfig(t / steps_per_t, t, seed=seed, stream_index=stream_index * 64 + j, record_mode="endpoint-and-sup")
        sups = simulate_paths(model, tau, x, cfg, n_paths, workers=workers).sups[:, -1]
        rows.append(np.quantile(t ** (-1.0 / lam) * sups, [0.1, 0.5, 0.9]))
    q = np.array(rows)
    verdict, stats = _trend(q)
    return ScalingReport(float(lam), direction, t_grid, q, verdict, stats, model.hash(), seed, n_paths)


# --------------------------------------------------------------------------
# exponential moments
# --------------------------------------------------------------------------


@dataclass
class ExpMomentReport:
    xi: np.ndarray
    t: float
    b: float
    mean: float
    stderr: float
    bound: float
    model_hash: str = ""
    seed: int = 0
    n_paths: int = 0

    @property
    def passed(self):
        return self.mean - 3.0 * self.stderr <= self.bound


def _jump_mgf_term(kern, xi):
    """int (e^{xi'y} - 1 - xi'y chi(y)) N(dy) at the evaluation points."""
    if kern.family == "none":
        return 0.0
    if kern.family == "symmetric-alpha-stable":
        raise HypothesisViolation("stable kernels have no exponential moments")
    mgf = kern.law.mgf(xi[kern.offset :])
    if not np.isfinite(mgf):
        raise HypothesisViolation("the jump law has no exponential moment at this xi")
    m = kern.law.mean_chi(kern.truncation, kern.dim)
    return kern.rate * (mgf - 1.0 - xi[kern.offset :] @ m)


def exponent_bound(model, xi, s_grid, x_grid):
    """b(xi) = sup over the grid of |xi'l + 1/2 xi'Q xi + int(e^{xi'y} - 1 - xi'y chi) N|."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    best = 0.0
    for s in s_grid:
        ell, q, kern = eval_characteristics(model, s, x_grid)
        val = ell @ xi + 0.5 * np.einsum("i,...ij,j->...", xi, q, xi) + _jump_mgf_term(kern, xi)
        val = np.abs(np.broadcast_to(val, (len(x_grid),)))
        if not np.all(np.isfinite(val)):
            raise HypothesisViolation("b(xi) is unbounded on the grid")
        best = max(best, float(val.max()))
    return best


def exponential_moment_check(
    model, tau, x, xi, t, n_paths, seed=0, stream_index=0, steps=256, half_width=10.0, n_x=9, workers=1
):
    """Empirical E exp((X_t - x)'xi) against exp(b(xi) t)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if model.lift_depth or not model.time_dependent:
        s_grid = [tau]
    else:
        s_grid = np.linspace(tau, tau + t, 16)
    if model.lift_depth == 0 and not model.state_dependent:
        x_grid = x[None, :]
    else:
        axes = [np.linspace(c - half_width, c + half_width, n_x) for c in x]
        x_grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)
    b = exponent_bound(model, xi, s_grid, x_grid)
    cfg = SimConfig(t / steps, t, seed=seed, stream_index=stream_index, record_mode="endpoint-and-sup")
    ends = simulate_paths(model, tau, x, cfg, n_paths, workers=workers).endpoints
    vals = np.exp((ends - x) @ xi)
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / np.sqrt(n_paths)) if n_paths > 1 else 0.0
    return ExpMomentReport(xi, float(t), b, mean, se, float(np.exp(b * t)), model.hash(), seed, n_paths)


# --------------------------------------------------------------------------
# p-variation
# --------------------------------------------------------------------------


@dataclass
class PVariationReport:
    """Dyadic partition sums of |increment|^p.

    ``sums[k-1]`` is the median over paths of the level-k sum; ``running_max``
    its running maximum over levels.
    """

    p: float
    levels: np.ndarray
    sums: np.ndarray
    running_max: np.ndarray
    verdict: str
    per_path: np.ndarray = None

    @property
    def sup(self):
        return float(self.running_max[-1])


def _pvar_verdict(sums):
    ref = sums[-4]
    tail = sums[-3:]
    if ref > 0 and tail[-1] / ref >= 2.0:
        return "growing"
    if ref == 0:
        return "bounded" if np.all(tail == 0) else "growing"
    if np.all(tail < 1.1 * ref):
        return "bounded"
    return "inconclusive"


def dyadic_sums(paths, p, K):
    """Per-path partition sums at levels 1..K for paths sampled on 2^K+1 dyadic times."""
    paths = np.asarray(paths, dtype=float)
    if paths.ndim == 2:
        paths = paths[:, :, None]
    if paths.shape[1] != 2**K + 1:
        raise ValueError("paths must be sampled on 2^K + 1 equally spaced times")
    out = np.empty((paths.shape[0], K))
    for k in range(1, K + 1):
        sub = paths[:, :: 2 ** (K - k)]
        inc = np.linalg.norm(np.diff(sub, axis=1), axis=-1)
        out[:, k - 1] = np.sum(inc**p, axis=1)
    return out


def p_variation(model, tau, x, p, K=14, n_paths=200, horizon=1.0, seed=0, stream_index=0, paths=None, workers=1):
    """Dyadic p-variation sums on ``[tau, tau + horizon]``.

    ``p`` may be a sequence, in which case one report per value is returned
    from the same paths. Passing ``paths`` (shape (N, 2^K+1[, D])) skips
    simulation.
    """
    if not 1 <= K <= 16:
        raise ValueError("dyadic depth must lie in 1..16")
    scalar = np.ndim(p) == 0
    ps = [float(p)] if scalar else [float(v) for v in p]
    if any(v <= 0 for v in ps):
        raise ValueError("p must be positive")
    if paths is None:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        cfg = SimConfig(horizon / 2**K, horizon, seed=seed, stream_index=stream_index)
        paths = simulate_paths(model, tau, x, cfg, n_paths, keep_paths=True, workers=workers).paths
        if paths.shape[1] != 2**K + 1:
            raise RuntimeError("unexpected grid length")
    reports = []
    levels = np.arange(1, K + 1)
    for v in ps:
        per = dyadic_sums(paths, v, K)
        med = np.median(per, axis=0)
        verdict = _pvar_verdict(med) if K >= 4 else "inconclusive"
        reports.append(PVariationReport(v, levels, med, np.maximum.accumulate(med), verdict, per))
    return reports[0] if scalar else reports


def flip_location(reports):
    """Smallest p from which every larger scanned p is 'bounded' (None if the largest is not)."""
    reports = sorted(reports, key=lambda r: r.p)
    flip = None
    for r in reversed(reports):
        if r.verdict != "bounded":
            break
        flip = r.p
    return flip
