"""Monte Carlo estimation of the symbol from its limit definition.

For a lag h the estimate is ``-(mean(exp(i(X_h - x)'xi)) - 1)/h`` over
paths stopped at their first exit from the max-norm ball of radius R.
"""

from dataclasses import dataclass, field

import numpy as np

from .simulate import SimConfig, simulate_stopped
from .symbol import SymbolValue

EXTRAPOLATIONS = ("smallest-lag", "richardson-2point")


@dataclass(frozen=True)
class EstimatorConfig:
    radius: float = 1.0
    lags: tuple = (4e-3, 2e-3, 1e-3)
    n_paths: int = 10_000
    extrapolation: str = "richardson-2point"
    seed: int = 0
    stream_index: int = 0
    steps_per_lag: int = 64
    workers: int = 1

    def __post_init__(self):
        lags = tuple(float(h) for h in self.lags)
        object.__setattr__(self, "lags", lags)
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if not lags or lags[-1] <= 0 or any(a <= b for a, b in zip(lags, lags[1:])):
            raise ValueError("lags must be positive and strictly decreasing")
        if self.n_paths < 100:
            raise ValueError("at least 100 paths per lag are required")
        if self.extrapolation not in EXTRAPOLATIONS:
            raise ValueError(f"extrapolation must be one of {EXTRAPOLATIONS}")
        if self.extrapolation == "richardson-2point" and len(lags) < 2:
            raise ValueError("richardson extrapolation needs at least two lags")
        if self.steps_per_lag < 64:
            raise ValueError("exit detection needs at least 64 steps per lag")


@dataclass
class LagEstimate:
    h: float
    value: complex
    radius: float
    exited_fraction: float


@dataclass
class SymbolEstimate:
    """Extrapolated estimate plus the per-lag values it was built from."""

    xi: np.ndarray
    value: SymbolValue
    lags: list = field(default_factory=list)
    bias_budget: float = 0.0


def _stopped_endpoints(model, tau, x, R, h, cfg, stream):
    sim = SimConfig(step=h / cfg.steps_per_lag, horizon=h, seed=cfg.seed, stream_index=stream)
    return simulate_stopped(model, tau, x, R, h, sim, n_paths=cfg.n_paths, workers=cfg.workers)


def _lag_estimate(increments, exited, xi, h):
    z = np.expm1(1j * (increments @ xi))
    n = len(z)
    mean = z.mean()
    std = np.sqrt(np.mean(np.abs(z - mean) ** 2))
    return LagEstimate(h, complex(-mean / h), float(3.0 * std / (h * np.sqrt(n))), float(np.mean(exited)))


def _combine(lags, rule):
    last = lags[-1]
    if rule == "smallest-lag":
        return last.value, last.radius
    prev = lags[-2]
    r = prev.h / last.h
    value = (r * last.value - prev.value) / (r - 1.0)
    radius = np.hypot(r * last.radius, prev.radius) / (r - 1.0)
    return value, float(radius)


def _bias_budget(lags):
    """|C| * h_min for a least-squares fit p_h = p + C h over the lags."""
    if len(lags) < 2:
        return 0.0
    h = np.array([e.h for e in lags])
    p = np.array([e.value for e in lags])
    A = np.stack([np.ones_like(h), h], axis=1)
    coef = np.linalg.lstsq(A.astype(complex), p, rcond=None)[0]
    return float(abs(coef[1]) * h.min())


def estimate_symbols(model, tau, x, xis, cfg):
    """Estimates at several frequencies from one set of stopped paths per lag."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    if xis.shape[1] != model.dimension:
        raise ValueError("frequency dimension does not match the model")
    per_xi = [[] for _ in xis]
    for j, h in enumerate(cfg.lags):
        stream = cfg.stream_index * len(cfg.lags) + j
        ends, exited = _stopped_endpoints(model, tau, x, cfg.radius, h, cfg, stream)
        inc = ends - x
        for k, xi in enumerate(xis):
            per_xi[k].append(_lag_estimate(inc, exited, xi, h))
    out = []
    for xi, lags in zip(xis, per_xi):
        value, radius = _combine(lags, cfg.extrapolation)
        low = radius > 10.0 * abs(value)
        out.append(SymbolEstimate(xi, SymbolValue.from_complex(value, radius, low), lags, _bias_budget(lags)))
    return out


def estimate_symbol(model, tau, x, xi, cfg):
    """Monte Carlo estimate of p(tau, x, xi); ``low_precision`` is set when the radius exceeds 10|p|."""
    return estimate_symbols(model, tau, x, [np.atleast_1d(xi)], cfg)[0].value


@dataclass
class RadiusCheck:
    radii: tuple
    estimates: tuple
    difference: float
    combined_radius: float
    precondition_ok: bool

    @property
    def agree(self):
        return self.difference <= self.combined_radius


def radius_independence_check(model, tau, x, xi, cfg, radii=(1.0, 2.0)):
    """Estimate with two radii on independent streams and compare.

    ``precondition_ok`` records whether both radii are at least ten times the
    increment scale sqrt(|Q| h_max) at the start point.
    """
    from .model import eval_characteristics

    r1, r2 = sorted(float(r) for r in radii)
    ests = []
    for i, R in enumerate((r1, r2)):
        sub = EstimatorConfig(
            R, cfg.lags, cfg.n_paths, cfg.extrapolation, cfg.seed, 2 * cfg.stream_index + i, cfg.steps_per_lag,
            cfg.workers,
        )
        ests.append(estimate_symbol(model, tau, x, xi, sub))
    _, q, _ = eval_characteristics(model, tau, np.atleast_1d(np.asarray(x, dtype=float)))
    scale = np.sqrt(np.linalg.norm(q, ord=2) * max(cfg.lags))
    diff = abs(ests[0].value - ests[1].value)
    comb = ests[0].confidence_radius + ests[1].confidence_radius
    return RadiusCheck((r1, r2), tuple(ests), float(diff), float(comb), bool(r1 >= 10 * scale))


def estimate_sweep(model, points, xis, cfg):
    """Per-lag and extrapolated records for each ``(tau, x)`` in ``points``.

    Rows are ``(tau, x, xi, h, re, im, radius, exited_fraction)`` with
    ``h = 0`` marking the extrapolated value.
    """
    rows = []
    for tau, x in points:
        for est in estimate_symbols(model, tau, x, xis, cfg):
            xi = est.xi
            for lag in est.lags:
                rows.append((tau, x, xi, lag.h, lag.value.real, lag.value.imag, lag.radius, lag.exited_fraction))
            ef = est.lags[-1].exited_fraction
            v = est.value
            rows.append((tau, x, xi, 0.0, v.real, v.imag, v.confidence_radius, ef))
    return rows
