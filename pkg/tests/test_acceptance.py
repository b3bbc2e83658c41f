"""Acceptance criteria, one test each.

Every criterion prints a single PASS/FAIL line (collected in the terminal
summary). Run ``python tests/test_acceptance.py`` to get the lines without
pytest. Criterion 11 reruns 1-10 and compares their serialized results.
"""

import json
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import bm_exit_probability  # noqa: E402

from nhito.catalog import additive_bm, alpha_stable, catalog_models, compound_poisson, det_jump_unit  # noqa: E402
from nhito.estimate import EstimatorConfig, estimate_symbols, radius_independence_check  # noqa: E402
from nhito.indices import compute_indices  # noqa: E402
from nhito.model import JumpLaw, TruncationSpec, lift_space_time  # noqa: E402
from nhito.reporting import plain  # noqa: E402
from nhito.symbol import symbol_analytic, symbol_values  # noqa: E402
from nhito.verify import (  # noqa: E402
    asymptotic_scaling,
    check_max_inequality_lower,
    check_max_inequality_upper,
    exponential_moment_check,
    flip_location,
    p_variation,
)

ZERO_CHI = TruncationSpec(1.0, 1.0, "zero")
T_GRID = (4e-4, 1.6e-3, 6.4e-3, 2.56e-2)


class Outcome:
    def __init__(self, passed, detail, payload):
        self.passed = bool(passed)
        self.detail = detail
        self.payload = json.dumps(plain(payload), sort_keys=True).encode()


# --------------------------------------------------------------------------
# criteria
# --------------------------------------------------------------------------


def criterion_1():
    xis = np.linspace(-20.0, 20.0, 100)
    models = {
        "stable-0.5": alpha_stable(0.5),
        "stable-1": alpha_stable(1.0),
        "stable-1.5": alpha_stable(1.5),
        "cp-gaussian": compound_poisson(1.0, JumpLaw.gaussian(0.0, 1.0)),
        "cp-two-point": compound_poisson(1.0, JumpLaw.two_point(1.0)),
    }
    worst, rows = 0.0, {}
    for name, m in models.items():
        errs = []
        for xi in xis:
            a = complex(symbol_analytic(m, 0.0, 0.0, xi))
            b = complex(symbol_analytic(m, 0.0, 0.0, xi, method="quadrature"))
            errs.append(abs(a - b) / abs(a))
        rows[name] = max(errs)
        worst = max(worst, rows[name])
    return Outcome(worst <= 1e-6, f"max relative error {worst:.2e} (tol 1e-6)", rows)


def criterion_2():
    g = np.linspace(-2.0, 2.0, 5)
    taus = np.linspace(0.0, 2.0, 5)
    xi0, xi = (a.ravel() for a in np.meshgrid(g, g, indexing="ij"))
    worst = 0.0
    for name, m in catalog_models().items():
        lifted = lift_space_time(m)
        for tau in taus:
            for x in g:
                states = np.array([tau, x])
                a = symbol_values(lifted, 0.0, states, np.stack([xi0, xi], axis=-1))
                b = -1j * xi0 + symbol_values(m, tau, np.array([x]), xi[:, None])
                worst = max(worst, float(np.max(np.abs(a - b))))
    return Outcome(worst <= 1e-10, f"max |lift - (-i xi0 + p)| = {worst:.1e} (tol 1e-10)", worst)


def criterion_3():
    model = additive_bm((0.0, 1.0, 0.5))
    cfg = EstimatorConfig(radius=1.0, lags=(4e-3, 2e-3, 1e-3), n_paths=100_000, seed=3)
    ratios, payload, agree = [], [], []
    for j, tau in enumerate((0.0, 1.0)):
        sub = EstimatorConfig(cfg.radius, cfg.lags, cfg.n_paths, cfg.extrapolation, cfg.seed, j)
        for est in estimate_symbols(model, tau, 0.0, [[1.0], [2.0]], sub):
            xi = float(est.xi[0])
            exact = 0.5 * xi * xi * (1 + tau)
            err = abs(complex(est.value) - exact)
            tol = est.value.confidence_radius + 0.05 * exact
            ratios.append(err / tol)
            payload.append((tau, xi, complex(est.value), est.value.confidence_radius))
        for k, xi in enumerate((1.0, 2.0)):
            rc = radius_independence_check(
                model, tau, 0.0, xi, EstimatorConfig(1.0, cfg.lags, cfg.n_paths, seed=cfg.seed + 1, stream_index=2 * j + k)
            )
            agree.append(rc.agree)
            payload.append((tau, xi, rc.difference, rc.combined_radius))
    ok = max(ratios) <= 1.0 and all(agree)
    return Outcome(ok, f"max |err|/tol {max(ratios):.2f}; R=1 vs R=2 agree {sum(agree)}/{len(agree)}", payload)


def criterion_4():
    cfg = EstimatorConfig(n_paths=1000, lags=(4e-3, 2e-3, 1e-3), seed=4)
    xis = np.linspace(-10.0, 10.0, 21)[:, None]
    vals = []
    for tau in (0.0, 0.5):
        vals += [complex(e.value) for e in estimate_symbols(det_jump_unit(), tau, 0.0, xis, cfg)]
    ok = all(v.real == 0.0 and v.imag == 0.0 for v in vals)
    return Outcome(ok, f"{sum(v == 0 for v in vals)}/{len(vals)} estimates exactly 0", vals)


def criterion_5():
    cases = {"stable-0.5": (alpha_stable(0.5), 0.5), "stable-1": (alpha_stable(1.0), 1.0),
             "stable-1.5": (alpha_stable(1.5), 1.5), "additive-bm": (additive_bm(), 2.0)}
    worst, payload = 0.0, {}
    for name, (m, alpha) in cases.items():
        rep = compute_indices(m)
        vals = {**rep.at_start, **rep.at_infinity}
        checked = {k: v for k, v in vals.items() if v is not None}
        if not {"beta0", "beta_inf"} <= set(checked) or rep.kappa is None:
            return Outcome(False, f"{name}: indices missing", vals)
        worst = max(worst, max(abs(v - alpha) for v in checked.values()))
        payload[name] = vals
    return Outcome(worst <= 0.1, f"max |index - alpha| {worst:.3f} over beta and delta indices (tol 0.1)", payload)


def criterion_6():
    doubled = tuple(2 * t for t in T_GRID)
    union = tuple(sorted(set(T_GRID) | set(doubled)))
    n = 100_000
    parts, ok, payload = [], True, {}
    for name, model, stream in (("additive-bm", additive_bm(), 0), ("stable-1", alpha_stable(1.0), 1)):
        rep = check_max_inequality_upper(model, 0.0, 0.0, union, (0.5, 1.0), n, seed=6, stream_index=stream)
        c1, c2 = rep.fitted_for(T_GRID), rep.fitted_for(doubled)
        fitted = rep.with_constant(c1)
        holds = all(c.passed for c in fitted.cells if any(np.isclose(c.t, T_GRID)))
        stable = c1 > 0 and abs(c2 / c1 - 1.0) <= 0.5
        good = holds and stable
        msg = f"{name}: c(G)={c1:.3g} c(2G)={c2:.3g} ratio {c2 / c1:.2f}"
        if name == "additive-bm":
            z = []
            for c in rep.cells:
                p = bm_exit_probability(c.R, c.t)
                se = np.sqrt(p * (1 - p) / n)
                z.append(0.0 if c.lhs == p else abs(c.lhs - p) / se if se > 0 else np.inf)
            good = good and max(z) <= 3.0
            msg += f", oracle max |z| {max(z):.2f}"
        ok = ok and good
        parts.append(msg + (" ok" if good else " FAIL"))
        payload[name] = [(c.t, c.R, c.lhs, c.functional) for c in rep.cells]
    return Outcome(ok, "; ".join(parts), payload)


def criterion_7():
    grid = tuple(0.0625 * 2.0**k for k in range(7))
    doubled = tuple(2 * t for t in grid)
    union = tuple(sorted(set(grid) | set(doubled)))
    rep = check_max_inequality_lower(additive_bm(), 0.0, 0.0, union, (0.5, 1.0), 20_000, seed=7)
    c1, c2 = rep.fitted_for(grid), rep.fitted_for(doubled)
    fitted = rep.with_constant(c1)
    live = [c for c in fitted.cells if c.rhs <= 1.0]
    holds = all(c.passed for c in live)
    stable = abs(c2 / c1 - 1.0) <= 0.5
    default_ok = all(c.passed for c in rep.cells if c.rhs <= 1.0)
    ok = holds and stable and default_ok and len(live) > 0
    detail = (f"c_k(G)={c1:.3g} c_k(2G)={c2:.3g} ratio {c2 / c1:.2f}; {sum(c.passed for c in live)}/{len(live)} "
              f"cells with RHS<=1 hold; default c_k=16 cells hold: {default_ok}")
    return Outcome(ok, detail, [(c.t, c.R, c.lhs, c.functional) for c in rep.cells])


def criterion_8():
    expected = {("t->0", 1.0): "→∞", ("t->0", 3.0): "→0", ("t->inf", 1.0): "→0", ("t->inf", 3.0): "→∞"}
    got, payload = {}, []
    for i, ((direction, lam), _) in enumerate(sorted(expected.items())):
        rep = asymptotic_scaling(additive_bm(), 0.0, 0.0, lam, direction, n_paths=2000, seed=8, stream_index=i)
        got[direction, lam] = rep.verdict
        payload.append((direction, lam, rep.verdict, rep.quantiles))
    ok = got == expected
    detail = ", ".join(f"{d} lambda={lam:g}: {got[d, lam]}" for d, lam in sorted(expected))
    return Outcome(ok, detail, payload)


def criterion_9():
    out, ok, payload = [], True, {}
    cases = (
        ("additive-bm", additive_bm(), np.arange(1.0, 3.01, 0.25), 2.0),
        ("stable-1", alpha_stable(1.0), np.arange(0.25, 2.01, 0.25), 1.0),
    )
    for i, (name, m, ps, target) in enumerate(cases):
        reps = p_variation(m, 0.0, 0.0, list(ps), K=14, n_paths=200, seed=9, stream_index=i)
        flip = flip_location(reps)
        below_grow = any(r.verdict == "growing" for r in reps if r.p < target)
        good = flip is not None and abs(flip - target) <= 0.25 and below_grow
        ok = ok and good
        out.append(f"{name}: flip at p={flip} (target {target:g})")
        payload[name] = [(r.p, r.verdict, r.sums) for r in reps]
    return Outcome(ok, "; ".join(out), payload)


def criterion_10():
    m = compound_poisson(1.0, JumpLaw.two_point(1.0), truncation=ZERO_CHI)
    rep = exponential_moment_check(m, 0.0, 0.0, 1.0, 1.0, 200_000, seed=10)
    exact = float(np.exp(np.cosh(1.0) - 1.0))
    z = abs(rep.mean - exact) / rep.stderr
    ok = z <= 3.0 and rep.passed
    detail = (f"mean {rep.mean:.5f} vs exact {exact:.5f} (|z| {z:.2f}); b={rep.b:.6f}, "
              f"mean - 3SE <= e^(bt)={rep.bound:.5f}: {rep.passed}")
    return Outcome(ok, detail, (rep.mean, rep.stderr, rep.b))


CRITERIA = {
    1: (criterion_1, 10.0, "symbol quadrature vs closed form"),
    2: (criterion_2, 5.0, "space-time lift identity"),
    3: (criterion_3, 120.0, "estimator consistency"),
    4: (criterion_4, 1.0, "deterministic counterexample"),
    5: (criterion_5, 30.0, "index recovery"),
    6: (criterion_6, 300.0, "upper maximal inequality"),
    7: (criterion_7, 180.0, "lower maximal inequality"),
    8: (criterion_8, 180.0, "scaling dichotomy"),
    9: (criterion_9, 240.0, "p-variation threshold"),
    10: (criterion_10, 60.0, "exponential-moment bound"),
}

RESULTS = {}


def run_criterion(k):
    fn, limit, title = CRITERIA[k]
    start = time.perf_counter()
    out = fn()
    wall = time.perf_counter() - start
    out.wall = wall
    out.in_time = wall < limit
    out.line = (
        f"criterion {k:2d} {'PASS' if out.passed and out.in_time else 'FAIL'}  {title}: {out.detail} "
        f"[{wall:.1f} s, limit {limit:g} s]"
    )
    RESULTS.setdefault(k, out)
    return out


def criterion_11():
    same, lines = [], []
    for k in CRITERIA:
        first = RESULTS[k] if k in RESULTS else run_criterion(k)
        again = CRITERIA[k][0]()
        same.append(first.payload == again.payload)
        if not same[-1]:
            lines.append(str(k))
    detail = f"{sum(same)}/{len(same)} criteria byte-identical on rerun"
    if lines:
        detail += f" (differ: {', '.join(lines)})"
    out = Outcome(all(same), detail, same)
    out.line = f"criterion 11 {'PASS' if out.passed else 'FAIL'}  determinism: {detail}"
    return out


# --------------------------------------------------------------------------
# pytest entry points
# --------------------------------------------------------------------------


@pytest.mark.acceptance
@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k, acceptance_log):
    out = run_criterion(k)
    acceptance_log(out.line)
    assert out.passed, out.line
    assert out.in_time, out.line


@pytest.mark.acceptance
def test_criterion_11_determinism(acceptance_log):
    out = criterion_11()
    acceptance_log(out.line)
    assert out.passed, out.line


if __name__ == "__main__":
    for k in CRITERIA:
        print(run_criterion(k).line, flush=True)
    print(criterion_11().line)
