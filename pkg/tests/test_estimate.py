import numpy as np
import pytest

from nhito.catalog import additive_bm, alpha_stable, compound_poisson, constant_process, det_jump_unit, pure_drift
from nhito.estimate import EstimatorConfig, estimate_sweep, estimate_symbol, estimate_symbols, radius_independence_check
from nhito.symbol import symbol_analytic


def test_det_jump_is_exactly_zero():
    cfg = EstimatorConfig(n_paths=200, lags=(0.4, 0.2, 0.1))
    for xi in np.linspace(-10, 10, 7):
        v = estimate_symbol(det_jump_unit(), 0.5, 0.0, xi, cfg)
        assert v.real == 0.0 and v.imag == 0.0


def test_zero_frequency_exact():
    for m in (additive_bm(), alpha_stable(1.0), compound_poisson()):
        for seed in (0, 1):
            v = estimate_symbol(m, 0.0, 0.0, 0.0, EstimatorConfig(n_paths=500, seed=seed))
            assert complex(v) == 0


def test_bm_estimate():
    v = estimate_symbol(additive_bm(), 0.0, 0.0, 2.0, EstimatorConfig(n_paths=100_000))
    assert abs(complex(v) - 2.0) <= v.confidence_radius
    assert not v.low_precision


@pytest.mark.parametrize(
    "model, tau, x, xi",
    [
        (additive_bm((0, 1, 0.5)), 1.0, 0.0, 1.5),
        (pure_drift(1.0), 0.0, 0.0, 1.0),
        (compound_poisson(2.0), 0.0, 0.3, 2.0),
        (alpha_stable(1.5, 0.5), 0.0, 0.0, 1.0),
    ],
)
def test_consistency_with_analytic(model, tau, x, xi):
    (est,) = estimate_symbols(model, tau, x, [[xi]], EstimatorConfig(n_paths=20_000))
    exact = complex(symbol_analytic(model, tau, x, xi))
    assert abs(complex(est.value) - exact) <= est.value.confidence_radius + est.bias_budget + 1e-12


def test_radius_shrinks_with_n():
    r = []
    for n in (10_000, 40_000):
        r.append(estimate_symbol(additive_bm(), 0, 0, 1.0, EstimatorConfig(n_paths=n)).confidence_radius)
    assert r[1] / r[0] == pytest.approx(0.5, rel=0.1)


def test_low_precision_flag():
    flagged = []
    for seed in range(10):
        v = estimate_symbol(additive_bm(), 0, 0, 1e-3, EstimatorConfig(n_paths=100, seed=seed))
        assert v.low_precision == (v.confidence_radius > 10 * abs(v))
        flagged.append(v.low_precision)
    assert any(flagged)


def test_radius_independence():
    rc = radius_independence_check(additive_bm(), 0, 0, 1.0, EstimatorConfig(n_paths=20_000))
    assert rc.agree and rc.precondition_ok
    rc = radius_independence_check(
        pure_drift(1.0), 0, 0, 1.0, EstimatorConfig(n_paths=100, lags=(1.0,), extrapolation="smallest-lag"), (0.5, 10)
    )
    assert not rc.agree
    rc = radius_independence_check(constant_process(), 0, 0, 3.0, EstimatorConfig(n_paths=100))
    assert complex(rc.estimates[0]) == 0 and complex(rc.estimates[1]) == 0 and rc.agree


def test_sweep_rows():
    rows = estimate_sweep(additive_bm(), [(0.0, 0.0), (1.0, 0.0)], [[1.0], [2.0]], EstimatorConfig(n_paths=1000))
    assert len(rows) == 2 * 2 * 4
    assert sum(r[3] == 0.0 for r in rows) == 4
    assert all(len(r) == 8 for r in rows)


def test_config_validation():
    with pytest.raises(ValueError):
        EstimatorConfig(n_paths=10)
    with pytest.raises(ValueError):
        EstimatorConfig(lags=(1e-3, 2e-3))
    with pytest.raises(ValueError):
        EstimatorConfig(lags=(1e-3,))
    with pytest.raises(ValueError):
        EstimatorConfig(extrapolation="cubic")


def test_estimate_deterministic():
    cfg = EstimatorConfig(n_paths=2000, seed=7)
    a = estimate_symbol(compound_poisson(), 0, 0, 1.0, cfg)
    b = estimate_symbol(compound_poisson(), 0, 0, 1.0, cfg)
    assert complex(a) == complex(b)
