import numpy as np
import pytest

from nhito import IllPosedFitError, SectorViolatedError
from nhito.catalog import additive_bm, alpha_stable, compound_poisson, det_jump_unit, pure_drift
from nhito.indices import (
    R_LARGE,
    R_SMALL,
    H_curve,
    H_inf,
    H_start,
    IndexGrids,
    compute_indices,
    extract_indices,
    h_inf,
    h_start,
)
from nhito.model import CoefficientField

RS = np.geomspace(1e-2, 1e2, 9)
KAPPA0 = 1 / (2 * np.pi)


def test_H_closed_forms():
    for R in RS:
        assert H_start(pure_drift(2.0), R) == pytest.approx(2 / R, rel=1e-12)
        assert H_start(alpha_stable(1.5), R) == pytest.approx(R**-1.5, rel=1e-12)
        assert H_start(additive_bm(), R) == pytest.approx(1 / (2 * R * R), rel=1e-12)
        assert H_inf(alpha_stable(1.5), 0, 0, R) == pytest.approx(R**-1.5, rel=1e-12)
        assert H_inf(additive_bm(), 0.5, 1.0, R) == pytest.approx(1 / (2 * R * R), rel=1e-12)


def test_h_closed_forms():
    for R in RS:
        assert h_start(additive_bm(), R, kappa=KAPPA0) == pytest.approx(np.pi**2 / (8 * R * R), rel=1e-12)
        assert h_start(alpha_stable(1.0), R, kappa=KAPPA0) == pytest.approx(np.pi / (2 * R), rel=1e-12)
        assert h_inf(additive_bm(), 0, 0, R, kappa=KAPPA0) == pytest.approx(np.pi**2 / (8 * R * R), rel=1e-12)


def test_h_refuses_without_sector():
    with pytest.raises(SectorViolatedError):
        h_start(pure_drift(2.0), 1.0)
    with pytest.raises(SectorViolatedError):
        h_inf(pure_drift(2.0), 0, 0, 1.0)


def test_H_inf_state_dependent_scale():
    alpha = 1.5
    m = alpha_stable(alpha, CoefficientField.expression("1 + abs(x[0])"))
    for R in (0.01, 0.1, 1.0):
        expected = ((1 + 2 * R) / R) ** alpha
        assert H_inf(m, 0, 0, R) == pytest.approx(expected, rel=1e-12)
        fine = H_inf(m, 0, 0, R, n_y=129)
        assert fine == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("model", [additive_bm(), alpha_stable(0.7), compound_poisson(), pure_drift(1.0)])
def test_H_monotone_in_R(model):
    for rs in (R_SMALL, R_LARGE):
        for vals in (H_curve(model, rs), H_curve(model, rs, localized=True)):
            assert np.all(np.diff(vals) <= 0)
        raw = [H_start(model, R) for R in rs]
        assert np.all(H_curve(model, rs) >= raw)


def test_extract_exact_power():
    fit = extract_indices([(R, R**-1.5) for R in R_SMALL], "R->0")
    assert fit.exponent == pytest.approx(1.5, abs=1e-12)
    assert fit.residual == pytest.approx(0.0, abs=1e-12)
    assert fit.upper == pytest.approx(1.5) and fit.lower == pytest.approx(1.5)


def test_extract_rejects_oscillation():
    R = np.geomspace(1e-3, 1e-1, 16)
    vals = R**-1.0 * np.exp(1.5 * np.sin(8 * np.log(R)))
    with pytest.raises(IllPosedFitError):
        extract_indices(list(zip(R, vals)), "R->0")
    with pytest.raises(IllPosedFitError):
        extract_indices([(r, 0.0) for r in R], "R->0")
    with pytest.raises(ValueError):
        extract_indices([(1, 1)] * 3, "R->0")


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5, 2.0])
def test_index_recovery(alpha):
    m = additive_bm() if alpha == 2.0 else alpha_stable(alpha, 0.8)
    rep = compute_indices(m)
    for d in (rep.at_start, rep.at_infinity):
        for v in d.values():
            assert v == pytest.approx(alpha, abs=0.1)
    assert rep.check_ordering()
    assert all(v < 1e-9 for v in rep.grid_doubling.values())


def test_compound_poisson_indices():
    rep = compute_indices(compound_poisson())
    assert rep.at_infinity["beta_inf"] == pytest.approx(0.0, abs=0.1)
    assert rep.at_start["beta0"] == pytest.approx(2.0, abs=0.1)
    assert rep.check_ordering()


def test_sector_violated_indices():
    rep = compute_indices(pure_drift(1.0))
    assert rep.at_start["delta0"] is None and rep.at_infinity["delta_inf"] is None
    assert rep.at_infinity["beta_inf"] == pytest.approx(1.0, abs=1e-9)
    assert rep.notes


def test_det_jump_indices_ill_posed():
    with pytest.raises(IllPosedFitError):
        compute_indices(det_jump_unit())
