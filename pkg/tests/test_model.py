import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nhito import (
    Box,
    CoefficientField,
    ModelParseError,
    OutOfDomainError,
    TruncationSpec,
    ValidationError,
    dumps,
    eval_characteristics,
    lift_space_time,
    loads,
    validate_model,
)
from nhito.catalog import additive_bm, alpha_stable, catalog_models, compound_poisson, det_jump_unit, pure_drift


@pytest.mark.parametrize("shape", ["piecewise-linear", "smooth-bump"])
@pytest.mark.parametrize("d", [1, 2, 3])
def test_truncation_properties(shape, d):
    chi = TruncationSpec(0.5, 1.5, shape)
    rng = np.random.default_rng(1)
    y = rng.normal(size=(1000, d)) * rng.uniform(0, 4, size=(1000, 1))
    v = chi(y)
    np.testing.assert_array_equal(v, chi(-y))
    rho = np.linalg.norm(y, axis=1)
    assert np.all(v[rho <= 0.5] == 1.0)
    assert np.all(v[rho >= 3.0] == 0.0)
    assert np.all((v >= 0) & (v <= 1))


def test_default_truncation_shape():
    chi = TruncationSpec()
    np.testing.assert_allclose(chi.radial([0.0, 1.0, 1.5, 2.0, 5.0]), [1, 1, 0.5, 0, 0])


@pytest.mark.parametrize("name", sorted(catalog_models()))
def test_diffusion_symmetric_psd(name):
    m = catalog_models()[name]
    box = Box.around(0, 5, np.zeros(m.dimension), 3.0)
    s, pts = box.grid(9)
    for si in s:
        _, q, _ = eval_characteristics(m, si, pts)
        np.testing.assert_allclose(q, np.swapaxes(q, -1, -2))
        assert np.linalg.eigvalsh(q).min() >= -1e-12


def test_validate_pure_drift():
    rep = validate_model(pure_drift(2.0), Box(0, 1, (-1,), (1,)))
    assert rep.max_drift == 2.0
    assert rep.max_kernel_integral == 0.0
    assert rep.ok


def test_validate_variance_square():
    rep = validate_model(additive_bm((0, 0, 1)), Box(0, 2, (-1,), (1,)))
    assert rep.max_diffusion == pytest.approx(4.0)


def test_validate_flags_negative_eigenvalue():
    q = CoefficientField.tabulated([[0.0, 1.0]], [[[1.0]], [[-0.1]]], dimension=1, shape=(1, 1))
    m = additive_bm()
    from dataclasses import replace

    rep = validate_model(replace(m, diffusion=q), Box(0, 1, (0,), (0,)), resolution=5)
    assert not rep.ok
    assert min(v[2] for v in rep.psd_violations) == pytest.approx(-0.1)


def test_validate_nonfinite_names_point():
    from dataclasses import replace

    drift = CoefficientField.expression(["1/(x[0]-0.5)"], dimension=1)
    with pytest.raises(ValidationError) as exc:
        validate_model(replace(pure_drift(), drift=drift), Box(0, 1, (0,), (1,)), resolution=3)
    assert exc.value.where[1] == [0.5]


def test_tabulated_out_of_domain():
    f = CoefficientField.tabulated([[0.0, 1.0]], [0.0, 1.0], dimension=1)
    assert f(0.5, np.zeros(1)) == pytest.approx(0.5)
    with pytest.raises(OutOfDomainError):
        f(1.5, np.zeros(1))


def test_eval_examples():
    ell, q, k = eval_characteristics(additive_bm((0, 1)), 0.7, np.zeros(1))
    assert ell.tolist() == [0.0] and q.tolist() == [[1.0]]
    rate = CoefficientField.time_polynomial([1.0, 1.0], dimension=1)
    _, _, k = eval_characteristics(compound_poisson(rate), 1.0, np.zeros(1))
    assert float(k.rate) == 2.0
    ell, q, k = eval_characteristics(det_jump_unit(), 0.3, np.array([5.0]))
    assert not ell.any() and not q.any() and k.family == "none"


def test_eval_vectorised():
    m = catalog_models()["jump-diffusion"]
    x = np.linspace(-1, 1, 6).reshape(3, 2, 1)
    ell, q, k = eval_characteristics(m, 0.5, x)
    assert ell.shape == (3, 2, 1) and q.shape == (3, 2, 1, 1)
    np.testing.assert_allclose(ell[..., 0], -0.5 * x[..., 0])


def test_lift_structure():
    lifted = lift_space_time(pure_drift(2.0))
    ell, q, _ = eval_characteristics(lifted, 0.0, np.array([0.3, 0.0]))
    assert ell.tolist() == [1.0, 2.0] and not q.any()
    lb = lift_space_time(additive_bm((0, 0, 1)))
    _, q, _ = eval_characteristics(lb, 0.0, np.array([1.5, 0.0]))
    np.testing.assert_allclose(q, [[0, 0], [0, 3.0]])


def test_parse_minimal_drift():
    m = loads("drift: 2\n")
    assert m.dimension == 1
    assert eval_characteristics(m, 0, np.zeros(1))[0].tolist() == [2.0]


@pytest.mark.parametrize(
    "doc, path, text",
    [
        ("jumps: {family: symmetric-alpha-stable, alpha: 2.5}", "jumps.alpha", "alpha outside (0,2)"),
        ("jumps: {family: gamma}", "jumps.family", "unknown family"),
        ("jumps: {family: compound-poisson, law: {kind: gaussian, std: 1}}", "jumps.intensity", "missing"),
        ("catalog: nope", "catalog.tag", "unknown family"),
        ("drift: {kind: constant}", "drift.value", "missing"),
        ("colour: red", "colour", "unknown"),
    ],
)
def test_parse_errors_name_path(doc, path, text):
    with pytest.raises(ModelParseError) as exc:
        loads(doc)
    assert exc.value.path == path
    assert text in str(exc.value)


@pytest.mark.parametrize("name", sorted(catalog_models()))
def test_round_trip_catalog(name):
    m = catalog_models()[name]
    text = dumps(m)
    assert dumps(loads(text)) == text
    assert loads(text) == m
    lifted = lift_space_time(m)
    assert dumps(loads(dumps(lifted))) == dumps(lifted)


def test_round_trip_tabulated_and_expression():
    from dataclasses import replace

    q = CoefficientField.tabulated([[0.0, 1.0, 2.0], [-1.0, 1.0]], np.ones((3, 2, 1, 1)), dimension=1, shape=(1, 1))
    m = replace(alpha_stable(0.7, CoefficientField.expression("1 + a*abs(x[0])", parameters={"a": 0.5})), diffusion=q)
    assert dumps(loads(dumps(m))) == dumps(m)


def test_model_hash_stable():
    assert additive_bm().hash() == additive_bm().hash()
    assert additive_bm().hash() != pure_drift().hash()


@settings(max_examples=50, deadline=None)
@given(
    st.floats(0.05, 5), st.floats(1, 3), st.sampled_from(["piecewise-linear", "smooth-bump"]),
    st.floats(0, 10),
)
def test_truncation_sandwich(r, ratio, shape, rho):
    chi = TruncationSpec(r, r * ratio, shape)
    v = float(chi.radial(rho))
    if rho <= r:
        assert v == 1.0
    elif rho >= 2 * r * ratio:
        assert v == 0.0
    else:
        assert 0.0 <= v <= 1.0
