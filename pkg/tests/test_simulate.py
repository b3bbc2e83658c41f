import io

import numpy as np
import pytest
from scipy import stats

from nhito.catalog import additive_bm, alpha_stable, compound_poisson, det_jump_unit, jump_diffusion, pure_drift
from nhito.model import CoefficientField, JumpLaw
from nhito.simulate import (
    SimConfig,
    positive_stable,
    psd_factor,
    read_path_dump,
    rotational_stable,
    running_sup,
    simulate_path,
    simulate_paths,
    simulate_stopped,
    symmetric_stable,
    time_grid,
    write_path_dump,
)
from oracles import bm_abs_sup_cdf


def test_pure_drift_path():
    p = simulate_path(pure_drift(1.0), 0.0, 0.0, SimConfig(0.01, 1.0))
    assert p.endpoint[0] == pytest.approx(1.0, abs=1e-12)
    assert p.jump_marks == []
    assert running_sup(p, 0.7) == pytest.approx(0.7, abs=1e-12)


def test_det_jump_path():
    p = simulate_path(det_jump_unit(), 0.0, 0.0, SimConfig(0.03, 2.0))
    before = p.times < 1.0
    assert np.all(p.states[before] == 0.0)
    assert np.all(p.states[~before] == 1.0)
    assert 1.0 in p.times
    assert running_sup(p, 2.0) == 1.0
    assert running_sup(p, 0.99) == 0.0


def test_bm_terminal_variance():
    b = simulate_paths(additive_bm((0, 1)), 0, 0, SimConfig(0.05, 1.0, seed=3), 100_000)
    assert np.var(b.endpoints[:, 0]) == pytest.approx(1.0, abs=0.02)


def test_time_dependent_variance():
    # sigma^2(t) = t + t^2/2, so Var(X_2 - X_1) = sigma^2(2) - sigma^2(1)
    b = simulate_paths(additive_bm((0, 1, 0.5)), 1.0, 0, SimConfig(0.01, 1.0, seed=4), 50_000)
    exact = (2 + 2) - (1 + 0.5)
    assert np.var(b.endpoints[:, 0]) == pytest.approx(exact, rel=0.03)


def test_step_halving_variance():
    m = additive_bm((0, 1, 0.5))
    v = [np.var(simulate_paths(m, 0, 0, SimConfig(h, 1.0, seed=5), 100_000).endpoints) for h in (0.02, 0.01)]
    se = 1.5 * np.sqrt(2 / 100_000)
    assert abs(v[0] - v[1]) < 3 * se * np.sqrt(2)


def test_determinism():
    m = jump_diffusion()
    cfg = SimConfig(0.01, 1.0, seed=11, stream_index=2)
    a, b = simulate_path(m, 0.3, 0.5, cfg), simulate_path(m, 0.3, 0.5, cfg)
    assert a.states.tobytes() == b.states.tobytes()
    assert len(a.jump_marks) == len(b.jump_marks)
    c = simulate_paths(m, 0, 0, cfg, 10_000, checkpoints=(0.5,))
    d = simulate_paths(m, 0, 0, cfg, 10_000, checkpoints=(0.5,), workers=2)
    assert c.endpoints.tobytes() == d.endpoints.tobytes()
    assert c.sups.tobytes() == d.sups.tobytes()


def test_stream_independence():
    m, n = additive_bm(), 20_000
    a = simulate_paths(m, 0, 0, SimConfig(0.1, 1.0, seed=1, stream_index=0), n).endpoints[:, 0]
    b = simulate_paths(m, 0, 0, SimConfig(0.1, 1.0, seed=1, stream_index=1), n).endpoints[:, 0]
    assert abs(np.corrcoef(a, b)[0, 1]) < 3 / np.sqrt(n)
    assert a.tobytes() != b.tobytes()


def test_sup_matches_reflection_oracle():
    cfg = SimConfig(1 / 4096, 1.0, seed=2, record_mode="endpoint-and-sup")
    sups = simulate_paths(additive_bm(), 0, 0, cfg, 10_000).sups[:, -1]
    res = stats.kstest(sups, lambda a: bm_abs_sup_cdf(a))
    # grid sups sit slightly below the continuous ones; keep the KS test honest at 1%
    assert res.pvalue > 0.01


def test_stopped_examples():
    end, exited = simulate_stopped(pure_drift(1.0), 0, 0, 0.5, 1.0, SimConfig(1 / 64, 1.0))
    assert exited and end[0] == pytest.approx(0.5, abs=1 / 64 + 1e-12)
    end, exited = simulate_stopped(det_jump_unit(), 0, 0, 0.5, 0.3, SimConfig(0.01, 1.0))
    assert not exited and end[0] == 0.0


def test_stopped_consistency_with_unstopped():
    m = additive_bm()
    cfg = SimConfig(1 / 64, 1.0, seed=9)
    end, exited = simulate_stopped(m, 0, 0, np.inf, 1.0, cfg)
    path = simulate_path(m, 0, 0, cfg)
    assert not exited and end.tobytes() == path.endpoint.tobytes()


def test_stopped_large_radius_law():
    m = additive_bm()
    cfg = SimConfig(1 / 64, 1.0, seed=1)
    ends, _ = simulate_stopped(m, 0, 0, 1e6, 1.0, cfg, n_paths=10_000)
    free = simulate_paths(m, 0, 0, SimConfig(1 / 64, 1.0, seed=1, stream_index=7), 10_000).endpoints
    assert stats.ks_2samp(ends[:, 0], free[:, 0]).pvalue > 0.01


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_symmetric_stable_sampler(alpha):
    rng = np.random.default_rng(0)
    z = symmetric_stable(rng, alpha, 20_000)
    # unit-scale symbol |xi|^alpha corresponds to scipy's S1 scale 1
    res = stats.kstest(z, stats.levy_stable(alpha, 0.0).cdf)
    assert res.pvalue > 0.01


def test_stable_cf_matches_symbol():
    for alpha in (0.5, 1.0, 1.5):
        b = simulate_paths(alpha_stable(alpha, 0.7), 0, 0, SimConfig(0.1, 1.0, seed=1), 50_000).endpoints[:, 0]
        for xi in (0.5, 1.0, 2.0):
            emp = np.mean(np.cos(xi * b))
            assert emp == pytest.approx(np.exp(-(0.7 * xi) ** alpha), abs=4 / np.sqrt(50_000))


def test_positive_stable_laplace():
    rng = np.random.default_rng(1)
    for beta in (0.25, 0.5, 0.75):
        s = positive_stable(rng, beta, 50_000)
        assert np.mean(np.exp(-s)) == pytest.approx(np.exp(-1.0), abs=0.005)


def test_rotational_stable_cf():
    rng = np.random.default_rng(2)
    z = rotational_stable(rng, 1.2, 50_000, 2)
    for xi in ([1.0, 0.0], [0.6, 0.8], [0.0, -1.5]):
        xi = np.array(xi)
        assert np.mean(np.cos(z @ xi)) == pytest.approx(np.exp(-np.linalg.norm(xi) ** 1.2), abs=0.01)


def test_state_dependent_stable_scale_cf():
    # scale depending on x only far from the start behaves like the constant one over short times
    gamma = CoefficientField.expression("1 + 0.0*x[0]", dimension=1)
    b = simulate_paths(alpha_stable(1.5, gamma), 0, 0, SimConfig(0.01, 0.5, seed=3), 20_000).endpoints[:, 0]
    assert np.mean(np.cos(b)) == pytest.approx(np.exp(-0.5), abs=0.02)


def test_compound_poisson_moments():
    m = compound_poisson(2.0, JumpLaw.two_point(1.0))
    b = simulate_paths(m, 0, 0, SimConfig(0.01, 1.0, seed=5), 50_000).endpoints[:, 0]
    assert np.var(b) == pytest.approx(2.0, rel=0.03)
    # time-varying intensity: E N = int_0^1 (1 + s) ds
    rate = CoefficientField.time_polynomial([1.0, 1.0])
    m2 = compound_poisson(rate, JumpLaw.two_point(1.0))
    b2 = simulate_paths(m2, 0, 0, SimConfig(0.01, 1.0, seed=6), 50_000).endpoints[:, 0]
    assert np.var(b2) == pytest.approx(1.5, rel=0.03)


def test_psd_factor():
    q = np.array([[2.0, 1.0], [1.0, 2.0]])
    f = psd_factor(q)
    np.testing.assert_allclose(f @ f.T, q, atol=1e-12)
    f = psd_factor(np.array([[1.0, 0], [0, -1e-14]]))
    assert np.all(np.isfinite(f))


def test_time_grid_marks():
    g = time_grid(0.5, 2.0, 0.3, marks=(0.5, 1.0))
    assert g[0] == 0.5 and g[-1] == 2.5
    assert 1.0 in g and 1.5 in g
    assert np.all(np.diff(g) <= 0.3 + 1e-12)


def test_sim_config_validation():
    with pytest.raises(ValueError):
        SimConfig(0.0, 1.0)
    with pytest.raises(ValueError):
        SimConfig(2.0, 1.0)
    with pytest.raises(ValueError):
        SimConfig(0.1, 1.0, record_mode="all")


def test_path_dump_round_trip():
    m = jump_diffusion()
    cfg = SimConfig(0.05, 1.0, seed=3)
    paths = [simulate_path(m, 0, 0.2, SimConfig(0.05, 1.0, seed=3, stream_index=i)) for i in range(3)]
    buf = io.BytesIO()
    write_path_dump(buf, m, cfg, paths)
    first = buf.getvalue()
    buf.seek(0)
    header, recs = read_path_dump(buf)
    assert header["model_hash"] == m.hash() and header["seed"] == 3
    for p, (tau, times, states, marks) in zip(paths, recs):
        np.testing.assert_array_equal(times, p.times)
        np.testing.assert_array_equal(states, p.states)
        assert len(marks) == len(p.jump_marks)
    again = io.BytesIO()
    write_path_dump(again, m, cfg, paths)
    assert again.getvalue() == first
