import math

import numpy as np
import pytest

from mechfol.acceptance import linear_oracle_interval
from mechfol.czindex import (IndexError_, conley_zehnder_index, index_report, iterate_interval,
                             mu_from_interval, neck_rotation_experiment, rotation_number,
                             winding_interval)
from mechfol.dynamics import integrate_flow
from mechfol.models import build_model
from mechfol.orbits import lyapunov_seed, refine_periodic_orbit

SQ2 = math.sqrt(2.0)


def oracle_mu(lo, hi, eps=1e-5):
    # independent restatement: even if an integer sits strictly inside I - eps
    lo, hi = lo - eps, hi - eps
    for k in range(math.floor(lo), math.ceil(hi) + 1):
        if lo < k < hi:
            return 2 * k
    return 2 * math.floor(lo) + 1


def test_resonant_oscillator_circle():
    m = build_model("harmonic", {"w1": 1.0, "w2": 2.0})
    I = winding_interval(m, ([0.0, 0.5, 0.0, 0.0], math.pi))
    assert I.lower == pytest.approx(1.5, abs=1e-9) and I.upper == pytest.approx(1.5, abs=1e-9)
    assert conley_zehnder_index(I).mu == 3


def test_quadratic_lyapunov_interval(quad, quad_saddle):
    seed, T = lyapunov_seed(quad, quad_saddle, 0.01)
    I = winding_interval(quad, (seed.w, T))
    assert I.lower < 1.0 < I.upper
    assert 0 < I.length < 0.5
    assert conley_zehnder_index(I).mu == 2
    assert I.doubling_shift < 1e-6


@pytest.mark.parametrize("interval,mu,deg", [((1.5, 1.5), 3, False), ((0.9, 1.1), 2, False),
                                             ((3.0, 3.0), 5, True), ((2.0, 2.2), 4, True),
                                             ((-0.2, 0.1), 0, False), ((0.3, 0.45), 1, False)])
def test_mu_cases(interval, mu, deg):
    r = conley_zehnder_index(interval)
    assert r.mu == mu == oracle_mu(*interval)
    assert r.degenerate is deg
    assert r.stable
    assert set(r.mu_by_eps) == {1e-4, 1e-5, 1e-6}


def test_mu_rejects_bad_intervals():
    with pytest.raises(IndexError_):
        conley_zehnder_index((0.1, 0.7))
    with pytest.raises(IndexError_):
        conley_zehnder_index((1.0, 0.9))
    with pytest.raises(IndexError_):
        conley_zehnder_index((1.5, 1.5), eps=1e-2)


def test_mu_from_interval_agrees_with_oracle(rng):
    for _ in range(2000):
        lo = rng.uniform(-3, 5)
        hi = lo + rng.uniform(0, 0.49)
        assert mu_from_interval(lo, hi, 1e-5) == oracle_mu(lo, hi)


def test_lyapunov_rotation_number_is_one(quad, quad_saddle):
    seed, T = lyapunov_seed(quad, quad_saddle, 0.01)
    r = rotation_number(quad, (seed.w, T), k_max=100)
    assert r.rho == pytest.approx(1.0, abs=0.02)
    assert r.converged


def test_minimum_orbit_rotation_exceeds_one():
    m = build_model("harmonic", {"w1": 1.0, "w2": SQ2})
    r = rotation_number(m, ([0.5, 0.0, 0.0, 0.0], 2 * math.pi), k_max=200)
    assert r.rho > 1
    assert r.rho == pytest.approx((1 + SQ2) / 1, abs=0.01)


def test_iterates_follow_irrational_rotation():
    # along the x1 circle the transverse rotation per period is 1 + sqrt 2
    m = build_model("harmonic", {"w1": 1.0, "w2": SQ2})
    orbit = ([0.5, 0.0, 0.0, 0.0], 2 * math.pi)
    I = winding_interval(m, orbit)
    nu = 1 + SQ2
    for k in range(1, 11):
        J = iterate_interval(I, k)
        assert conley_zehnder_index(J).mu == 2 * math.floor(k * nu) + 1
        if k in (1, 3, 7):
            D = winding_interval(m, (orbit[0], k * orbit[1]))
            assert J.lower == pytest.approx(D.lower, abs=1e-8)
            assert J.upper == pytest.approx(D.upper, abs=1e-8)


def test_index_is_time_shift_invariant(hh, v1):
    E = 1 / 6 + 1e-3
    seed, T = lyapunov_seed(hh, v1, 1e-3)
    o = refine_periodic_orbit(hh, seed, T, energy=E)
    tr = integrate_flow(hh, o.initial_state, (0, o.period), 1e-13,
                        t_eval=np.linspace(0, o.period, 9)[:-1])
    mus = {conley_zehnder_index(winding_interval(hh, (w, o.period))).mu for w in tr.states}
    assert mus == {2}


@pytest.mark.parametrize("w1,w2,k", [(1.0, 1.7, 1), (1.3, 0.6, 2), (0.8, 2.3, 1)])
def test_agrees_with_linear_oracle(w1, w2, k):
    m = build_model("harmonic", {"w1": w1, "w2": w2})
    r = 0.6
    w0 = np.array([r, 0.0, 0.0, 0.0]) if k == 1 else np.array([0.0, r, 0.0, 0.0])
    T = 2 * math.pi / (w1 if k == 1 else w2)
    I = winding_interval(m, (w0, T))
    lo, hi = linear_oracle_interval(m, w0, T)
    assert I.lower == pytest.approx(lo, abs=1e-3) and I.upper == pytest.approx(hi, abs=1e-3)
    assert conley_zehnder_index(I).mu == oracle_mu(lo, hi)


def test_open_orbit_is_rejected(hh):
    with pytest.raises(IndexError_):
        winding_interval(hh, ([0.1, 0.0, 0.0, 0.2], 1.0))
    with pytest.raises(IndexError_):
        winding_interval(hh, ([0.1, 0.0, 0.0, 0.2], -1.0))
    with pytest.raises(IndexError_):
        winding_interval(hh, ([0.0, 0.0, 0.0, 0.0], 1.0))


def test_index_report_fields(quad, quad_saddle):
    seed, T = lyapunov_seed(quad, quad_saddle, 0.01)
    I = winding_interval(quad, (seed.w, T))
    rep = index_report("lyap", I, conley_zehnder_index(I))
    assert set(rep) == {"orbit_id", "I", "mu", "degenerate", "rho", "rho_error"}
    assert rep["mu"] == 2 and rep["orbit_id"] == "lyap"


# ---------------------------------------------------------------------------
# neck passage


def test_neck_transit_time_is_exact_for_quadratic(quad, quad_saddle):
    # x1(t) = beta sinh t reaches the entry section |x1| = 1 at t = asinh(1/beta)
    betas = [10.0**-k for k in range(1, 8)]
    tab = neck_rotation_experiment(quad, quad_saddle, [0.5], betas, angles=False)
    for r in tab.runs:
        assert r.transit_time == pytest.approx(2 * math.asinh(1 / r.approach), abs=1e-7)


def test_neck_gain_is_monotone_and_bounded(quad, quad_saddle):
    betas = [10.0**-k for k in range(1, 10, 2)]
    tab = neck_rotation_experiment(quad, quad_saddle, [0.5], betas)
    dmin = [r.delta_min for r in tab.runs]
    assert all(b > a for a, b in zip(dmin, dmin[1:]))
    assert tab.C <= 2 * math.pi


def test_neck_transit_time_grows_like_log(quad, quad_saddle):
    dE = np.array([10.0**-k for k in range(2, 9)])
    tab = neck_rotation_experiment(quad, quad_saddle, quad_saddle.value + dE, angles=False)
    T = np.array([r.transit_time for r in tab.runs])
    slope = np.polyfit(np.abs(np.log(dE)), T, 1)[0]
    assert slope == pytest.approx(1.0, abs=1e-3)


def test_neck_errors(quad, quad_saddle):
    with pytest.raises(IndexError_):
        neck_rotation_experiment(quad, quad_saddle, [-0.1])
    with pytest.raises(IndexError_):
        neck_rotation_experiment(quad, quad_saddle, [0.01], [1.0])
    with pytest.raises(ValueError):
        neck_rotation_experiment(quad, quad_saddle, [0.01], kind="loop")


def test_neck_table_csv(tmp_path, quad, quad_saddle):
    tab = neck_rotation_experiment(quad, quad_saddle, [0.1], [1e-2, 1e-3])
    tab.to_csv(tmp_path / "n.csv")
    data = np.loadtxt(tmp_path / "n.csv", delimiter=",", skiprows=1)
    assert data.shape == (2, 6)
    assert tab.to_dict()["C"] == pytest.approx(tab.C)
