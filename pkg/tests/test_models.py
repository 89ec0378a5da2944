import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mechfol.hill import extract_hill_component, find_critical_points
from mechfol.models import (CapParams, DomainError, ModelError, PhaseState, ZOO_NAMES,
                            antipodal_quotient, build_model, cap_potential,
                            cap_profile_critical_points, check_cut_function, cut_function,
                            elliptic_to_cartesian, euler_hamiltonian, euler_regularized, evaluate,
                            from_rescaled, load_model, model_from_config, model_to_config,
                            rescale, save_model, to_rescaled)

from conftest import SEED_DIR

ZOO = [n for n in ZOO_NAMES if n != "custom"]


def _in_domain(model, u):
    (a1, b1), (a2, b2) = model.domain
    lo = np.array([a1, a2]) + 0.05 * np.array([b1 - a1, b2 - a2])
    hi = np.array([b1, b2]) - 0.05 * np.array([b1 - a1, b2 - a2])
    return lo + (hi - lo) * u


def test_hh_saddle_value(hh):
    assert hh.V(np.array([0.0, 1.0])) == pytest.approx(1 / 6, abs=1e-15)


def test_chemical_origin(chemical):
    assert chemical.V(np.zeros(2)) == 0.0
    assert np.all(chemical.grad(np.zeros(2)) == 0.0)


def test_frozen_hill_saddle_value():
    # 4 r^2 - 8 r^6 at r = 6^(-1/4) reduces to 8 / (3 sqrt 6) = 4 sqrt(6) / 9
    m = build_model("frozen-hill")
    assert m.V(np.array([6 ** -0.25, 0.0])) == pytest.approx(4 * math.sqrt(6) / 9, abs=1e-14)


def test_stark_potential_closed_form(stark):
    x = np.array([0.3, -0.7])
    expected = 4 * (0.3**2 - 0.5 * 0.3**4) + 4 * (0.7**2 + 0.5 * 0.7**4)
    assert stark.V(x) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("name,params", [
    ("nope", {}), ("stark", {"eps": 0.0}), ("stark", {"eps": -1.0}),
    ("euler-regularized", {"mu": 1.5, "c": -0.5}), ("euler-regularized", {"mu": 0.0, "c": -0.5}),
    ("chemical", {"alpha": "x", "beta": 1.0}), ("stark", {"eps": float("nan")}),
])
def test_build_model_rejects(name, params):
    with pytest.raises(ModelError):
        build_model(name, params)


def test_evaluate_hh_saddle(hh):
    H, g, Hs = evaluate(hh, PhaseState(np.array([0.0, 1.0]), np.zeros(2)), order=2)
    assert H == pytest.approx(1 / 6)
    assert np.allclose(g, 0.0, atol=1e-15)
    # d2/dx1^2 = 1 + 2 x2, d2/dx2^2 = 1 - 2 x2, mixed 2 x1
    assert np.allclose(Hs, np.diag([3.0, -1.0]), atol=1e-14)


def test_evaluate_orders_and_domain(hh):
    s = PhaseState(np.array([0.1, 0.2]), np.array([0.3, 0.4]))
    H, g, Hs = evaluate(hh, s, 0)
    assert H == pytest.approx(0.125 + float(hh.V(s.x)))
    assert g is None and Hs is None
    with pytest.raises(ValueError):
        evaluate(hh, s, 3)
    with pytest.raises(DomainError):
        evaluate(hh, PhaseState(np.array([9.0, 0.0]), np.zeros(2)), 1)
    with pytest.raises(ValueError):
        PhaseState(np.array([np.nan, 0.0]), np.zeros(2))


@pytest.mark.parametrize("name", ZOO)
def test_derivatives_match_finite_differences(name, rng):
    m = build_model(name)
    x = _in_domain(m, rng.random((1000, 2)))
    h = 1e-5
    e = np.eye(2)
    fd = np.stack([(m.V(x + h * e[k]) - m.V(x - h * e[k])) / (2 * h) for k in range(2)], -1)
    g = m.grad(x)
    scale = np.maximum(np.linalg.norm(g, axis=1), 1.0)
    assert np.max(np.linalg.norm(fd - g, axis=1) / scale) < 1e-6
    fdh = np.stack([(m.grad(x + h * e[k]) - m.grad(x - h * e[k])) / (2 * h) for k in range(2)], -2)
    H = m.hess(x)
    hs = np.maximum(np.linalg.norm(H, axis=(1, 2)), 1.0)
    assert np.max(np.linalg.norm(fdh - H, axis=(1, 2)) / hs) < 1e-6
    assert np.all(H[:, 0, 1] == H[:, 1, 0])


@pytest.mark.parametrize("name", [n for n in ZOO if build_model(n).decoupled is not None])
def test_decoupled_split(name, rng):
    m = build_model(name)
    f1, f2 = m.decoupled
    x = _in_domain(m, rng.random((500, 2)))
    assert np.max(np.abs(m.V(x) - f1.V(x[:, 0]) - f2.V(x[:, 1]))) < 1e-13
    assert np.max(np.abs(m.hess(x)[:, 0, 1])) < 1e-12


def test_hh_is_not_decoupled(hh):
    assert hh.decoupled is None


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(ZOO), st.floats(0, 1), st.floats(0, 1))
def test_symmetries_preserve_potential(name, u1, u2):
    m = build_model(name)
    x = _in_domain(m, np.array([u1, u2]))
    for s in m.symmetries:
        xs = s.apply(x)
        if m.contains(xs):
            assert m.V(xs) == pytest.approx(m.V(x), abs=1e-12)


def test_euler_symmetric_case():
    m = euler_regularized(0.5, -1.0)
    f2 = m.decoupled[1]
    # V2 = -cos^2 v: critical points with V2' = sin 2v = 0, maxima at pi/2, 3pi/2
    for v in (math.pi / 2, 3 * math.pi / 2):
        assert abs(f2.dV(v)) < 1e-15
        assert f2.d2V(v) < 0
        assert f2.V(v) == pytest.approx(0.0, abs=1e-15)
    assert m.periodic == (False, True)


def test_euler_k2_saddle_value():
    mu, c = 0.25, -0.5
    f2 = euler_regularized(mu, c).decoupled[1]
    v = math.acos(-(2 * mu - 1) / (2 * c))
    assert abs(f2.dV(v)) < 1e-15
    assert f2.V(v) == pytest.approx(-(2 * mu - 1) ** 2 / (4 * c), abs=1e-15)
    assert f2.V(v) == pytest.approx(1 / 8)


def test_euler_regularised_zero_level_matches_cartesian_energy(rng):
    # K = 4 |v|^2-weighted: on K = 0 the Cartesian energy equals c off collisions
    mu, c = 0.3, -0.7
    m = euler_regularized(mu, c)
    for _ in range(20):
        u, v = rng.uniform(0.2, 1.5), rng.uniform(0.2, 2.8)
        V = float(m.V(np.array([u, v])))
        ang = rng.uniform(0, 2 * math.pi)
        r = math.sqrt(-2 * V) if V < 0 else None
        if r is None:
            continue
        pu, pv = r * math.cos(ang), r * math.sin(ang)
        s = elliptic_to_cartesian(u, v, pu, pv)
        assert euler_hamiltonian(mu, s) == pytest.approx(c, abs=1e-10)


def test_elliptic_coordinates():
    assert np.allclose(elliptic_to_cartesian(0.0, 0.0).x, [1.0, 0.0])
    assert np.allclose(elliptic_to_cartesian(0.0, math.pi).x, [-1.0, 0.0])
    assert np.allclose(elliptic_to_cartesian(1.0, math.pi / 2).x, [0.0, math.sinh(1.0)], atol=1e-15)
    with pytest.raises(DomainError):
        elliptic_to_cartesian(0.0, 0.0, 1.0, 0.0)


def test_antipodal_quotient():
    w = np.array([0.3, 4.0, 0.1, -0.2])
    q = antipodal_quotient(w)
    assert 0 <= q[1] < math.pi
    assert np.allclose(antipodal_quotient(-w), q)


def test_config_round_trip(tmp_path):
    m = build_model("stark", {"eps": 0.25})
    p = tmp_path / "m.json"
    save_model(m, p)
    cfg = json.loads(p.read_text())
    assert cfg == model_to_config(m)
    back = load_model(p)
    assert model_to_config(back) == cfg
    x = np.array([0.2, 0.4])
    assert back.V(x) == m.V(x)
    with pytest.raises(ModelError):
        model_from_config({"params": {}})


def test_custom_model_finite_differences():
    m = build_model("custom", {"potential": lambda x: 0.5 * (x[..., 0] ** 2 + 3 * x[..., 1] ** 2)})
    x = np.array([0.4, -0.3])
    assert np.allclose(m.grad(x), [0.4, -0.9], atol=1e-8)
    assert np.allclose(m.hess(x), np.diag([1.0, 3.0]), atol=1e-5)
    with pytest.raises(ModelError):
        build_model("custom", {})


# ---------------------------------------------------------------------------
# cut function, capping, rescaling


def test_cut_function_invariants():
    rep = check_cut_function()
    assert rep["ok"]
    assert rep["f_near_2"] > 1e6
    assert np.all(cut_function(np.linspace(-5, 1, 50)) == 0.0)


def test_cut_function_derivatives_by_differences():
    t = np.linspace(1.05, 1.95, 50)
    h = 1e-6
    for k in range(3):
        fd = (cut_function(t + h, k) - cut_function(t - h, k)) / (2 * h)
        assert np.allclose(fd, cut_function(t, k + 1), rtol=1e-5)


def test_cap_profile_has_unique_minimum():
    cps = cap_profile_critical_points(-1.0)
    assert len(cps) == 1
    t, kind = cps[0]
    assert kind == "minimum" and 1.0 < t < 2.0


def test_capped_quadratic_gains_one_minimum(quad, quad_saddle):
    capped = cap_potential(quad, CapParams(quad_saddle, 1.0, side=1))
    cps = find_critical_points(capped, ((-1.0, 1.999), (-1.0, 1.0)))
    mins = [c for c in cps if c.kind == "minimum"]
    assert len(mins) == 1
    assert 1.0 < mins[0].location[0] < 2.0 and abs(mins[0].location[1]) < 1e-10


def test_cap_is_local(hh, v1, rng):
    cap = CapParams.away_from(hh, v1, 1e-2, (0.0, 0.0))
    capped = cap_potential(hh, cap)
    x = rng.uniform(-1.2, 0.9, (2000, 2))
    e = cap.side * np.array(capped.extras["cap_axis"])
    safe = (x - v1.location) @ (e / cap.side) * cap.side / 0.1 <= 1.0
    assert np.array_equal(capped.V(x[safe]), hh.V(x[safe]))


def test_hh_cap_component_is_small(hh, v1):
    eps = 1e-2
    cap = CapParams.away_from(hh, v1, eps, (0.0, 0.0))
    capped = cap_potential(hh, cap)
    e = np.array(capped.extras["cap_axis"])
    p = v1.location + 1.5 * math.sqrt(eps) * e
    assert capped.V(p) < 1 / 6
    comp = extract_hill_component(capped, 1 / 6, p, direction=SEED_DIR, max_step=0.002)
    assert np.max(np.linalg.norm(comp.boundary - v1.location, axis=1)) < 0.2


def test_cap_rejects_non_saddle(hh):
    from mechfol.hill import refine_critical_point
    m0 = refine_critical_point(hh, (0.0, 0.0))
    with pytest.raises(ModelError):
        cap_potential(hh, CapParams(m0, 1e-2))
    with pytest.raises(ModelError):
        CapParams(m0, 0.0)


def test_rescale_quadratic_is_identity(quad, quad_saddle, rng):
    for eps in (1e-3, 0.5):
        r = rescale(quad, quad_saddle, eps)
        x = rng.uniform(-1, 1, (100, 2))
        assert np.allclose(r.V(x), quad.V(x), atol=1e-13)


def test_rescale_hh_converges(hh, v1, rng):
    r = rescale(hh, v1, 1e-4)
    a, b = r.extras["a"], r.extras["b"]
    x = rng.uniform(-1, 1, (4000, 2))
    x = x[np.linalg.norm(x, axis=1) <= 1]
    assert np.max(np.abs(r.V(x) - 0.5 * (a * x[:, 0] ** 2 + b * x[:, 1] ** 2))) < 0.1


def test_rescale_consistency(hh, v1, rng):
    eps = 1e-3
    r = rescale(hh, v1, eps)
    w = np.column_stack([v1.location + rng.uniform(-0.05, 0.05, (50, 2)), rng.normal(size=(50, 2))])
    wh = to_rescaled(r, w)
    Hh = 0.5 * np.sum(wh[:, 2:] ** 2, axis=1) + r.V(wh[:, :2])
    H = 0.5 * np.sum(w[:, 2:] ** 2, axis=1) + hh.V(w[:, :2])
    assert np.allclose(eps * Hh, H - v1.value, atol=1e-12)
    assert np.allclose(from_rescaled(r, wh), w, atol=1e-14)
    with pytest.raises(ModelError):
        rescale(hh, v1, 0.0)
