import json
import math

import numpy as np
import pytest

from mechfol.acceptance import counterexample_model
from mechfol.decoupled import (FoliationError, classify_product_orbit, check_foliation_hypotheses,
                               factor_orbit, gradient_leaves, leaf_points, leaf_residual,
                               leaf_separation, matching_energy, product_orbit, split_decoupled,
                               euler_regime)
from mechfol.models import ModelError, build_model, euler_regularized


@pytest.fixture(scope="module")
def stark_fol(stark):
    f1, f2 = split_decoupled(stark)
    return gradient_leaves(f1, 2.2, factor2=f2)


def _locs(cps, kind):
    return sorted(c.location for c in cps if c.kind == kind)


def test_stark_split(stark):
    f1, f2 = split_decoupled(stark)
    # eps = 1/2: V1 = 4(t^2 - t^4/2) has maxima at +-(2 eps)^(-1/2) = +-1
    assert np.allclose(_locs(f1.critical_points, "maximum"), [-1.0, 1.0], atol=1e-14)
    assert _locs(f1.critical_points, "minimum") == [0.0]
    assert [c.kind for c in f2.critical_points] == ["minimum"]
    assert f2.min_value() == 0.0


def test_chemical_split(chemical):
    f1, f2 = split_decoupled(chemical)
    mx = [c for c in f1.critical_points if c.kind == "maximum"]
    assert len(mx) == 1 and mx[0].location == 0.0 and mx[0].value == 0.0
    assert np.allclose(_locs(f1.critical_points, "minimum"), [-1.0, 1.0], atol=1e-14)


def test_euler_split():
    mu, c = 0.25, -0.5
    m = euler_regularized(mu, c)
    f1, f2 = split_decoupled(m)
    assert f2.periodic and not f1.periodic
    v = math.acos(-(2 * mu - 1) / (2 * c))
    assert any(abs(cp.location - v) < 1e-10 and cp.kind == "maximum" for cp in f2.critical_points)
    x = np.array([[0.4, 1.1], [0.9, 2.5]])
    assert np.allclose(m.V(x), f1.factor.V(x[:, 0]) + f2.factor.V(x[:, 1]), atol=1e-14)


def test_split_rejects_coupled(hh):
    with pytest.raises(FoliationError):
        split_decoupled(hh)


def test_factor_orbit_period_linear():
    m = build_model("harmonic", {"w1": 1.0, "w2": 3.0})
    f1, f2 = split_decoupled(m)
    o = factor_orbit(f2, 0.5)
    assert o.period == pytest.approx(2 * math.pi / 3, abs=1e-10)
    assert o.turning[1] == pytest.approx(-o.turning[0]) == pytest.approx(math.sqrt(1.0) / 3)
    with pytest.raises(FoliationError):
        factor_orbit(f2, -0.1)


@pytest.mark.parametrize("name,params,e2", [("stark", {"eps": 0.5}, 0.2), ("stark", {"eps": 0.3}, 0.5),
                                            ("chemical", {"alpha": 1.0, "beta": 1.0}, 0.3)])
def test_product_classes_validate(name, params, e2):
    m = build_model(name, params)
    f1, f2 = split_decoupled(m)
    circle = factor_orbit(f2, e2)
    for cp in f1.critical_points:
        cls = classify_product_orbit(cp, circle, model=m, validate=True)
        assert cls.consistent, cls.to_dict()
        if cp.kind == "maximum":
            assert cls.kind == "max x orbit" and cls.validated["mu"] == 2
        else:
            assert cls.kind == "min x orbit" and cls.validated["mu"] >= 3


def test_matching_energy_round_trip(stark):
    _, f2 = split_decoupled(stark)
    # the quartic factor hardens, so the period falls with energy
    e = matching_energy(f2, 2.0, bracket=(1e-3, 5.0))
    assert factor_orbit(f2, e).period == pytest.approx(2.0, abs=1e-10)


@pytest.mark.parametrize("w2,rho", [(1.0, 2.0), (2.0, 3.0)])
def test_orbit_x_orbit_rotation(w2, rho):
    # rho adds over the factors; with w2 = 2 the closed product covers factor 2 twice
    m = build_model("harmonic", {"w1": 1.0, "w2": w2})
    f1, f2 = split_decoupled(m)
    a, b = factor_orbit(f1, 0.1), factor_orbit(f2, 0.2)
    cls = classify_product_orbit(a, b, model=m, validate=True, k_max=400)
    assert cls.kind == "orbit x orbit"
    assert cls.validated["rho"] == pytest.approx(rho, abs=0.01)
    assert cls.validated["mu"] >= 3 and cls.consistent


def test_product_orbit_errors(stark):
    f1, f2 = split_decoupled(stark)
    with pytest.raises(FoliationError):
        product_orbit(stark, f1.critical_points[0], f2.critical_points[0])
    with pytest.raises(FoliationError):
        classify_product_orbit(f1.critical_points[0], f2.critical_points[0])
    m = build_model("harmonic", {"w1": 1.0, "w2": math.sqrt(2)})
    g1, g2 = split_decoupled(m)
    with pytest.raises(FoliationError):
        product_orbit(m, factor_orbit(g1, 0.1), factor_orbit(g2, 0.1))
    with pytest.raises(ValueError):
        classify_product_orbit(f1.critical_points[0], factor_orbit(f2, 0.2), validate=True)


def test_hypotheses_examples():
    assert check_foliation_hypotheses(build_model("stark", {"eps": 0.5}), 2.2)["pass"]
    assert check_foliation_hypotheses(build_model("frozen-hill"), 1.1)["pass"]
    assert check_foliation_hypotheses(build_model("chemical"), 0.1)["pass"]
    rep = check_foliation_hypotheses(counterexample_model(), 0.3)
    assert not rep["pass"]
    wit = [w for c in rep["components"] for w in c["witnesses"]]
    assert any(w["factor"] == 2 and abs(w["location"]) < 1e-12 for w in wit)


def test_hypotheses_use_highest_saddle_level(stark):
    rep = check_foliation_hypotheses(stark, 2.2)
    assert rep["level"] == pytest.approx(2.0, abs=1e-12)
    [(lo1, hi1), _] = rep["components"][0]["projections"]
    assert lo1 == pytest.approx(-1.0, abs=1e-6) and hi1 == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(FoliationError):
        check_foliation_hypotheses(build_model("henon-heiles"), 0.2)


def test_stark_leaf_counts(stark_fol):
    counts = {k: stark_fol.count(k) for k in ("family-plane", "rigid-plane", "rigid-cylinder")}
    assert counts == {"family-plane": 20, "rigid-plane": 4, "rigid-cylinder": 2}
    b = {(round(x.location, 12), x.kind) for x in stark_fol.bindings}
    assert b == {(0.0, "central"), (-1.0, "lyapunov"), (1.0, "lyapunov")}
    for x in stark_fol.bindings:
        # fiber energy E - V1 at the binding
        assert x.fiber_energy == pytest.approx(2.2 - 4 * (x.location**2 - 0.5 * x.location**4))


def test_chemical_two_chambers(chemical):
    f1, f2 = split_decoupled(chemical)
    fol = gradient_leaves(f1, 0.1, factor2=f2)
    assert fol.chambers == [(-2.0, 0.0), (0.0, 2.0)]
    kinds = sorted((round(b.location, 9), b.kind) for b in fol.bindings)
    assert kinds == [(-1.0, "central"), (0.0, "lyapunov"), (1.0, "central")]


def test_projected_angle_is_bounded_below(stark_fol):
    per = [p for p in stark_fol.transversality["per_leaf"] if p is not None]
    assert len(per) == len(stark_fol.leaves)
    assert min(p["projected"] for p in per) > 0.1
    assert stark_fol.transversality["ambient"] > 0


def test_leaves_lie_on_energy_level(stark_fol, stark):
    f1, f2 = split_decoupled(stark)
    for leaf in stark_fol.leaves[::3]:
        P = leaf_points(leaf, f2, 12)
        inner = P[1:-1] if leaf.end[0] == "collapse" else P
        assert np.max(np.abs(stark.energy(inner.reshape(-1, 4)) - 2.2)) < 1e-9


def test_leaves_follow_gradient_flow(stark_fol, stark):
    f1, _ = split_decoupled(stark)
    for leaf in stark_fol.leaves[::5]:
        assert leaf_residual(leaf, f1) < 1e-8


def test_fiber_radius_at_ends(stark_fol):
    for leaf in stark_fol.leaves:
        e2 = leaf.fiber_energy
        assert np.all(e2[:-1] > 0)
        if leaf.end[0] == "collapse":
            assert abs(e2[-1]) < 1e-8
        else:
            assert e2[-1] > 0.1


def test_leaves_are_disjoint(stark_fol):
    sep = leaf_separation(stark_fol)
    assert sep and all(v > 0 for v in sep.values())


def test_base_flow_is_orthogonal_to_gradient_lines(stark_fol, stark):
    f1, _ = split_decoupled(stark)
    for leaf in stark_fol.leaves[::4]:
        Z = leaf.base
        grad = np.stack([f1.factor.dV(Z[:, 0]), Z[:, 1]], axis=1)
        ham = np.stack([Z[:, 1], -f1.factor.dV(Z[:, 0])], axis=1)
        assert np.max(np.abs(np.sum(grad * ham, axis=1))) < 1e-12


def test_foliation_errors(stark):
    f1, f2 = split_decoupled(stark)
    with pytest.raises(FoliationError):
        gradient_leaves(f1, -1.0, factor2=f2)
    with pytest.raises(ValueError):
        gradient_leaves(f1, 2.2, factor2=f1)


def test_foliation_exports(tmp_path, stark_fol):
    stark_fol.to_json(tmp_path / "f.json")
    d = json.loads((tmp_path / "f.json").read_text())
    assert d["counts"]["rigid-cylinder"] == 2
    stark_fol.to_svg(tmp_path / "f.svg")
    assert (tmp_path / "f.svg").read_text().count("<circle") == 3


@pytest.mark.parametrize("mu,c,regime,chambers", [(0.25, -0.5, "I", 2), (0.25, -0.2, "II", 1),
                                                  (0.5, -0.9, "I", 2), (0.5, -1.2, "below-critical", 0)])
def test_euler_regimes(mu, c, regime, chambers):
    r = euler_regime(mu, c)
    assert r["regime"] == regime and r["chambers"] == chambers


def test_euler_regime_errors():
    with pytest.raises(ModelError):
        euler_regime(0.25, 0.0)
    with pytest.raises(ModelError):
        euler_regime(1.5, -0.5)
