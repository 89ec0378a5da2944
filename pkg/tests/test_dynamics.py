import json
import math
import types
import warnings

import numpy as np
import pytest
from scipy.linalg import expm

from mechfol.dynamics import (Event, GrazingEventWarning, IntegrationError, floquet_class,
                              integrate_flow, monodromy, symplecticity_error)
from mechfol.models import DomainError, PhaseState, build_model
from mechfol.orbits import lyapunov_seed, refine_periodic_orbit

J0 = np.block([[np.zeros((2, 2)), np.eye(2)], [-np.eye(2), np.zeros((2, 2))]])


def _orbit(w, T):
    return types.SimpleNamespace(initial_state=np.asarray(w, float), period=T)


def test_harmonic_returns_after_full_period():
    m = build_model("harmonic")
    w0 = np.array([0.3, -0.2, 0.1, 0.5])
    tr = integrate_flow(m, w0, (0, 2 * math.pi), 1e-12, with_variational=True)
    assert tr.status == "complete"
    assert np.linalg.norm(tr.final - w0) < 1e-10
    assert np.max(np.abs(tr.phi[-1] - np.eye(4))) < 1e-9


def test_linear_flow_matches_matrix_exponential():
    m = build_model("saddle-center", {"a": -1.0, "b": 2.0})
    A = np.block([[np.zeros((2, 2)), np.eye(2)], [-np.diag([-1.0, 2.0]), np.zeros((2, 2))]])
    w0 = np.array([0.1, 0.2, -0.05, 0.3])
    tr = integrate_flow(m, w0, (0, 1.5), 1e-13, with_variational=True)
    assert np.allclose(tr.phi[-1], expm(1.5 * A), atol=1e-10)
    assert np.allclose(tr.final, expm(1.5 * A) @ w0, atol=1e-11)


def test_hh_energy_drift(hh):
    w0 = np.array([0.1, -0.2, 0.0, 0.0])
    ke = 0.16 - float(hh.V(w0[:2]))
    v = math.sqrt(2 * ke)
    w0[2:] = v * math.cos(1.0), v * math.sin(1.0)
    tr = integrate_flow(hh, w0, (0, 100), 1e-12)
    assert tr.status == "complete"
    assert tr.energy_drift() < 1e-9


def test_disk_crossing_event():
    m = build_model("harmonic")
    ev = Event(lambda w: w[0] ** 2 + w[1] ** 2 - 0.25, "disk", direction=1)
    # x(t) = sin t along x1 with speed 1: |x| = 1/2 at t = pi/6, 5pi/6 on exit only
    tr = integrate_flow(m, [0.0, 0.0, 1.0, 0.0], (0, 2 * math.pi), 1e-12, events=[ev])
    ts = [e.t for e in tr.events if e.name == "disk"]
    assert len(ts) == 2
    assert ts[0] == pytest.approx(math.pi / 6, abs=1e-8)
    assert ts[1] == pytest.approx(7 * math.pi / 6, abs=1e-8)
    assert all(e.speed > 0 for e in tr.events)


def test_terminal_event_truncates():
    m = build_model("harmonic")
    ev = Event(lambda w: w[0] - 0.5, "x", direction=1, terminal=True)
    tr = integrate_flow(m, [0.0, 0.0, 1.0, 0.0], (0, 10), 1e-12, events=[ev])
    assert tr.status == "terminal-event"
    assert tr.t[-1] == pytest.approx(math.pi / 6, abs=1e-8)


def test_grazing_event_warns():
    m = build_model("harmonic")
    ev = Event(lambda w: w[0] - 1.0, "touch")
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        integrate_flow(m, [0.0, 0.0, 1.0, 0.0], (0, 3), 1e-12, events=[ev])
    assert any(issubclass(r.category, GrazingEventWarning) for r in rec)


def test_quadratic_lyapunov_monodromy(quad, quad_saddle):
    seed, T = lyapunov_seed(quad, quad_saddle, 0.1)
    assert T == pytest.approx(2 * math.pi)
    M, kind, info = monodromy(quad, _orbit(seed.w, T))
    assert kind == "hyperbolic"
    ev = sorted(abs(complex(e)) for e in info["eigenvalues"])
    for got, want in zip(ev, [math.exp(-2 * math.pi), 1, 1, math.exp(2 * math.pi)]):
        assert got == pytest.approx(want, rel=1e-6)


def test_isotropic_monodromy_is_identity():
    m = build_model("harmonic")
    M, kind, info = monodromy(m, _orbit([0.5, 0.0, 0.0, 0.5], 2 * math.pi))
    assert np.allclose(M, np.eye(4), atol=1e-9)
    assert kind == "parabolic"
    assert np.allclose(info["eigenvalues"], 1.0, atol=1e-8)


def test_hh_lyapunov_is_hyperbolic(hh, v1):
    E = 1 / 6 + 1e-3
    seed, T = lyapunov_seed(hh, v1, 1e-3)
    o = refine_periodic_orbit(hh, seed, T, energy=E)
    M, kind, info = monodromy(hh, o)
    assert kind == "hyperbolic"
    assert info["trivial_residual"] < 1e-5
    assert info["symplecticity"] < 1e-8


@pytest.mark.parametrize("name", ["henon-heiles", "stark", "chemical"])
def test_fundamental_matrix_is_symplectic(name, rng):
    m = build_model(name)
    x = rng.uniform(-0.3, 0.3, 2)
    w0 = np.concatenate([x, rng.normal(scale=0.2, size=2)])
    tr = integrate_flow(m, w0, (0, 5), 1e-12, with_variational=True)
    P = tr.phi[-1]
    assert np.linalg.det(P) == pytest.approx(1.0, abs=1e-8)
    assert symplecticity_error(P) < 1e-8
    assert np.max(np.abs(P.T @ J0 @ P - J0)) < 1e-8


def test_time_reversal(hh):
    w0 = np.array([0.1, 0.05, 0.2, -0.3])
    fwd = integrate_flow(hh, w0, (0, 10), 1e-12)
    back = integrate_flow(hh, fwd.final, (10, 0), 1e-12)
    assert np.linalg.norm(back.final - w0) < 1e-8
    flip = fwd.final * np.array([1, 1, -1, -1])
    rev = integrate_flow(hh, flip, (0, 10), 1e-12)
    assert np.linalg.norm(rev.final * np.array([1, 1, -1, -1]) - w0) < 1e-8


def test_gauss6_conserves_energy(hh):
    w0 = np.array([0.1, -0.1, 0.3, 0.2])
    tr = integrate_flow(hh, w0, (0, 50), 1e-12, method="gauss6", step=0.05)
    assert tr.energy_drift() < 1e-10
    ref = integrate_flow(hh, w0, (0, 5), 1e-13)
    g6 = integrate_flow(hh, w0, (0, 5), 1e-12, method="gauss6", step=0.01)
    assert np.linalg.norm(g6.final - ref.final) < 1e-9


def test_domain_exit_truncates():
    m = build_model("saddle-center")
    tr = integrate_flow(m, [0.5, 0.0, 1.0, 0.0], (0, 20), 1e-12)
    assert tr.status == "domain-exit"
    assert tr.t[-1] < 20


def test_invalid_inputs(hh):
    with pytest.raises(DomainError):
        integrate_flow(hh, [5.0, 0.0, 0.0, 0.0], (0, 1))
    with pytest.raises(ValueError):
        integrate_flow(hh, [0.0, 0.0, 0.1, 0.0], (0, 1), tolerance=0.0)
    with pytest.raises(ValueError):
        integrate_flow(hh, [0.0, 0.0, 0.1, 0.0], (0, 1), method="gauss6")
    with pytest.raises(ValueError):
        integrate_flow(hh, [0.0, 0.0, 0.1, 0.0], (0, 1), method="euler")


def test_monodromy_rejects_open_orbit(hh):
    with pytest.raises(IntegrationError):
        monodromy(hh, _orbit([0.1, 0.0, 0.0, 0.2], 1.0))


def test_floquet_classes():
    rot = np.eye(4)
    c, s = math.cos(0.3), math.sin(0.3)
    rot[1, 1], rot[1, 3], rot[3, 1], rot[3, 3] = c, s, -s, c
    assert floquet_class(rot)[0] == "elliptic"
    hyp = np.diag([1.0, 3.0, 1.0, 1 / 3])
    assert floquet_class(hyp)[0] == "hyperbolic"


def test_exports(tmp_path):
    m = build_model("harmonic")
    tr = integrate_flow(m, PhaseState(np.array([0.2, 0.0]), np.array([0.0, 0.2])), (0, 1), 1e-12,
                        t_eval=np.linspace(0, 1, 11))
    tr.to_csv(tmp_path / "t.csv")
    data = np.loadtxt(tmp_path / "t.csv", delimiter=",", skiprows=1)
    assert data.shape == (11, 6)
    assert np.array_equal(data[:, 1:5], tr.states)
    tr.to_json(tmp_path / "t.json")
    d = json.loads((tmp_path / "t.json").read_text())
    assert d["status"] == "complete" and len(d["t"]) == 11
    assert np.allclose(tr(0.5)[:4], [0.2 * math.cos(0.5), 0.2 * math.sin(0.5),
                                     -0.2 * math.sin(0.5), 0.2 * math.cos(0.5)], atol=1e-10)
