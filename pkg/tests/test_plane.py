import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mechfol.plane import (PlaneError, build_plane, hat_H0, hat_lambda0, holomorphicity_residual,
                           integrate_profile, plane_to_obj, profile_rhs, profile_shift,
                           profile_to_csv, reeb_field, verify_transversality_to_flow)

R2 = math.sqrt(2.0)


def s_of_f(f, f0, b):
    # the profile ODE separates: ds/df = -(sqrt(b)/f + f/(2 - f^2))
    f, f0 = np.abs(f), abs(f0)
    return -math.sqrt(b) * np.log(f / f0) + 0.5 * np.log((2 - f * f) / (2 - f0 * f0))


@pytest.fixture(scope="module", params=[(1.0, 1.0), (3.0, 1.0), (1.0, -0.7), (3.0, -0.7)])
def profile(request):
    b, f0 = request.param
    return integrate_profile(b, f0)


def test_fixed_points():
    for b in (0.5, 1.0, 3.0):
        assert profile_rhs(0.0, b) == 0.0
        assert profile_rhs(R2, b) == pytest.approx(0.0, abs=1e-15)


def test_initial_values_b1():
    p = integrate_profile(1.0, 1.0)
    i = int(np.argmin(np.abs(p.s)))
    assert p.s[i] == 0.0
    assert profile_rhs(1.0, 1.0) == pytest.approx(-0.5, abs=1e-15)
    assert p.g[i] == pytest.approx(1.0, abs=1e-15)
    # d' = g^2 / 2
    assert np.gradient(p.d, p.s)[i] == pytest.approx(0.5, abs=1e-4)


def test_profile_matches_closed_form(profile):
    inner = np.abs(profile.f) > 1e-8
    inner &= R2 - np.abs(profile.f) > 1e-8
    s = s_of_f(profile.f[inner], profile.f0, profile.b)
    assert np.max(np.abs(s - profile.s[inner])) < 1e-7


def test_invariant_and_monotonicity(profile):
    assert profile.invariant_error() < 1e-12
    assert np.max(np.abs(profile.f**2 + math.sqrt(profile.b) * profile.g**2 - 2)) < 1e-12
    df = np.diff(np.abs(profile.f))
    assert np.all(df < 0)
    assert np.all(np.diff(profile.d) > 0)
    assert np.all(profile.g > 0)


def test_tail_rates(profile):
    assert profile.tail_rate == pytest.approx(1 / math.sqrt(profile.b), rel=0.02)
    assert profile.head_rate == pytest.approx(2.0, rel=0.02)
    assert abs(profile.f[-1]) < 1e-9
    assert R2 - abs(profile.f[0]) < 1e-9


def test_plane_on_energy_level(profile):
    pl = build_plane(profile, 32)
    W = pl.points.reshape(-1, 4)
    assert np.max(np.abs(hat_H0(W, profile.b) - 1.0)) < 1e-12
    assert np.all(W[:, 0] == 0.0)
    # boundary circle at the forward end
    g_end = pl.points[-1, :, 1] ** 2 + pl.points[-1, :, 3] ** 2
    assert np.allclose(np.sqrt(g_end), math.sqrt(2 / math.sqrt(profile.b)), atol=1e-9)
    assert np.max(np.abs(pl.points[-1, :, 2])) < 1e-9


def test_reeb_field_normalised(rng):
    for b in (1.0, 3.0):
        prof = integrate_profile(b, 0.9)
        W = build_plane(prof, 12).points.reshape(-1, 4)
        R = reeb_field(W, b)
        # lambda(R) = 1 on the level set of the quadratic Hamiltonian
        assert np.allclose(hat_lambda0(W, R), 1.0, atol=1e-12)


def test_transversality_signs():
    pos = verify_transversality_to_flow(integrate_profile(1.0, 1.0))
    neg = verify_transversality_to_flow(integrate_profile(1.0, -1.0))
    assert pos.constant_sign and neg.constant_sign
    assert pos.signs == (1,) and neg.signs == (-1,)
    assert pos.min_abs > 0


def test_transversality_fades_at_the_circle():
    prof = integrate_profile(1.0, 1.0)
    rep = verify_transversality_to_flow(prof)
    m = np.min(np.abs(rep.measure), axis=1)
    assert m[-1] < 1e-6 < m[0]
    i = len(prof.s) - 1
    with pytest.raises(PlaneError):
        verify_transversality_to_flow(prof, samples=[i - 1], exclude=1.0)


@pytest.mark.parametrize("mode,tol", [("displayed", 1e-10), ("computed", 1e-8)])
def test_holomorphicity_residual(profile, mode, tol):
    r = holomorphicity_residual(profile, mode=mode)
    assert r["residual"] < tol
    assert r["samples"] > 0


def test_residual_mode_error():
    with pytest.raises(ValueError):
        holomorphicity_residual(integrate_profile(1.0, 1.0), mode="other")


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 1.35), st.sampled_from([1.0, 2.0, 3.0]))
def test_profiles_agree_up_to_shift(f0, b):
    p = integrate_profile(b, 1.0)
    q = integrate_profile(b, f0)
    sigma, diff = profile_shift(p, q)
    assert diff < 1e-8
    assert sigma == pytest.approx(s_of_f(np.array([f0]), 1.0, b)[0], abs=1e-8)


def test_profile_shift_rejects_mismatch():
    with pytest.raises(PlaneError):
        profile_shift(integrate_profile(1.0, 1.0), integrate_profile(3.0, 1.0))
    with pytest.raises(PlaneError):
        profile_shift(integrate_profile(1.0, 1.0), integrate_profile(1.0, -1.0))


@pytest.mark.parametrize("b,f0", [(1.0, 0.0), (1.0, R2), (1.0, -1.5), (0.0, 1.0), (-1.0, 1.0),
                                  (1.0, float("nan"))])
def test_invalid_inputs(b, f0):
    with pytest.raises(PlaneError):
        integrate_profile(b, f0)


def test_exports(tmp_path):
    prof = integrate_profile(3.0, 1.0)
    profile_to_csv(prof, tmp_path / "p.csv")
    data = np.loadtxt(tmp_path / "p.csv", delimiter=",", skiprows=1)
    assert np.max(np.abs(data[:, 1] ** 2 + math.sqrt(3) * data[:, 2] ** 2 - 2)) < 1e-12
    pl = build_plane(prof, 8)
    plane_to_obj(pl, tmp_path / "p.obj")
    lines = (tmp_path / "p.obj").read_text().splitlines()
    nv = sum(1 for l in lines if l.startswith("v "))
    nf = sum(1 for l in lines if l.startswith("f "))
    assert nv == pl.points.shape[0] * 8 and nf == (pl.points.shape[0] - 1) * 8
