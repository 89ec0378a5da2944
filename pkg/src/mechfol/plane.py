"""Explicit finite-energy planes over the quadratic saddle-center model.

In normalised coordinates the quadratic Hamiltonian is

    H0 = (y1^2 + sqrt(b) y2^2 + a x1^2 + sqrt(b) x2^2) / 2,

the plane ansatz is u(s, t) = (0, g cos t, f, g sin t) in the ordering
(x1, x2, y1, y2) with f^2 + sqrt(b) g^2 = 2, and the profile f solves

    f' = -(2 - f^2) f / (f^2 + sqrt(b) (2 - f^2)),

with d' = g^2 / 2.  Planes with f > 0 and f < 0 cover the two hemispheres of
the sphere {x1 = 0} in the level H0 = 1 whose equator is the periodic orbit
{x1 = y1 = 0}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .frame import j1, j2

__all__ = [
    "PlaneError",
    "PlaneProfile",
    "PlaneSurface",
    "profile_rhs",
    "integrate_profile",
    "build_plane",
    "hat_H0",
    "hat_lambda0",
    "reeb_field",
    "verify_transversality_to_flow",
    "holomorphicity_residual",
    "profile_shift",
    "profile_to_csv",
    "plane_to_obj",
]

SQRT2 = math.sqrt(2.0)
TRUNC = 1e-10


class PlaneError(ValueError):
    """Invalid profile parameters or samples."""


def profile_rhs(f, b: float):
    """Right-hand side of the profile ODE."""
    f = np.asarray(f, dtype=float)
    u = 2.0 - f * f
    return -u * f / (f * f + math.sqrt(b) * u)


@dataclass
class PlaneProfile:
    """Sampled solution (f, g, d) of the profile ODE."""

    b: float
    f0: float
    s: np.ndarray
    f: np.ndarray
    g: np.ndarray
    d: np.ndarray
    tail_rate: float = float("nan")        # fitted decay exponent of |f| at +inf
    head_rate: float = float("nan")        # fitted rate of sqrt2 - |f| at -inf
    dense: Optional[object] = field(default=None, repr=False)

    @property
    def sign(self) -> int:
        return 1 if self.f0 > 0 else -1

    def invariant_error(self) -> float:
        return float(np.max(np.abs(self.f**2 + math.sqrt(self.b) * self.g**2 - 2.0)))

    def f_at(self, s):
        """Profile value from the dense solution."""
        return self.dense(s)


def _s_grid(s_lo, s_hi, h0=0.05, core=2.0, growth=1.05):
    def side(limit):
        pts = list(np.arange(h0, min(core, limit), h0))
        x, h = pts[-1] if pts else 0.0, h0
        while x < limit:
            h *= growth
            x += h
            pts.append(min(x, limit))
        return np.array(pts)

    right = side(s_hi)
    left = side(-s_lo)
    return np.concatenate([-left[::-1], [0.0], right])


def integrate_profile(b: float, f0: float, s_span=None, *, tol: float = 1e-13,
                      s_limit: float = 400.0) -> PlaneProfile:
    """Integrate the profile ODE from f(0) = f0 in both directions.

    Tails are truncated where |f| < 1e-10 (s > 0) or sqrt(2) - |f| < 1e-10
    (s < 0) unless ``s_span`` is given.

    Examples
    --------
    >>> p = integrate_profile(1.0, 1.0)
    >>> round(float(profile_rhs(1.0, 1.0)), 12)
    -0.5
    """
    if not b > 0:
        raise PlaneError("b must be positive")
    if not 0 < abs(f0) < SQRT2:
        raise PlaneError("|f0| must lie strictly between 0 and sqrt(2)")
    sb = math.sqrt(b)

    # state (f, d, g^2); g^2 is integrated on its own so the invariant is a real check
    def rhs(s, z):
        f, _, q = z
        fp = float(profile_rhs(f, b))
        return [fp, 0.5 * q, -2.0 * f * fp / sb]

    def small(s, z):
        return abs(z[0]) - TRUNC
    small.terminal = True

    def near_top(s, z):
        return SQRT2 - abs(z[0]) - TRUNC
    near_top.terminal = True

    z0 = [f0, 0.0, (2.0 - f0 * f0) / sb]
    if s_span is None:
        fwd = solve_ivp(rhs, (0.0, s_limit), z0, method="DOP853", rtol=tol, atol=1e-16,
                        events=small, dense_output=True)
        bwd = solve_ivp(rhs, (0.0, -s_limit), z0, method="DOP853", rtol=tol,
                        atol=1e-16, events=near_top, dense_output=True)
        s_lo, s_hi = float(bwd.t[-1]), float(fwd.t[-1])
    else:
        s_lo, s_hi = map(float, s_span)
        fwd = solve_ivp(rhs, (0.0, s_hi), z0, method="DOP853", rtol=tol, atol=1e-16,
                        dense_output=True)
        bwd = solve_ivp(rhs, (0.0, s_lo), z0, method="DOP853", rtol=tol, atol=1e-16,
                        dense_output=True)

    def dense(s):
        s = np.asarray(s, dtype=float)
        out = np.where(s >= 0, fwd.sol(np.clip(s, 0, s_hi))[0], bwd.sol(np.clip(s, s_lo, 0))[0])
        return out

    def dense_all(s):
        s = np.asarray(s, dtype=float)
        return np.where(s >= 0, fwd.sol(np.clip(s, 0, s_hi)), bwd.sol(np.clip(s, s_lo, 0)))

    s = _s_grid(s_lo, s_hi)
    f, d, q = dense_all(s)
    g = np.sqrt(np.maximum(q, 0.0))
    prof = PlaneProfile(float(b), float(f0), s, f, g, d, dense=dense)
    prof.tail_rate = _fit_rate(s, np.abs(f), 5.0, 15.0)
    prof.head_rate = _fit_rate(-s, SQRT2 - np.abs(f), 3.0, 8.0)
    return prof


def _fit_rate(x, y, lo, hi):
    sel = (x >= lo) & (x <= hi) & (y > 0)
    if sel.sum() < 3:
        return float("nan")
    slope = np.polyfit(x[sel], np.log(y[sel]), 1)[0]
    return float(-slope)


# ---------------------------------------------------------------------------
# surface


@dataclass
class PlaneSurface:
    profile: PlaneProfile
    t: np.ndarray
    points: np.ndarray      # (n_s, n_t, 4) in (x1, x2, y1, y2)

    @property
    def s(self):
        return self.profile.s

    @property
    def d(self):
        return self.profile.d


def build_plane(profile: PlaneProfile, t=64) -> PlaneSurface:
    """Samples u(s, t) = (0, g cos t, f, g sin t) of the plane."""
    if np.isscalar(t):
        t = 2 * math.pi * np.arange(int(t)) / int(t)
    t = np.asarray(t, dtype=float)
    g = profile.g[:, None]
    P = np.zeros((len(profile.s), len(t), 4))
    P[:, :, 1] = g * np.cos(t)[None, :]
    P[:, :, 2] = profile.f[:, None]
    P[:, :, 3] = g * np.sin(t)[None, :]
    return PlaneSurface(profile, t, P)


def hat_H0(w, b: float, a: float = -1.0):
    w = np.asarray(w, dtype=float)
    sb = math.sqrt(b)
    x1, x2, y1, y2 = np.moveaxis(w, -1, 0)
    return 0.5 * (y1**2 + sb * y2**2 + a * x1**2 + sb * x2**2)


def _grad_H0(w, b, a):
    sb = math.sqrt(b)
    x1, x2, y1, y2 = np.moveaxis(np.asarray(w, dtype=float), -1, 0)
    return np.stack([a * x1, sb * x2, y1, sb * y2], axis=-1)


def _hamiltonian_field(w, b, a):
    g = _grad_H0(w, b, a)
    return np.concatenate([g[..., 2:], -g[..., :2]], axis=-1)


def hat_lambda0(w, v):
    """lambda = (x1 dy1 - y1 dx1 + x2 dy2 - y2 dx2) / 2 evaluated on v at w."""
    w = np.asarray(w, dtype=float)
    v = np.asarray(v, dtype=float)
    return 0.5 * (w[..., 0] * v[..., 2] - w[..., 2] * v[..., 0]
                  + w[..., 1] * v[..., 3] - w[..., 3] * v[..., 1])


def reeb_field(w, b: float, a: float = -1.0):
    """Reeb field of lambda on {H0 = 1}, equal to minus the Hamiltonian field."""
    return -_hamiltonian_field(w, b, a)


@dataclass
class TransversalityReport:
    min_abs: float
    signs: tuple
    constant_sign: bool
    measure: np.ndarray = field(repr=False)


def verify_transversality_to_flow(plane, samples=None, *, a: float = -1.0,
                                  exclude: float = 1e-8) -> TransversalityReport:
    """Normal component of the H0 flow across the plane within the level.

    The normal is computed numerically as the unit vector orthogonal to the
    plane tangents and to grad H0, oriented by a positive x1 component; the
    measure is <X_H0, n> / |X_H0|.

    Raises
    ------
    PlaneError
        If a sample lies on the asymptotic orbit {x1 = y1 = 0}.
    """
    if isinstance(plane, PlaneProfile):
        plane = build_plane(plane)
    prof = plane.profile
    b = prof.b
    P = plane.points
    if samples is None:
        idx = np.arange(1, len(prof.s) - 1)
        idx = idx[np.abs(prof.f[idx]) > exclude]
    else:
        idx = np.asarray(samples)
    if np.any(np.abs(prof.f[idx]) <= exclude):
        raise PlaneError("sample on the asymptotic orbit")
    out = np.empty((len(idx), len(plane.t)))
    nt = len(plane.t)
    for row, i in enumerate(idx):
        ds = prof.s[i + 1] - prof.s[i - 1]
        us = (P[i + 1] - P[i - 1]) / ds
        for k in range(nt):
            w = P[i, k]
            ut = (P[i, (k + 1) % nt] - P[i, (k - 1) % nt])
            A = np.stack([us[k], ut, _grad_H0(w, b, a)], axis=0)
            n = np.linalg.svd(A)[2][-1]
            if n[0] < 0:
                n = -n
            X = _hamiltonian_field(w, b, a)
            out[row, k] = float(X @ n) / float(np.linalg.norm(X))
    signs = tuple(sorted({int(np.sign(v)) for v in out.ravel()}))
    return TransversalityReport(float(np.min(np.abs(out))), signs, len(signs) == 1, out)


# ---------------------------------------------------------------------------
# holomorphicity


def _displayed_vectors(f, fp, g, gp, t, b):
    """pi u_s, pi u_t and the projected frame from the closed-form expressions."""
    sb = math.sqrt(b)
    c, s = math.cos(t), math.sin(t)
    R = np.array([-f, -sb * g * s, 0.0, sb * g * c])
    pus = np.array([0.0, gp * c, fp, gp * s])
    put = np.array([0.0, -g * s, 0.0, g * c]) - 0.5 * g * g * R
    Y1 = np.array([sb * g * s, -f, sb * g * c, 0.0]) - 0.5 * (1 - sb) * g * f * s * R
    Y2 = np.array([sb * g * c, 0.0, -sb * g * s, f]) - 0.5 * (1 - sb) * g * f * c * R
    return pus, put, Y1, Y2


def _computed_vectors(prof, i, t, b, a, h):
    """Same vectors from j1, j2, lambda and the Reeb field with finite differences."""
    dense = prof.dense
    sb = math.sqrt(b)

    def u(s_, t_):
        f = float(dense(s_))
        g = math.sqrt(max(2.0 - f * f, 0.0) / sb)
        return np.array([0.0, g * math.cos(t_), f, g * math.sin(t_)])

    s = prof.s[i]
    w = u(s, t)
    us = (u(s + h, t) - u(s - h, t)) / (2 * h)
    ut = (u(s, t + h) - u(s, t - h)) / (2 * h)
    R = reeb_field(w, b, a)
    proj = lambda v: v - hat_lambda0(w, v) * R
    gH = _grad_H0(w, b, a)
    return proj(us), proj(ut), proj(j1(gH)), proj(j2(gH))


def _J_apply(v, Y1, Y2):
    """J with J Y2 = Y1 and J Y1 = -Y2, applied to v in span{Y1, Y2}."""
    coef, *_ = np.linalg.lstsq(np.stack([Y1, Y2], axis=1), v, rcond=None)
    return -coef[0] * Y2 + coef[1] * Y1, float(np.linalg.norm(np.stack([Y1, Y2], 1) @ coef - v))


def holomorphicity_residual(profile: PlaneProfile, n_t: int = 16, *, a: float = -1.0,
                            interior=(-6.0, 12.0), mode: str = "displayed",
                            h: float = 1e-5) -> dict:
    """Max |J pi u_s - pi u_t| over interior samples.

    ``mode="displayed"`` uses the closed-form expressions of the projected
    derivatives and frame with f' from the profile ODE; ``mode="computed"``
    rebuilds every vector from j1, j2, the contact form and the Reeb field,
    with central differences of the sampled profile for the derivatives.
    Also returns the largest distance of pi u_s from span{Y1, Y2}.
    """
    b = profile.b
    sb = math.sqrt(b)
    sel = np.nonzero((profile.s > interior[0]) & (profile.s < interior[1]))[0]
    ts = 2 * math.pi * np.arange(n_t) / n_t
    worst = 0.0
    span_err = 0.0
    for i in sel:
        f = float(profile.f[i])
        g = float(profile.g[i])
        fp = float(profile_rhs(f, b))
        gp = -f * fp / (sb * g)
        for t in ts:
            if mode == "displayed":
                pus, put, Y1, Y2 = _displayed_vectors(f, fp, g, gp, t, b)
            elif mode == "computed":
                pus, put, Y1, Y2 = _computed_vectors(profile, i, t, b, a, h)
            else:
                raise ValueError(f"unknown mode {mode!r}")
            Jv, off = _J_apply(pus, Y1, Y2)
            scale = max(1.0, float(np.linalg.norm(put)))
            worst = max(worst, float(np.linalg.norm(Jv - put)) / scale)
            span_err = max(span_err, off)
    return {"residual": worst, "span_error": span_err, "samples": int(len(sel) * n_t),
            "mode": mode}


# ---------------------------------------------------------------------------
# uniqueness and export


def profile_shift(p: PlaneProfile, q: PlaneProfile, window=(-5.0, 10.0)) -> tuple:
    """Shift sigma with q(s) = p(s + sigma), and the sup difference on ``window``."""
    if p.b != q.b or p.sign != q.sign:
        raise PlaneError("profiles must share b and sign class")
    sigma = brentq(lambda s: float(p.f_at(s)) - q.f0, p.s[0], p.s[-1], xtol=1e-15)
    s = np.linspace(*window, 2001)
    s = s[(s + sigma > p.s[0]) & (s + sigma < p.s[-1]) & (s > q.s[0]) & (s < q.s[-1])]
    diff = float(np.max(np.abs(q.f_at(s) - p.f_at(s + sigma))))
    return float(sigma), diff


def profile_to_csv(profile: PlaneProfile, path) -> None:
    with open(path, "w") as fh:
        fh.write("s,f,g,d\n")
        for row in zip(profile.s, profile.f, profile.g, profile.d):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def plane_to_obj(plane: PlaneSurface, path) -> None:
    """OBJ vertex list (x2, y1, y2) with d as grey-level vertex colour, plus quads."""
    P = plane.points
    d = plane.d
    span = float(d.max() - d.min()) or 1.0
    c = (d - d.min()) / span
    ns, nt = P.shape[:2]
    with open(path, "w") as fh:
        fh.write(f"# plane b={plane.profile.b:.17g} f0={plane.profile.f0:.17g}\n")
        for i in range(ns):
            for k in range(nt):
                x = P[i, k]
                fh.write(f"v {x[1]:.10g} {x[2]:.10g} {x[3]:.10g} {c[i]:.6f} {c[i]:.6f} {c[i]:.6f}\n")
        for i in range(ns - 1):
            for k in range(nt):
                a0 = i * nt + k + 1
                a1 = i * nt + (k + 1) % nt + 1
                fh.write(f"f {a0} {a1} {a1 + nt} {a0 + nt}\n")
