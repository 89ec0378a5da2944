"""Quaternion frame, the coefficients kappa_ij and the transverse angle ODE.

For w = (x1, x2, y1, y2) the quaternion maps are

    j1 (a1, a2, b1, b2) = ( b2, -b1,  a2, -a1)
    j2 (a1, a2, b1, b2) = ( a2, -a1, -b2,  b1)
    j3 (a1, a2, b1, b2) = ( b1,  b2, -a1, -a2)

and the flow is w' = j3 grad H.  With X0 = grad H / |grad H| the frame
Xi = ji X0 is orthonormal, {X1, X2} spans the contact plane and the
transverse linearised flow in that basis is alpha' = [[0,-1],[1,0]] S alpha.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .models import MechanicalModel

__all__ = [
    "j1", "j2", "j3", "omega0",
    "TransverseFrameData",
    "AngleTrace",
    "FrameError",
    "quaternion_frame",
    "kappa_closed_form",
    "kappa_direct",
    "transverse_matrix",
    "angle_rate",
    "integrate_transverse_angle",
    "integrate_transverse_linear",
    "positivity_scan",
    "sample_energy_surface",
    "hh_G_longform",
    "hh_G_closed",
]

GUARD = 1e-8
ROT = np.array([[0.0, -1.0], [1.0, 0.0]])


class FrameError(ValueError):
    """Frame undefined (critical point of H)."""


def j1(v):
    v = np.asarray(v)
    return np.stack([v[..., 3], -v[..., 2], v[..., 1], -v[..., 0]], axis=-1)


def j2(v):
    v = np.asarray(v)
    return np.stack([v[..., 1], -v[..., 0], -v[..., 3], v[..., 2]], axis=-1)


def j3(v):
    v = np.asarray(v)
    return np.stack([v[..., 2], v[..., 3], -v[..., 0], -v[..., 1]], axis=-1)


def omega0(u, v):
    """omega0 = dy1^dx1 + dy2^dx2 evaluated on (u, v)."""
    u, v = np.asarray(u), np.asarray(v)
    return (u[..., 2] * v[..., 0] - u[..., 0] * v[..., 2]
            + u[..., 3] * v[..., 1] - u[..., 1] * v[..., 3])


@dataclass(frozen=True)
class TransverseFrameData:
    X: np.ndarray          # (4, 4), rows X0..X3
    k11: float
    k12: float
    k22: float
    k33: float

    @property
    def S(self) -> np.ndarray:
        return np.array([[self.k11 + self.k33, self.k12], [self.k12, self.k22 + self.k33]])


def _gradH(model, w):
    w = np.asarray(w, dtype=float)
    return np.concatenate([model.grad(w[..., :2]), w[..., 2:]], axis=-1)


def kappa_closed_form(model: MechanicalModel, w):
    """kappa_11, kappa_12, kappa_22, kappa_33 from V and its derivatives.

    Vectorised over leading axes of ``w``.
    """
    w = np.asarray(w, dtype=float)
    x, y1, y2 = w[..., :2], w[..., 2], w[..., 3]
    g = model.grad(x)
    H = model.hess(x)
    V1, V2 = g[..., 0], g[..., 1]
    V11, V12, V22 = H[..., 0, 0], H[..., 0, 1], H[..., 1, 1]
    n2 = V1**2 + V2**2 + y1**2 + y2**2
    if np.any(n2 < GUARD**2):
        raise FrameError("critical point of H: quaternion frame undefined")
    g2 = 1.0 / n2
    k11 = g2 * (V11 * y2**2 - 2 * V12 * y1 * y2 + V22 * y1**2 + V1**2 + V2**2)
    k12 = g2 * (V11 * y2 * V2 - V12 * y1 * V2 - V12 * y2 * V1 + V22 * y1 * V1 - V2 * y2 - V1 * y1)
    k22 = g2 * (V11 * V2**2 - 2 * V12 * V1 * V2 + V22 * V1**2 + y1**2 + y2**2)
    k33 = g2 * (V11 * y1**2 + 2 * V12 * y1 * y2 + V22 * y2**2 + V1**2 + V2**2)
    return k11, k12, k22, k33


def _frame_vectors(model, w):
    G = _gradH(model, w)
    n = np.linalg.norm(G, axis=-1, keepdims=True)
    if np.any(n < GUARD):
        raise FrameError("critical point of H: quaternion frame undefined")
    X0 = G / n
    return X0, j1(X0), j2(X0), j3(X0)


def kappa_direct(model: MechanicalModel, w):
    """kappa_ij = <Hess H X_i, X_j> from the frame vectors themselves."""
    w = np.asarray(w, dtype=float)
    X0, X1, X2, X3 = _frame_vectors(model, w)
    Hv = model.hess(w[..., :2])

    def HX(X):
        return np.concatenate([np.einsum("...ij,...j->...i", Hv, X[..., :2]), X[..., 2:]], axis=-1)

    def ip(a, b):
        return np.sum(a * b, axis=-1)

    return ip(HX(X1), X1), ip(HX(X1), X2), ip(HX(X2), X2), ip(HX(X3), X3)


def quaternion_frame(model: MechanicalModel, state) -> TransverseFrameData:
    """Frame X0..X3 and kappa coefficients at a regular point."""
    w = state.w if hasattr(state, "w") else np.asarray(state, dtype=float)
    X = np.array(_frame_vectors(model, w))
    k = kappa_closed_form(model, w)
    return TransverseFrameData(X, *(float(v) for v in k))


def transverse_matrix(model: MechanicalModel, w):
    """S = [[k11 + k33, k12], [k12, k22 + k33]], vectorised."""
    k11, k12, k22, k33 = kappa_closed_form(model, w)
    S = np.empty(np.shape(k11) + (2, 2))
    S[..., 0, 0] = k11 + k33
    S[..., 0, 1] = S[..., 1, 0] = k12
    S[..., 1, 1] = k22 + k33
    return S


def angle_rate(model: MechanicalModel, w, theta):
    """theta' = (cos, sin) S (cos, sin)^T."""
    k11, k12, k22, k33 = kappa_closed_form(model, w)
    c, s = np.cos(theta), np.sin(theta)
    return (k11 + k33) * c * c + 2 * k12 * c * s + (k22 + k33) * s * s


@dataclass
class AngleTrace:
    """Unwrapped transverse angles theta(t) for one or more initial angles."""

    t: np.ndarray
    theta: np.ndarray       # (n_t, n_theta)
    theta0: np.ndarray
    states: np.ndarray      # base trajectory samples (n_t, 4)
    model_name: str = ""

    @property
    def delta(self) -> np.ndarray:
        return self.theta[-1] - self.theta[0]

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            cols = ",".join(f"theta_{i}" for i in range(self.theta.shape[1]))
            fh.write(f"t,{cols}\n")
            for t, row in zip(self.t, self.theta):
                fh.write(",".join(f"{v:.17g}" for v in (t, *row)) + "\n")


def _state_of(traj_or_state):
    if hasattr(traj_or_state, "states"):
        return np.asarray(traj_or_state.states[0]), (float(traj_or_state.t[0]), float(traj_or_state.t[-1]))
    return np.asarray(traj_or_state, dtype=float), None


def integrate_transverse_angle(model: MechanicalModel, trajectory, theta0, t_span=None,
                               tolerance: float = 1e-11, max_rotation: float = np.pi / 4,
                               dense: bool = True) -> AngleTrace:
    """Integrate the angle ODE along a trajectory.

    The base flow is re-integrated jointly with the angles from the
    trajectory's initial state over its time span, so no interpolation
    error enters.  The output grid is refined until adjacent samples differ
    by less than ``max_rotation``.

    Parameters
    ----------
    trajectory : Trajectory or array_like
        A Trajectory, or an initial state together with ``t_span``.
    theta0 : float or array_like
    """
    w0, span = _state_of(trajectory)
    if t_span is not None:
        span = tuple(t_span)
    if span is None:
        raise ValueError("a time span is required with a bare initial state")
    th0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    n = len(th0)

    def rhs(t, z):
        w = z[:4]
        k11, k12, k22, k33 = kappa_closed_form(model, w)
        th = z[4:]
        c, s = np.cos(th), np.sin(th)
        dth = (k11 + k33) * c * c + 2 * k12 * c * s + (k22 + k33) * s * s
        return np.concatenate([[w[2], w[3]], -model.grad(w[:2]), dth])

    sol = solve_ivp(rhs, span, np.concatenate([w0, th0]), method="DOP853",
                    rtol=tolerance, atol=tolerance, dense_output=dense)
    if sol.status != 0:
        raise FrameError(f"angle integration failed: {sol.message}")
    t = _refine_grid(sol, slice(4, 4 + n), max_rotation)
    Z = sol.sol(t).T
    return AngleTrace(t, Z[:, 4:], th0, Z[:, :4], model.name)


def _refine_grid(sol, sl, max_rotation):
    t = np.asarray(sol.t, dtype=float)
    for _ in range(30):
        Z = sol.sol(t)[sl]
        jump = np.max(np.abs(np.diff(Z, axis=1)), axis=0)
        bad = np.nonzero(jump >= max_rotation)[0]
        if bad.size == 0:
            return t
        mids = 0.5 * (t[bad] + t[bad + 1])
        t = np.sort(np.concatenate([t, mids]))
    return t


def integrate_transverse_linear(model: MechanicalModel, w0, t_span, alpha0=None,
                                tolerance: float = 1e-11):
    """2x2 transverse linear flow alpha' = [[0,-1],[1,0]] S(t) alpha.

    Returns ``(sol, Psi)``: the dense solution of the joint (4 + 4)-system and
    the final 2x2 fundamental matrix.  With ``alpha0`` the solution of that
    single initial vector is appended as two further components.
    """
    w0 = np.asarray(w0, dtype=float)
    extra = np.zeros(0) if alpha0 is None else np.asarray(alpha0, dtype=float)

    def rhs(t, z):
        w = z[:4]
        S = transverse_matrix(model, w)
        A = ROT @ S
        P = z[4:8].reshape(2, 2)
        out = [w[2:4], -model.grad(w[:2]), (A @ P).ravel()]
        if extra.size:
            out.append(A @ z[8:10])
        return np.concatenate(out)

    z0 = np.concatenate([w0, np.eye(2).ravel(), extra])
    sol = solve_ivp(rhs, t_span, z0, method="DOP853", rtol=tolerance, atol=tolerance,
                    dense_output=True)
    if sol.status != 0:
        raise FrameError(f"transverse integration failed: {sol.message}")
    return sol, sol.y[4:8, -1].reshape(2, 2)


# ---------------------------------------------------------------------------
# positivity

def positivity_scan(model: MechanicalModel, samples) -> dict:
    """Positive-definiteness of S at phase samples.

    Parameters
    ----------
    samples : (n, 4) array_like, or a Trajectory (its states are used)

    Returns
    -------
    dict
        ``positive`` per-sample flags (trace and determinant test),
        ``kappa22_test`` per-sample flags for the y = 0 criterion
        kappa22 > -1 (None where y != 0), ``degenerate`` flags for samples
        too close to a critical point, and ``min_eigenvalue``.
    """
    W = np.asarray(samples.states if hasattr(samples, "states") else samples, dtype=float)
    W = np.atleast_2d(W)
    G = _gradH(model, W)
    deg = np.linalg.norm(G, axis=-1) < GUARD
    S = np.full((len(W), 2, 2), np.nan)
    if np.any(~deg):
        S[~deg] = transverse_matrix(model, W[~deg])
    tr = S[:, 0, 0] + S[:, 1, 1]
    det = S[:, 0, 0] * S[:, 1, 1] - S[:, 0, 1] ** 2
    positive = (tr > 0) & (det > 0) & ~deg
    lam_min = 0.5 * (tr - np.sqrt(np.maximum((S[:, 0, 0] - S[:, 1, 1]) ** 2 + 4 * S[:, 0, 1] ** 2, 0)))
    brake = np.all(W[:, 2:] == 0, axis=1) & ~deg
    k22 = np.full(len(W), np.nan)
    if brake.any():
        k22[brake] = kappa_closed_form(model, W[brake])[2]
    k22_test = [None if not b else bool(v > -1) for b, v in zip(brake, k22)]
    return {
        "positive": positive,
        "degenerate": deg,
        "kappa22": k22,
        "kappa22_test": k22_test,
        "min_eigenvalue": float(np.nanmin(lam_min)) if np.any(~deg) else float("nan"),
        "eigenvalue_min_per_sample": lam_min,
        "all_positive": bool(np.all(positive[~deg])),
    }


def sample_energy_surface(model: MechanicalModel, E: float, positions, rng) -> np.ndarray:
    """Phase points over given positions on the level H = E (random velocity direction)."""
    x = np.atleast_2d(np.asarray(positions, dtype=float))
    speed2 = 2.0 * (E - model.V(x))
    if np.any(speed2 < 0):
        raise ValueError("positions outside the Hill region")
    phi = rng.uniform(0, 2 * np.pi, len(x))
    r = np.sqrt(speed2)
    return np.column_stack([x, r * np.cos(phi), r * np.sin(phi)])


def hh_G_longform(model: MechanicalModel, x, level: float = 1.0 / 6.0):
    """2(h - V)(V11 V22 - V12^2) + V11 V2^2 + V22 V1^2 - 2 V1 V2 V12."""
    x = np.asarray(x, dtype=float)
    g = model.grad(x)
    H = model.hess(x)
    V1, V2 = g[..., 0], g[..., 1]
    V11, V12, V22 = H[..., 0, 0], H[..., 0, 1], H[..., 1, 1]
    return (2 * (level - model.V(x)) * (V11 * V22 - V12**2)
            + V11 * V2**2 + V22 * V1**2 - 2 * V1 * V2 * V12)


def hh_G_closed(x, level: float = 1.0 / 6.0):
    """Factorised Henon-Heiles form 2(1/6 - V)(1 - x1^2 - x2^2)."""
    x = np.asarray(x, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    V = 0.5 * (x1**2 + x2**2) + x1**2 * x2 - x2**3 / 3.0
    return 2 * (level - V) * (1 - x1**2 - x2**2)
