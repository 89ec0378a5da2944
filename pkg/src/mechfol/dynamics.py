"""Integration of Hamilton's equations and the variational equations."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .models import DomainError, MechanicalModel, PhaseState

__all__ = [
    "J0",
    "Event",
    "EventRecord",
    "Trajectory",
    "IntegrationError",
    "integrate_flow",
    "hamiltonian_rhs",
    "variational_rhs",
    "monodromy",
    "floquet_class",
    "symplecticity_error",
    "GrazingEventWarning",
]

J0 = np.block([[np.zeros((2, 2)), np.eye(2)], [-np.eye(2), np.zeros((2, 2))]])


class IntegrationError(RuntimeError):
    """Numerical failure of the flow integration."""


class GrazingEventWarning(RuntimeWarning):
    """An event function touched zero without changing sign."""


@dataclass(frozen=True)
class Event:
    """Scalar surface g(w) = 0 in phase space.

    direction : 0 detects all crossings, +1 only increasing, -1 only decreasing.
    """

    func: Callable
    name: str = "event"
    direction: int = 0
    terminal: bool = False


@dataclass(frozen=True)
class EventRecord:
    name: str
    t: float
    state: np.ndarray
    speed: float


@dataclass
class Trajectory:
    """Time-sampled solution with dense output.

    Attributes
    ----------
    t : (n,) ndarray
    states : (n, 4) ndarray
    phi : (n, 4, 4) ndarray or None
        Fundamental matrix of the variational equations, phi[0] = I.
    energy : (n,) ndarray
    events : list of EventRecord
    status : str
        ``"complete"``, ``"terminal-event"``, ``"domain-exit"`` or
        ``"step-underflow"``; anything but ``"complete"`` means truncation.
    """

    t: np.ndarray
    states: np.ndarray
    phi: Optional[np.ndarray]
    energy: np.ndarray
    events: list = field(default_factory=list)
    status: str = "complete"
    message: str = ""
    dense: Optional[Callable] = None
    model_name: str = ""

    def __call__(self, t):
        """Dense-output evaluation, shape (..., 4) or (..., 20)."""
        return np.moveaxis(np.asarray(self.dense(t)), 0, -1)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def energy_drift(self) -> float:
        return float(np.max(np.abs(self.energy - self.energy[0])))

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t,x1,x2,y1,y2,H\n")
            for t, w, h in zip(self.t, self.states, self.energy):
                fh.write(",".join(f"{v:.17g}" for v in (t, *w, h)) + "\n")

    def to_dict(self) -> dict:
        return {
            "model": self.model_name,
            "status": self.status,
            "t": [float(v) for v in self.t],
            "states": [[float(v) for v in w] for w in self.states],
            "energy": [float(v) for v in self.energy],
            "events": [{"name": e.name, "t": float(e.t), "state": [float(v) for v in e.state],
                        "speed": float(e.speed)} for e in self.events],
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)
            fh.write("\n")


def hamiltonian_rhs(model: MechanicalModel):
    def rhs(t, w):
        return np.concatenate([w[2:4], -model.grad(w[0:2])])
    return rhs


def variational_rhs(model: MechanicalModel):
    """Right-hand side of the joint (4 + 16)-dimensional system."""
    def rhs(t, z):
        w = z[:4]
        P = z[4:].reshape(4, 4)
        H = model.hess(w[0:2])
        dP = np.empty((4, 4))
        dP[0:2] = P[2:4]
        dP[2:4] = -H @ P[0:2]
        return np.concatenate([w[2:4], -model.grad(w[0:2]), dP.ravel()])
    return rhs


def _domain_event(model: MechanicalModel):
    bounds = [(k, lo, hi) for k, (lo, hi) in enumerate(model.domain)
              if not model.periodic[k] and math.isfinite(lo) and math.isfinite(hi)]
    if not bounds and model.region is None:
        return None

    def g(w):
        d = min(min(w[k] - lo, hi - w[k]) for k, lo, hi in bounds) if bounds else 1.0
        if model.region is not None and not model.region(np.asarray(w[:2])):
            d = min(d, -1e-300)
        return d

    return Event(g, "domain-exit", direction=-1, terminal=True)


def integrate_flow(model: MechanicalModel, state, t_span, tolerance: float = 1e-12, *,
                   with_variational: bool = False, events: Sequence[Event] = (),
                   method: str = "dop853", step: Optional[float] = None,
                   max_step: float = np.inf, t_eval=None) -> Trajectory:
    """Integrate the flow of H = |y|^2/2 + V.

    Parameters
    ----------
    model : MechanicalModel
    state : PhaseState or array_like of length 4
    t_span : (t0, t1)
        ``t1 < t0`` integrates backwards.
    tolerance : float
        Relative and absolute tolerance of the adaptive scheme.
    with_variational : bool
        Also integrate the fundamental matrix Phi(t), Phi(t0) = I.
    events : sequence of Event
    method : {"dop853", "gauss6"}
        Adaptive RK 8(5,3) with dense output, or the fixed-step symplectic
        3-stage Gauss-Legendre scheme (requires ``step``).

    Returns
    -------
    Trajectory
    """
    w0 = state.w if isinstance(state, PhaseState) else np.asarray(state, dtype=float).reshape(4)
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    if not np.all(model.contains(w0[:2])):
        raise DomainError("initial state outside the model domain")
    evs = list(events)
    dom = _domain_event(model)
    if dom is not None:
        evs.append(dom)
    z0 = np.concatenate([w0, np.eye(4).ravel()]) if with_variational else w0
    rhs = variational_rhs(model) if with_variational else hamiltonian_rhs(model)
    if method == "dop853":
        traj = _integrate_rk(model, rhs, z0, t_span, tolerance, evs, max_step, t_eval)
    elif method == "gauss6":
        if step is None or not step > 0:
            raise ValueError("gauss6 mode needs a positive fixed step")
        traj = _integrate_gauss(model, rhs, z0, t_span, step, evs, tolerance)
    else:
        raise ValueError(f"unknown method {method!r}")
    traj.model_name = model.name
    return traj


def _wrap_event(ev: Event):
    def f(t, z):
        return float(ev.func(z[:4]))
    f.terminal = ev.terminal
    f.direction = ev.direction
    return f


def _finish(model, t, Z, dense, events, status, message):
    states = Z[:, :4]
    phi = Z[:, 4:].reshape(-1, 4, 4) if Z.shape[1] == 20 else None
    energy = model.energy(states)
    return Trajectory(t, states, phi, energy, events, status, message, dense)


def _integrate_rk(model, rhs, z0, t_span, tol, evs, max_step, t_eval):
    scipy_events = [_wrap_event(e) for e in evs]
    with np.errstate(over="ignore", invalid="ignore"):
        sol = solve_ivp(rhs, t_span, z0, method="DOP853", rtol=tol, atol=tol,
                        dense_output=True, events=scipy_events or None,
                        max_step=max_step)
    status = "complete"
    if sol.status == -1:
        status = "step-underflow"
    records = []
    for ev, times, states in zip(evs, sol.t_events or [], sol.y_events or []):
        for te, ze in zip(times, states):
            if not np.isclose(te, t_span[0], rtol=0, atol=1e-13):
                records.append(_record(ev, te, ze, sol.sol))
    records.sort(key=lambda r: r.t * np.sign(t_span[1] - t_span[0]))
    if sol.status == 1:
        last = [r for r in records if any(e.terminal and e.name == r.name for e in evs)]
        status = "domain-exit" if last and last[-1].name == "domain-exit" else "terminal-event"
    _scan_grazing(evs, sol)
    if t_eval is not None:
        te = np.asarray(t_eval, dtype=float)
        lo, hi = sorted((sol.t[0], sol.t[-1]))
        te = te[(te >= lo) & (te <= hi)]
        t, Z = te, sol.sol(te).T
    else:
        t, Z = sol.t, sol.y.T
    return _finish(model, t, Z, sol.sol, records, status, sol.message)


def _record(ev, te, ze, dense, h=1e-7):
    # bracketed root polish on the dense output
    g = lambda s: float(ev.func(dense(s)[:4]))
    a, b = te - h, te + h
    try:
        if g(a) * g(b) < 0:
            te = brentq(g, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    except ValueError:
        pass
    z = dense(te)
    speed = (g(te + h) - g(te - h)) / (2 * h)
    return EventRecord(ev.name, float(te), z[:4].copy(), float(speed))


def _scan_grazing(evs, sol, sub=4, rel=1e-6):
    if not evs or len(sol.t) < 2:
        return
    ts = np.linspace(sol.t[0], sol.t[-1], sub * len(sol.t))
    Z = sol.sol(ts)
    for ev in evs:
        if ev.name == "domain-exit":
            continue
        g = np.array([ev.func(Z[:4, i]) for i in range(Z.shape[1])])
        scale = max(np.max(np.abs(g)), 1e-300)
        for i in range(1, len(g) - 1):
            if not (abs(g[i]) <= abs(g[i - 1]) and abs(g[i]) <= abs(g[i + 1])):
                continue
            if not (g[i] != 0 and np.sign(g[i - 1]) == np.sign(g[i]) == np.sign(g[i + 1])):
                continue
            # vertex of the parabola through the three samples
            curv = g[i - 1] - 2 * g[i] + g[i + 1]
            peak = g[i] - (g[i + 1] - g[i - 1]) ** 2 / (8 * curv) if curv != 0 else g[i]
            if abs(peak) < rel * scale or np.sign(peak) != np.sign(g[i]):
                warnings.warn(f"grazing contact of event {ev.name!r} near t={ts[i]:.6g}",
                              GrazingEventWarning, stacklevel=3)


# ---------------------------------------------------------------------------
# Gauss-Legendre order 6

_S15 = math.sqrt(15.0)
_GL_A = np.array([[5 / 36, 2 / 9 - _S15 / 15, 5 / 36 - _S15 / 30],
                  [5 / 36 + _S15 / 24, 2 / 9, 5 / 36 - _S15 / 24],
                  [5 / 36 + _S15 / 30, 2 / 9 + _S15 / 15, 5 / 36]])
_GL_B = np.array([5 / 18, 4 / 9, 5 / 18])
_GL_C = np.array([0.5 - _S15 / 10, 0.5, 0.5 + _S15 / 10])


def _gauss_step(rhs, t, z, h, f0, tol=1e-15, maxiter=100):
    K = np.tile(f0, (3, 1))
    for _ in range(maxiter):
        Knew = np.array([rhs(t + _GL_C[i] * h, z + h * (_GL_A[i] @ K)) for i in range(3)])
        err = np.max(np.abs(Knew - K))
        K = Knew
        if err <= tol * max(1.0, np.max(np.abs(K))):
            break
    else:
        raise IntegrationError("Gauss stage iteration did not converge")
    return z + h * (_GL_B @ K)


def _integrate_gauss(model, rhs, z0, t_span, step, evs, tol):
    t0, t1 = map(float, t_span)
    n = max(1, int(math.ceil(abs(t1 - t0) / step - 1e-12)))
    h = (t1 - t0) / n
    ts = [t0]
    zs = [z0.copy()]
    fs = [rhs(t0, z0)]
    status = "complete"
    gvals = [[float(e.func(z0[:4]))] for e in evs]
    stop = False
    for k in range(n):
        z = _gauss_step(rhs, ts[-1], zs[-1], h, fs[-1])
        tn = t0 + (k + 1) * h
        if not np.all(np.isfinite(z)):
            status = "step-underflow"
            break
        ts.append(tn)
        zs.append(z)
        fs.append(rhs(tn, z))
        for j, e in enumerate(evs):
            gv = float(e.func(z[:4]))
            prev = gvals[j][-1]
            gvals[j].append(gv)
            if e.terminal and prev * gv < 0 and (e.direction == 0 or np.sign(gv - prev) == e.direction):
                stop = True
                status = "domain-exit" if e.name == "domain-exit" else "terminal-event"
        if stop:
            break
    t = np.array(ts)
    Z = np.array(zs)
    if len(t) > 1:
        dense_x = CubicHermiteSpline(t, Z, np.array(fs), axis=0)
        dense = lambda s: np.asarray(dense_x(s)).T
    else:
        dense = lambda s: np.repeat(Z[:1].T, np.size(s), axis=1).reshape(Z.shape[1], *np.shape(s))
    records = []
    for j, e in enumerate(evs):
        g = np.array(gvals[j])
        for i in np.nonzero(g[:-1] * g[1:] < 0)[0]:
            if e.direction and np.sign(g[i + 1] - g[i]) != e.direction:
                continue
            fz = lambda s: float(e.func(dense(s)[:4]))
            te = brentq(fz, t[i], t[i + 1], xtol=1e-15) if t[i] < t[i + 1] else brentq(fz, t[i + 1], t[i], xtol=1e-15)
            records.append(_record(e, te, dense(te), dense))
    return _finish(model, t, Z, dense, records, status, "")


# ---------------------------------------------------------------------------
# monodromy

def symplecticity_error(P) -> float:
    P = np.asarray(P)
    return float(np.max(np.abs(P.T @ J0 @ P - J0)))


def floquet_class(M, tol: float = 1e-6):
    """Floquet classification of a 4x4 symplectic monodromy.

    The characteristic polynomial is palindromic with coefficients s1 = tr M
    and s2 = (tr(M)^2 - tr(M^2))/2.  A double multiplier 1 means s2 = 2 s1 - 2;
    the remaining pair satisfies lambda + 1/lambda = s1 - 2.

    Returns
    -------
    kind : str
        ``hyperbolic`` (real pair off +-1), ``elliptic`` (non-real unit pair)
        or ``parabolic``.
    info : dict
    """
    M = np.asarray(M, dtype=float)
    s1 = float(np.trace(M))
    s2 = float(0.5 * (s1**2 - np.trace(M @ M)))
    trivial = abs(s2 - 2 * s1 + 2)
    tau = s1 - 2.0
    if abs(tau) > 2 + tol:
        kind = "hyperbolic"
    elif abs(tau) < 2 - tol:
        kind = "elliptic"
    else:
        kind = "parabolic"
    disc = complex(tau * tau - 4.0)
    pair = ((tau + np.sqrt(disc)) / 2, (tau - np.sqrt(disc)) / 2)
    eig = np.linalg.eigvals(M)
    return kind, {
        "transverse_trace": tau,
        "trivial_residual": trivial,
        "multipliers": [complex(p) for p in pair],
        "eigenvalues": [complex(e) for e in eig[np.argsort(-np.abs(eig))]],
    }


def monodromy(model: MechanicalModel, orbit, tolerance: float = 1e-12, closure_tol: float = 1e-8):
    """Monodromy matrix Phi(T) of a periodic orbit and its Floquet class.

    ``orbit`` needs ``initial_state`` (length-4 array) and ``period``.
    """
    traj = integrate_flow(model, orbit.initial_state, (0.0, orbit.period), tolerance,
                          with_variational=True)
    if traj.status != "complete":
        raise IntegrationError(f"monodromy integration truncated: {traj.status}")
    gap = float(np.linalg.norm(traj.final - np.asarray(orbit.initial_state)))
    if gap > closure_tol:
        raise IntegrationError(f"orbit does not close (gap {gap:.2e})")
    M = traj.phi[-1]
    kind, info = floquet_class(M)
    info["closure"] = gap
    info["symplecticity"] = symplecticity_error(M)
    return M, kind, info
