"""Periodic orbits: Lyapunov seeds, shooting refinement and actions.

Symmetric shooting uses a reversing involution R of the flow (R maps
orbits to time-reversed orbits).  A trajectory starting on Fix(R) that
meets Fix(R) again after time tau is periodic with period 2 tau.  The brake
reversor (x, y) -> (x, -y) is always available; every declared reflection
S of the potential gives another one, (x, y) -> (S x, -S y).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .dynamics import floquet_class, hamiltonian_rhs, integrate_flow, symplecticity_error, variational_rhs
from .models import MechanicalModel, PhaseState, principal_axes

__all__ = [
    "OrbitError",
    "Reversor",
    "PeriodicOrbit",
    "reversors",
    "lyapunov_seed",
    "refine_periodic_orbit",
    "orbit_action",
    "orbit_lambda_action",
    "attach_index",
    "smallest_action_survey",
    "time_reflection_error",
    "lyapunov_family",
]


class OrbitError(RuntimeError):
    """Newton divergence or convergence to an unintended orbit."""


@dataclass(frozen=True)
class Reversor:
    """Linear reversing involution of phase space."""

    name: str
    matrix: np.ndarray

    def bases(self):
        """Orthonormal bases (P, Q) of Fix(R) and of the -1 eigenspace."""
        evals, evecs = np.linalg.eigh(self.matrix)
        return evecs[:, evals > 0], evecs[:, evals < 0]

    def defect(self, w) -> float:
        _, Q = self.bases()
        return float(np.linalg.norm(Q.T @ np.asarray(w, dtype=float)))


CLOSURE_TOL = 1e-6
BRAKE = Reversor("brake", np.diag([1.0, 1.0, -1.0, -1.0]))


def reversors(model: MechanicalModel) -> list:
    """Brake reversor and one reversor per involutive symmetry."""
    out = [BRAKE]
    for s in model.symmetries:
        S = np.asarray(s.matrix, dtype=float)
        if not np.allclose(S @ S, np.eye(2), atol=1e-12):
            continue
        M = np.zeros((4, 4))
        M[:2, :2] = S
        M[2:, 2:] = -S
        out.append(Reversor(s.name, M))
    return out


@dataclass
class PeriodicOrbit:
    """Closed orbit of the Hamiltonian flow with its derived data."""

    initial_state: np.ndarray
    period: float
    energy: float
    residual: float
    model_name: str = ""
    label: str = ""
    method: str = ""
    iterations: int = 0
    monodromy: Optional[np.ndarray] = field(default=None, repr=False)
    floquet: str = ""
    floquet_info: dict = field(default_factory=dict, repr=False)
    action: float = float("nan")
    lambda_action: float = float("nan")
    symmetry: tuple = ()
    interval: Optional[tuple] = None
    mu: Optional[int] = None
    degenerate: Optional[bool] = None

    @property
    def state(self) -> PhaseState:
        return PhaseState.from_vector(self.initial_state)

    def to_dict(self) -> dict:
        return {
            "model": self.model_name,
            "label": self.label,
            "initial_state": [float(v) for v in self.initial_state],
            "period": float(self.period),
            "energy": float(self.energy),
            "action": float(self.action),
            "mu": None if self.mu is None else int(self.mu),
            "I": None if self.interval is None else [float(v) for v in self.interval],
            "floquet": self.floquet,
            "residual": float(self.residual),
            "symmetry": list(self.symmetry),
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=1)
            fh.write("\n")


# ---------------------------------------------------------------------------
# seeds


def lyapunov_seed(model: MechanicalModel, saddle, dE: float):
    """Seed on the linearised Lyapunov ellipse over a saddle of V.

    The seed is the brake point ``x = v + sqrt(2 dE / b) e2`` with ``y = 0``,
    where ``e2`` is the elliptic principal axis.

    Returns
    -------
    seed : PhaseState
    period : float
        ``2 pi / sqrt(b)``.
    """
    if not dE > 0:
        raise ValueError("energy offset dE must be positive")
    v = np.asarray(saddle.location, dtype=float)
    try:
        R, (a, b) = principal_axes(model.hess(v))
    except Exception as exc:
        raise OrbitError(f"degenerate saddle data: {exc}") from None
    if min(-a, b) < 1e-10:
        raise OrbitError("degenerate saddle data")
    x = v + math.sqrt(2.0 * dE / b) * R[:, 1]
    return PhaseState(x, np.zeros(2)), 2.0 * math.pi / math.sqrt(b)


# ---------------------------------------------------------------------------
# refinement


def _flow_to(model, w0, t, tol, variational=True):
    rhs = variational_rhs(model) if variational else hamiltonian_rhs(model)
    z0 = np.concatenate([w0, np.eye(4).ravel()]) if variational else np.asarray(w0, float)
    sol = solve_ivp(rhs, (0.0, t), z0, method="DOP853", rtol=tol, atol=tol)
    if sol.status != 0:
        raise OrbitError(f"integration failed: {sol.message}")
    z = sol.y[:, -1]
    if variational:
        return z[:4], z[4:].reshape(4, 4)
    return z[:4], None


def _pick_reversor(model, w0, reversor):
    revs = reversors(model)
    if reversor is None:
        return min(revs, key=lambda r: r.defect(w0))
    if isinstance(reversor, Reversor):
        return reversor
    for r in revs:
        if r.name == reversor:
            return r
    raise ValueError(f"model declares no reversor named {reversor!r}")


def _symmetric(model, w0, T, E, rev, tol, maxiter, int_tol):
    P, Q = rev.bases()
    s = P.T @ w0
    tau = 0.5 * T
    grad_H = lambda w: np.concatenate([model.grad(w[:2]), w[2:]])
    for it in range(1, maxiter + 1):
        w = P @ s
        wt, Phi = _flow_to(model, w, tau, int_tol)
        F = np.concatenate([Q.T @ wt, [model.energy(w) - E]])
        if np.max(np.abs(F)) < tol:
            return w, 2 * tau, it
        f_end = model.vector_field(wt)
        J = np.zeros((3, 3))
        J[:2, :2] = Q.T @ Phi @ P
        J[:2, 2] = Q.T @ f_end
        J[2, :2] = grad_H(w) @ P
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            raise OrbitError("singular shooting Jacobian") from None
        # damp large corrections
        scale = min(1.0, 0.1 * (1 + np.linalg.norm(s)) / max(np.linalg.norm(step[:2]), 1e-300))
        s = s + scale * step[:2]
        tau = tau + scale * step[2]
        if not tau > 0 or not np.all(np.isfinite(s)):
            break
    raise OrbitError("symmetric shooting did not converge")


def _generic(model, w0, T, E, tol, maxiter, int_tol):
    w = np.asarray(w0, dtype=float).copy()
    ref = w.copy()
    f_ref = model.vector_field(ref)
    for it in range(1, maxiter + 1):
        wT, Phi = _flow_to(model, w, T, int_tol)
        F = np.concatenate([wT - w, [f_ref @ (w - ref), model.energy(w) - E]])
        if np.max(np.abs(F)) < tol:
            return w, T, it
        J = np.zeros((6, 5))
        J[:4, :4] = Phi - np.eye(4)
        J[:4, 4] = model.vector_field(wT)
        J[4, :4] = f_ref
        J[5, :4] = np.concatenate([model.grad(w[:2]), w[2:]])
        step = np.linalg.lstsq(J, -F, rcond=None)[0]
        w = w + step[:4]
        T = T + step[4]
        if not T > 0 or not np.all(np.isfinite(w)):
            break
    raise OrbitError("generic Newton did not converge")


def refine_periodic_orbit(model: MechanicalModel, seed, period: float, method: str = "auto", *,
                          energy: Optional[float] = None, reversor=None, tol: float = 1e-10,
                          maxiter: int = 40, max_distance: float = 0.5,
                          int_tol: float = 1e-13, label: str = "") -> PeriodicOrbit:
    """Refine a periodic orbit by shooting.

    Parameters
    ----------
    seed : PhaseState or array_like
    period : float
        Period guess.
    method : {"auto", "symmetric", "generic"}
        ``auto`` tries symmetric shooting and falls back on generic Newton.
    energy : float, optional
        Target energy, by default ``H(seed)``.
    reversor : Reversor or str, optional
        For symmetric shooting; by default the reversor whose fixed set is
        closest to the seed.
    max_distance : float
        The refined initial state must lie within this distance of the seed.

    Returns
    -------
    PeriodicOrbit
        With monodromy, Floquet class and actions filled in.
    """
    w0 = seed.w if isinstance(seed, PhaseState) else np.asarray(seed, dtype=float).reshape(4)
    E = float(model.energy(w0)) if energy is None else float(energy)
    if method not in ("auto", "symmetric", "generic"):
        raise ValueError(f"unknown method {method!r}")
    rev = None
    result = None
    errors = []
    if method in ("auto", "symmetric"):
        rev = _pick_reversor(model, w0, reversor)
        P, _ = rev.bases()
        try:
            result = _symmetric(model, P @ (P.T @ w0), period, E, rev, tol, maxiter, int_tol)
        except OrbitError as exc:
            errors.append(str(exc))
            if method == "symmetric":
                raise
            rev = None
    if result is None:
        result = _generic(model, w0, period, E, tol, maxiter, int_tol)
    w, T, its = result
    dist = float(np.linalg.norm(w - w0))
    if dist > max_distance:
        raise OrbitError(f"converged to a different orbit (distance {dist:.3g} from seed)")
    orb = _finish(model, w, T, E, its, "symmetric" if rev is not None else "generic",
                  rev, label, int_tol)
    if orb.residual > CLOSURE_TOL:
        raise OrbitError(f"refined orbit does not close (gap {orb.residual:.2e})")
    return orb


def _finish(model, w, T, E, its, method, rev, label, int_tol):
    wT, M = _flow_to(model, w, T, int_tol)
    residual = float(np.linalg.norm(wT - w))
    kind, info = floquet_class(M)
    info["symplecticity"] = symplecticity_error(M)
    act, lam = _actions(model, w, T, int_tol)
    tags = [rev.name] if rev is not None else []
    if BRAKE.defect(w) < 1e-8:
        w_half, _ = _flow_to(model, w, 0.5 * T, int_tol, variational=False)
        if BRAKE.defect(w_half) < 1e-8:
            tags.append("brake-orbit")
    return PeriodicOrbit(w, float(T), float(E), residual, model.name, label, method, its, M,
                         kind, info, act, lam, tuple(tags))


# ---------------------------------------------------------------------------
# actions


def _actions(model, w0, T, tol):
    def rhs(t, z):
        w = z[:4]
        g = model.grad(w[:2])
        y2 = w[2] ** 2 + w[3] ** 2
        lam = 0.5 * (-(w[0] * g[0] + w[1] * g[1]) - y2)
        return np.array([w[2], w[3], -g[0], -g[1], y2, lam])

    sol = solve_ivp(rhs, (0.0, T), np.concatenate([w0, [0.0, 0.0]]), method="DOP853",
                    rtol=tol, atol=tol)
    if sol.status != 0:
        raise OrbitError(f"action quadrature failed: {sol.message}")
    return float(sol.y[4, -1]), float(sol.y[5, -1])


def orbit_action(model: MechanicalModel, orbit, iterations: int = 1, tol: float = 1e-13,
                 closure_tol: float = 1e-8) -> float:
    """Action of a closed orbit, the loop integral of y.dx = int |y|^2 dt.

    ``iterations`` > 1 gives the action of the iterate P^k.
    """
    w0 = np.asarray(orbit.initial_state, dtype=float)
    T = float(orbit.period) * int(iterations)
    wT, _ = _flow_to(model, w0, float(orbit.period), tol, variational=False)
    if np.linalg.norm(wT - w0) > closure_tol:
        raise OrbitError("open trajectory: action is defined for closed orbits only")
    return _actions(model, w0, T, tol)[0]


def orbit_lambda_action(model: MechanicalModel, orbit, tol: float = 1e-13) -> float:
    """Loop integral of lambda = (x.dy - y.dx)/2 along the orbit."""
    return _actions(model, np.asarray(orbit.initial_state, float), float(orbit.period), tol)[1]


def attach_index(model: MechanicalModel, orbit: PeriodicOrbit, eps: float = 1e-5, **kw) -> PeriodicOrbit:
    """Fill in the winding interval and index of ``orbit`` in place."""
    from .czindex import conley_zehnder_index, winding_interval

    I = winding_interval(model, orbit, **kw)
    res = conley_zehnder_index(I, eps)
    orbit.interval = I.bounds
    orbit.mu = res.mu
    orbit.degenerate = res.degenerate
    return orbit


def smallest_action_survey(orbits: Sequence[PeriodicOrbit], energy_tol: float = 1e-8,
                           lyapunov_label: str = "lyapunov") -> dict:
    """Rank orbits of one energy level by action.

    Orbits whose label starts with ``lyapunov_label`` are expected to come
    first; ``margin`` is the gap between the largest such action and the
    smallest other one (positive when the expectation holds).
    """
    if not orbits:
        raise ValueError("no orbits given")
    E = np.array([o.energy for o in orbits])
    if np.ptp(E) > energy_tol:
        raise ValueError(f"energy mismatch among orbits ({np.ptp(E):.2e})")
    order = sorted(range(len(orbits)), key=lambda i: orbits[i].action)
    ranking = [{"label": orbits[i].label, "action": float(orbits[i].action), "mu": orbits[i].mu}
               for i in order]
    lyap = [o.action for o in orbits if o.label.startswith(lyapunov_label)]
    other = [o.action for o in orbits if not o.label.startswith(lyapunov_label)]
    if lyap and other:
        margin = float(min(other) - max(lyap))
        first = margin > 0
    else:
        margin = None
        first = bool(lyap) or len(orbits) == 1
    spread = float(np.ptp(lyap)) if lyap else None
    return {"energy": float(E.mean()), "ranking": ranking, "lyapunov_first": first,
            "margin": margin, "lyapunov_spread": spread}


def time_reflection_error(model: MechanicalModel, orbit: PeriodicOrbit, reversor=BRAKE,
                          n: int = 32, tol: float = 1e-13) -> float:
    """max_t |w(-t) - R w(t)| over n sample times in [0, T]."""
    w0 = np.asarray(orbit.initial_state, dtype=float)
    ts = np.linspace(0.0, orbit.period, n)
    rhs = hamiltonian_rhs(model)
    fwd = solve_ivp(rhs, (0.0, orbit.period), w0, rtol=tol, atol=tol, method="DOP853",
                    t_eval=ts).y.T
    bwd = solve_ivp(rhs, (0.0, -orbit.period), w0, rtol=tol, atol=tol, method="DOP853",
                    t_eval=-ts).y.T
    R = np.asarray(reversor.matrix)
    return float(np.max(np.abs(bwd - fwd @ R.T)))


def lyapunov_family(model: MechanicalModel, saddle, offsets, **kw) -> list:
    """Lyapunov orbits over a saddle for a sweep of energy offsets.

    Seeds come from the linear ellipse; the previous period is the period
    guess for the next offset.
    """
    out = []
    for dE in offsets:
        seed, T = lyapunov_seed(model, saddle, dE)
        if out:
            T = out[-1].period
        orb = refine_periodic_orbit(model, seed, T, energy=float(saddle.value) + dE,
                                    reversor="brake", label="lyapunov", **kw)
        out.append(orb)
    return out
