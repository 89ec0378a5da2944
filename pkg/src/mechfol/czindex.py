"""Winding intervals, Conley-Zehnder indices and rotation numbers.

The transverse linearised flow along a periodic orbit is a path of 2x2
symplectic matrices Psi(t).  For an initial direction theta the unwrapped
angle gain over one period is Delta(theta); Delta is pi-periodic, so the lift
F(theta) = theta + Delta(theta) of the induced circle map is fully described
by Psi(T) together with one branch per grid point.  Iterates P^k are handled
by composing F, which avoids integrating k periods.

Intervals are reported in revolutions, i.e. Delta / 2 pi.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize_scalar

from .frame import FrameError, kappa_closed_form, ROT
from .models import MechanicalModel, principal_axes

__all__ = [
    "IndexError_",
    "TransverseLift",
    "WindingInterval",
    "IndexResult",
    "RotationResult",
    "NeckRun",
    "NeckTable",
    "transverse_lift",
    "winding_interval",
    "iterate_interval",
    "mu_from_interval",
    "conley_zehnder_index",
    "rotation_number",
    "index_report",
    "neck_rotation_experiment",
]

TWO_PI = 2.0 * math.pi
EPS_CHECK = (1e-4, 1e-5, 1e-6)


class IndexError_(RuntimeError):
    """Failure of the index engine (sampling, closure or regularity)."""


# ---------------------------------------------------------------------------
# transverse lift


@dataclass
class TransverseLift:
    """Lift of the circle map induced by the period map Psi(T).

    ``delta_grid`` holds the integrated angle gains at ``theta_grid`` (an
    equispaced grid on [0, pi)); any other angle gets the branch of
    ``arg(Psi c) - theta`` closest to the periodic interpolant.  Since all
    gains lie in an interval shorter than pi the choice is unambiguous.
    """

    theta_grid: np.ndarray
    delta_grid: np.ndarray
    Psi: np.ndarray

    def delta(self, theta):
        theta = np.asarray(theta, dtype=float)
        guess = np.interp(theta, self.theta_grid, self.delta_grid, period=math.pi)
        v0 = self.Psi[0, 0] * np.cos(theta) + self.Psi[0, 1] * np.sin(theta)
        v1 = self.Psi[1, 0] * np.cos(theta) + self.Psi[1, 1] * np.sin(theta)
        raw = np.arctan2(v1, v0) - theta
        return raw + TWO_PI * np.round((guess - raw) / TWO_PI)

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        return theta + self.delta(theta)

    def iterate_delta(self, theta, k: int):
        """Angle gain of the k-th iterate, F^k(theta) - theta."""
        theta = np.asarray(theta, dtype=float)
        cur = theta
        for _ in range(int(k)):
            cur = self(cur)
        return cur - theta


def _orbit_data(orbit):
    if hasattr(orbit, "initial_state") and hasattr(orbit, "period"):
        return np.asarray(orbit.initial_state, dtype=float), float(orbit.period)
    w0, T = orbit
    return np.asarray(w0, dtype=float), float(T)


def _joint_rhs(model, n):
    def rhs(t, z):
        w = z[:4]
        try:
            k11, k12, k22, k33 = kappa_closed_form(model, w)
        except FrameError as exc:
            raise IndexError_(f"orbit meets a critical point of H: {exc}") from None
        s11, s22 = k11 + k33, k22 + k33
        th = z[4:4 + n]
        c, s = np.cos(th), np.sin(th)
        dth = s11 * c * c + 2 * k12 * c * s + s22 * s * s
        A = ROT @ np.array([[s11, k12], [k12, s22]])
        P = z[4 + n:].reshape(2, 2)
        return np.concatenate([[w[2], w[3]], -model.grad(w[:2]), dth, (A @ P).ravel()])
    return rhs


def transverse_lift(model: MechanicalModel, orbit, samples: int = 64,
                    tolerance: float = 1e-11, closure_tol: float = 1e-6):
    """Integrate base flow, grid angles and Psi over one period.

    Returns
    -------
    lift : TransverseLift
    closure : float
        ``|w(T) - w(0)|`` of the re-integrated orbit.
    """
    w0, T = _orbit_data(orbit)
    if not T > 0:
        raise IndexError_("period must be positive")
    n = int(samples)
    grid = np.arange(n) * (math.pi / n)
    z0 = np.concatenate([w0, grid, np.eye(2).ravel()])
    sol = solve_ivp(_joint_rhs(model, n), (0.0, T), z0, method="DOP853",
                    rtol=tolerance, atol=tolerance)
    if sol.status != 0:
        raise IndexError_(f"transverse integration failed: {sol.message}")
    zT = sol.y[:, -1]
    gap = zT[:4] - w0
    if model.periodic is not None:
        x = model.wrap(zT[:2])
        gap[:2] = np.asarray(x) - np.asarray(model.wrap(w0[:2]))
    closure = float(np.linalg.norm(gap))
    if closure > closure_tol:
        raise IndexError_(f"orbit not closed within tolerance (gap {closure:.2e})")
    lift = TransverseLift(grid, zT[4:4 + n] - grid, zT[4 + n:].reshape(2, 2))
    return lift, closure


# ---------------------------------------------------------------------------
# intervals


@dataclass
class WindingInterval:
    """Range of normalised angle gains over transverse directions."""

    lower: float
    upper: float
    samples: int
    values: np.ndarray
    theta0: np.ndarray
    iterate: int = 1
    doubling_shift: float = 0.0
    closure: float = 0.0
    lift: Optional[TransverseLift] = field(default=None, repr=False, compare=False)

    @property
    def length(self) -> float:
        return self.upper - self.lower

    @property
    def bounds(self):
        return (self.lower, self.upper)


def _refine_extreme(fun, grid, vals, sign):
    """Refine the max (sign=+1) or min (sign=-1) of fun next to the grid optimum."""
    i = int(np.argmax(sign * vals))
    h = grid[1] - grid[0] if len(grid) > 1 else math.pi
    best = float(vals[i])
    res = minimize_scalar(lambda th: -sign * float(fun(th)),
                          bounds=(grid[i] - h, grid[i] + h), method="bounded",
                          options={"xatol": 1e-12})
    if res.success:
        cand = -sign * float(res.fun)
        if sign * cand > sign * best:
            best = cand
    return best


def _interval_from_lift(lift: TransverseLift, k: int, samples: int, refine: bool):
    grid = np.arange(samples) * (math.pi / samples)
    if k == 1 and samples == len(lift.theta_grid):
        vals = lift.delta_grid.copy()
    else:
        vals = lift.iterate_delta(grid, k)
    lo, hi = float(vals.min()), float(vals.max())
    if refine:
        fun = lambda th: lift.iterate_delta(th, k)
        lo = _refine_extreme(fun, grid, vals, -1)
        hi = _refine_extreme(fun, grid, vals, +1)
    return lo / TWO_PI, hi / TWO_PI, vals / TWO_PI, grid


def winding_interval(model: MechanicalModel, orbit, samples: int = 64, *,
                     refine: bool = True, shift_tol: float = 1e-6, max_samples: int = 1024,
                     tolerance: float = 1e-11, closure_tol: float = 1e-6) -> WindingInterval:
    """Winding interval of a periodic orbit.

    The angle ODE is integrated for ``samples`` initial angles in [0, pi);
    extremes are refined through the lift.  The sample count is doubled
    until both endpoints move by less than ``shift_tol``.

    Raises
    ------
    IndexError_
        If the orbit is not closed, meets a critical point of H, or the
        interval is not shorter than 1/2.
    """
    n = int(samples)
    prev = None
    while True:
        lift, closure = transverse_lift(model, orbit, n, tolerance, closure_tol)
        lo, hi, vals, grid = _interval_from_lift(lift, 1, n, refine)
        if prev is not None:
            shift = max(abs(lo - prev[0]), abs(hi - prev[1]))
            if shift < shift_tol or 2 * n > max_samples:
                break
        prev = (lo, hi)
        n *= 2
        if n > max_samples:
            shift = float("nan")
            break
    out = WindingInterval(lo, hi, n, vals, grid, 1, float(shift), closure, lift)
    if out.length >= 0.5:
        raise IndexError_(f"winding interval has length {out.length:.3f} >= 1/2")
    return out


def iterate_interval(interval_or_lift, k: int, samples: int = 512,
                     refine: bool = True) -> WindingInterval:
    """Winding interval of the k-th iterate, from the lift of one period."""
    lift = getattr(interval_or_lift, "lift", interval_or_lift)
    if not isinstance(lift, TransverseLift):
        raise IndexError_("an interval carrying its lift is required")
    lo, hi, vals, grid = _interval_from_lift(lift, int(k), samples, refine)
    return WindingInterval(lo, hi, samples, vals, grid, int(k), 0.0, 0.0, lift)


# ---------------------------------------------------------------------------
# index


@dataclass
class IndexResult:
    mu: int
    degenerate: bool
    stable: bool
    eps: float
    interval: tuple
    mu_by_eps: dict
    rho: Optional[float] = None
    rho_error: Optional[float] = None

    def to_dict(self) -> dict:
        return {"I": [float(self.interval[0]), float(self.interval[1])], "mu": int(self.mu),
                "degenerate": bool(self.degenerate), "stable": bool(self.stable),
                "eps": float(self.eps), "rho": self.rho, "rho_error": self.rho_error}


def mu_from_interval(lower: float, upper: float, eps: float) -> int:
    """Index of the shifted interval [lower - eps, upper - eps]."""
    lo, hi = lower - eps, upper - eps
    k = math.floor(hi)
    if k == hi:
        k -= 1
    if k > lo:
        return 2 * k
    return 2 * math.floor(lo) + 1


def conley_zehnder_index(interval, eps: float = 1e-5, degenerate_tol: float = 1e-8,
                         check: Sequence[float] = EPS_CHECK) -> IndexResult:
    """Conley-Zehnder index from a winding interval.

    ``mu = 2k`` if an integer k lies inside ``I - eps``, otherwise ``2k + 1``
    with ``I - eps`` inside (k, k + 1).

    Examples
    --------
    >>> conley_zehnder_index((1.5, 1.5)).mu
    3
    >>> conley_zehnder_index((0.9, 1.1)).mu
    2
    """
    lo, hi = (interval.lower, interval.upper) if hasattr(interval, "lower") else map(float, interval)
    if not 0 < eps < 1e-3:
        raise IndexError_("eps must lie in (0, 1e-3)")
    if hi < lo:
        raise IndexError_("interval endpoints out of order")
    if hi - lo >= 0.5:
        raise IndexError_(f"interval length {hi - lo:.3f} >= 1/2; sampling failure upstream")
    mu = mu_from_interval(lo, hi, eps)
    by_eps = {float(e): mu_from_interval(lo, hi, e) for e in check}
    stable = all(v == mu for v in by_eps.values())
    degenerate = any(abs(v - round(v)) < degenerate_tol for v in (lo, hi))
    return IndexResult(mu, degenerate, stable, float(eps), (float(lo), float(hi)), by_eps)


@dataclass
class RotationResult:
    rho: float
    error: float
    converged: bool
    k_max: int
    mu: np.ndarray          # mu(P^k), k = 1..k_max
    rho_k: np.ndarray

    def to_dict(self) -> dict:
        return {"rho": self.rho, "rho_error": self.error, "converged": self.converged,
                "k_max": self.k_max, "mu_first": [int(m) for m in self.mu[:10]]}


def rotation_number(model: MechanicalModel, orbit, k_max: int = 200, *, samples: int = 512,
                    eps: float = 1e-5, tol: Optional[float] = None,
                    interval: Optional[WindingInterval] = None) -> RotationResult:
    """Rotation number as mu(P^k) / 2k at k = k_max.

    Iterate intervals come from composing the lift on a fixed grid (no
    extremum refinement), so each estimate is within 1/2k of the limit.
    ``converged`` compares the Cauchy error with ``tol`` (default 2/k_max).
    """
    if interval is None:
        interval = winding_interval(model, orbit)
    lift = interval.lift
    grid = np.arange(samples) * (math.pi / samples)
    cur = grid.copy()
    mus = np.empty(k_max, dtype=int)
    for k in range(1, k_max + 1):
        cur = lift(cur)
        d = (cur - grid) / TWO_PI
        mus[k - 1] = mu_from_interval(float(d.min()), float(d.max()), eps)
    rho_k = mus / (2.0 * np.arange(1, k_max + 1))
    err = float(abs(rho_k[-1] - rho_k[-2])) if k_max > 1 else float("inf")
    tol = 2.0 / k_max if tol is None else tol
    return RotationResult(float(rho_k[-1]), err, err <= tol, int(k_max), mus, rho_k)


def index_report(orbit_id: str, interval: WindingInterval, result: IndexResult,
                 rotation: Optional[RotationResult] = None) -> dict:
    """Index record ``{orbit id, I, mu, degenerate, rho, rho_error}``."""
    rho = result.rho if rotation is None else rotation.rho
    err = result.rho_error if rotation is None else rotation.error
    return {"orbit_id": orbit_id, "I": [float(interval.lower), float(interval.upper)],
            "mu": int(result.mu), "degenerate": bool(result.degenerate),
            "rho": None if rho is None else float(rho),
            "rho_error": None if err is None else float(err)}


# ---------------------------------------------------------------------------
# neck experiment


@dataclass
class NeckRun:
    energy: float
    approach: float
    time_in: float
    time_out: float
    delta_min: float
    delta_max: float
    closest: float

    @property
    def transit_time(self) -> float:
        return self.time_in + self.time_out


@dataclass
class NeckTable:
    runs: list
    omega: float
    entry: float
    kind: str

    @property
    def C(self) -> float:
        """Smallest C with delta_theta >= omega * (transit time) - C on all runs."""
        good = [r for r in self.runs if np.isfinite(r.delta_min)]
        return max(self.omega * r.transit_time - r.delta_min for r in good)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "omega": self.omega, "entry": self.entry,
                "C": float(self.C) if self.runs and np.isfinite(self.runs[0].delta_min) else None,
                "runs": [{"energy": r.energy, "approach": r.approach, "time_in": r.time_in,
                          "time_out": r.time_out, "transit_time": r.transit_time,
                          "delta_min": r.delta_min, "delta_max": r.delta_max,
                          "closest": r.closest} for r in self.runs]}

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("energy,approach,transit_time,delta_min,delta_max,closest\n")
            for r in self.runs:
                fh.write(",".join(f"{v:.17g}" for v in (r.energy, r.approach, r.transit_time,
                                                         r.delta_min, r.delta_max, r.closest)) + "\n")


def _neck_leg(model, w0, v, e1, entry, direction, t_max, rtol, atol):
    def g(t, w):
        return float(np.dot(e1, w[:2] - v)) ** 2 - entry**2
    g.terminal = True
    g.direction = 1.0

    def rhs(t, w):
        return np.concatenate([w[2:], -model.grad(w[:2])])

    sol = solve_ivp(rhs, (0.0, direction * t_max), w0, method="DOP853", rtol=rtol,
                    atol=atol, events=g, dense_output=True)
    if sol.status != 1 or len(sol.t_events[0]) == 0:
        raise IndexError_("trajectory fails to traverse the neck")
    return sol, float(abs(sol.t_events[0][0]))


def neck_rotation_experiment(model: MechanicalModel, saddle, energies, approaches=None, *,
                             entry: float = 1.0, kind: str = "transit", samples: int = 64,
                             angles: bool = True, tolerance: float = 1e-12,
                             t_max: float = 200.0) -> NeckTable:
    """Transverse angle gain of trajectories through a saddle neck.

    Each run starts at its closest approach in principal-axis coordinates
    (xi, eta) of the saddle, with ``xi = 0, eta1 = beta`` for transit runs or
    ``xi1 = beta, eta1 = 0`` for bounce runs and the energy fixing ``eta2``.
    The base orbit is integrated outward in both time directions until
    ``|xi1| = entry``; this keeps tiny approach distances resolvable.  The
    angle ODE is then integrated from the entry to the exit section for
    ``samples`` initial angles, and the minimum gain is recorded.

    Parameters
    ----------
    energies : sequence of float
        Absolute energies above the saddle value.
    approaches : sequence of float, optional
        Approach distances beta; by default ``sqrt(E - E_saddle)`` per energy.
    angles : bool
        If False only the transit times are computed.
    """
    v = np.asarray(saddle.location, dtype=float)
    R, (a, b) = principal_axes(model.hess(v))
    e1 = R[:, 0]
    omega = math.sqrt(b)
    if kind not in ("transit", "bounce"):
        raise ValueError("kind must be 'transit' or 'bounce'")
    runs = []
    for E in energies:
        dE = float(E) - float(saddle.value)
        if not dE > 0:
            raise IndexError_("energies must lie above the saddle value")
        betas = [math.sqrt(dE)] if approaches is None else list(approaches)
        for beta in betas:
            beta = float(beta)
            xi = np.array([0.0, 0.0]) if kind == "transit" else np.array([beta, 0.0])
            x = v + R @ xi
            kin = 2.0 * (float(E) - float(model.V(x))) - (beta**2 if kind == "transit" else 0.0)
            if kin < 0:
                raise IndexError_(f"approach {beta:g} not admissible at energy {E:g}")
            eta = np.array([beta, math.sqrt(kin)]) if kind == "transit" else np.array([0.0, math.sqrt(kin)])
            w0 = np.concatenate([x, R @ eta])
            atol = tolerance * min(1.0, beta) * 1e-3
            fwd, t_out = _neck_leg(model, w0, v, e1, entry, +1, t_max, tolerance, atol)
            bwd, t_in = _neck_leg(model, w0, v, e1, entry, -1, t_max, tolerance, atol)
            closest = beta
            if angles:
                dmin, dmax = _neck_angles(model, fwd, bwd, t_in, t_out, samples)
            else:
                dmin = dmax = float("nan")
            runs.append(NeckRun(float(E), beta, t_in, t_out, dmin, dmax, closest))
    return NeckTable(runs, omega, float(entry), kind)


def _neck_angles(model, fwd, bwd, t_in, t_out, samples):
    def base(t):
        return fwd.sol(t) if t >= 0 else bwd.sol(t)

    n = int(samples)
    grid = np.arange(n) * (math.pi / n)

    def rhs(t, th):
        k11, k12, k22, k33 = kappa_closed_form(model, base(t))
        c, s = np.cos(th), np.sin(th)
        return (k11 + k33) * c * c + 2 * k12 * c * s + (k22 + k33) * s * s

    sol = solve_ivp(rhs, (-t_in, t_out), grid, method="DOP853", rtol=1e-10, atol=1e-10)
    if sol.status != 0:
        raise IndexError_(f"neck angle integration failed: {sol.message}")
    d = sol.y[:, -1] - grid
    return float(d.min()), float(d.max())
