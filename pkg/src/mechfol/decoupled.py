"""Transverse foliations of decoupled systems H = H1(x1, y1) + H2(x2, y2).

Leaves are preimages of gradient lines of H1 in the (x1, y1) plane: over a
base point z the fiber is the circle {H2 = E - H1(z)}.  Along the gradient
flow z' = grad H1 the projected Hamiltonian field (y1, -V1') is the
rotation of grad H1, hence orthogonal to the base tangent, which makes
every leaf transverse to the flow wherever grad H1 != 0.

Endpoints of a base line are either critical points of H1 (the fiber is a
binding orbit {critical point} x {H2 circle}) or points of the collapse
curve H1 = E - min V2 where the fiber shrinks to a point.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .hill import GeometryError, euler_critical_data, extract_hill_component, find_critical_points
from .models import Factor, MechanicalModel, ModelError

__all__ = [
    "FoliationError",
    "FactorCritical",
    "FactorOrbit",
    "FactorSystem",
    "FoliationLeaf",
    "Binding",
    "Foliation",
    "ProductClass",
    "split_decoupled",
    "factor_orbit",
    "matching_energy",
    "product_orbit",
    "classify_product_orbit",
    "check_foliation_hypotheses",
    "gradient_leaves",
    "leaf_points",
    "leaf_residual",
    "leaf_separation",
    "euler_regime",
]

SEED_DIRECTION = (math.cos(0.7), math.sin(0.7))


class FoliationError(RuntimeError):
    """Invalid input or failed construction of a decoupled foliation."""


# ---------------------------------------------------------------------------
# factors


@dataclass(frozen=True)
class FactorCritical:
    factor: int
    location: float
    value: float
    kind: str           # minimum | maximum | degenerate
    curvature: float


@dataclass
class FactorSystem:
    """One-degree-of-freedom system H_i = y^2/2 + V_i(t)."""

    index: int
    factor: Factor
    critical_points: list
    energy: Optional[float] = None

    @property
    def interval(self):
        return self.factor.interval

    @property
    def periodic(self) -> bool:
        return bool(self.factor.periodic)

    def H(self, t, y):
        return 0.5 * y * y + self.factor.V(t)

    def minima(self):
        return [c for c in self.critical_points if c.kind == "minimum"]

    def maxima(self):
        return [c for c in self.critical_points if c.kind == "maximum"]

    def min_value(self, n: int = 4001) -> float:
        lo, hi = self.interval
        t = np.linspace(lo, hi, n)
        vals = [c.value for c in self.minima()] + [float(np.min(self.factor.V(t)))]
        return float(min(vals))


def _factor_critical_points(f: Factor, index: int, n: int = 4001, degenerate_tol: float = 1e-10):
    lo, hi = f.interval
    t = np.linspace(lo, hi, n)
    d = np.asarray(f.dV(t), dtype=float)
    roots = list(t[d == 0.0])
    sgn = np.sign(d)
    for i in np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]:
        roots.append(brentq(f.dV, t[i], t[i + 1], xtol=1e-15))
    roots = sorted(roots)
    if f.periodic:
        period = hi - lo
        roots = [r for r in roots if r < hi - 1e-12 or abs(r - lo - period) > 1e-9]
        roots = [r for r in roots if not (abs(r - hi) < 1e-9)]
    out = []
    for r in roots:
        if out and abs(r - out[-1].location) < 1e-9:
            continue
        k = float(f.d2V(r))
        kind = "degenerate" if abs(k) < degenerate_tol else ("minimum" if k > 0 else "maximum")
        out.append(FactorCritical(index, float(r), float(f.V(r)), kind, k))
    return out


def split_decoupled(model: MechanicalModel, energy: Optional[float] = None):
    """Factor systems of a decoupled model with their critical points.

    Raises
    ------
    FoliationError
        If the model declares no decoupled structure.
    """
    if model.decoupled is None:
        raise FoliationError(f"model {model.name!r} is not decoupled")
    f1, f2 = model.decoupled
    return (FactorSystem(1, f1, _factor_critical_points(f1, 1), energy),
            FactorSystem(2, f2, _factor_critical_points(f2, 2), energy))


# ---------------------------------------------------------------------------
# factor orbits and product orbits


@dataclass(frozen=True)
class FactorOrbit:
    """Periodic orbit of one factor at factor energy e around a minimum."""

    factor: int
    energy: float
    around: float
    turning: tuple
    period: float


def _turning_point(f: Factor, e: float, start: float, direction: int, limit: float):
    step = 1e-3 * max(1.0, abs(limit - start))
    t = start
    while True:
        nxt = t + direction * step
        if (direction > 0 and nxt > limit) or (direction < 0 and nxt < limit):
            nxt = limit
        if f.V(nxt) > e:
            return brentq(lambda s: f.V(s) - e, t, nxt, xtol=1e-15)
        if nxt == limit:
            raise FoliationError("factor orbit is not bounded inside the factor interval")
        t = nxt
        step *= 1.5


def factor_orbit(fs: FactorSystem, e: float, around: Optional[float] = None,
                 tol: float = 1e-13) -> FactorOrbit:
    """Closed orbit of factor ``fs`` at energy ``e`` in the well ``around``."""
    mins = fs.minima()
    if around is None:
        if not mins:
            raise FoliationError("factor has no minimum")
        around = min(mins, key=lambda c: c.value).location
    f = fs.factor
    if not float(f.V(around)) < e:
        raise FoliationError("factor energy must exceed the well bottom")
    lo, hi = fs.interval
    if fs.periodic:
        # a rotation-free oscillation in a periodic factor stays within one period
        lo, hi = around - 0.5 * (hi - lo), around + 0.5 * (hi - lo)
    a = _turning_point(f, e, around, -1, lo)
    b = _turning_point(f, e, around, +1, hi)

    def rhs(t, z):
        return [z[1], -float(f.dV(z[0]))]

    def ev(t, z):
        return z[1]
    ev.terminal = True
    ev.direction = 1.0
    # the start y = 0 is not detected: events need a sign change
    guess = 2 * math.pi / math.sqrt(max(float(f.d2V(around)), 1e-12))
    sol = solve_ivp(rhs, (0.0, 50 * guess), [b, 0.0], method="DOP853", rtol=tol, atol=tol,
                    events=ev)
    ts = [t for t in sol.t_events[0] if t > 1e-9]
    if not ts:
        raise FoliationError("factor orbit half-period not found")
    return FactorOrbit(fs.index, float(e), float(around), (float(a), float(b)), 2.0 * ts[0])


def matching_energy(fs: FactorSystem, period: float, around: Optional[float] = None,
                    bracket: Optional[tuple] = None) -> float:
    """Factor energy at which the well orbit has the given period."""
    mins = fs.minima()
    if around is None:
        around = min(mins, key=lambda c: c.value).location
    if bracket is None:
        bottom = float(fs.factor.V(around))
        tops = [c.value for c in fs.maxima() if c.value > bottom]
        top = min(tops) if tops else bottom + 10.0
        span = top - bottom
        bracket = (bottom + 1e-6 * span, top - 1e-9 * span)
    g = lambda e: factor_orbit(fs, e, around).period - period
    return brentq(g, *bracket, xtol=1e-14)


def _commensurate(T1, T2, max_n=12, tol=1e-9):
    for n1 in range(1, max_n + 1):
        for n2 in range(1, max_n + 1):
            if abs(n1 * T1 - n2 * T2) < tol * max(T1, T2):
                return n1, n2
    return None


def product_orbit(model: MechanicalModel, datum1, datum2):
    """Periodic orbit of the full system from factor data.

    Each datum is a :class:`FactorCritical` or a :class:`FactorOrbit`;
    orbits start at the right turning point of each factor.
    """
    from .orbits import PeriodicOrbit

    x = np.zeros(2)
    periods = []
    for k, d in enumerate((datum1, datum2)):
        if isinstance(d, FactorCritical):
            x[k] = d.location
        else:
            x[k] = d.turning[1]
            periods.append(d.period)
    if not periods:
        raise FoliationError("at least one datum must be an orbit")
    if len(periods) == 1:
        T = periods[0]
    else:
        n = _commensurate(*periods)
        if n is None:
            raise FoliationError("factor periods are not commensurate; product is not closed")
        T = n[0] * periods[0]
    w = np.array([x[0], x[1], 0.0, 0.0])
    return PeriodicOrbit(w, float(T), float(model.energy(w)), 0.0, model.name, "product")


@dataclass
class ProductClass:
    kind: str                  # min x orbit | max x orbit | orbit x orbit
    expected: str
    validated: Optional[dict] = None

    @property
    def consistent(self) -> Optional[bool]:
        return None if self.validated is None else self.validated.get("consistent")

    def to_dict(self) -> dict:
        return {"class": self.kind, "expected": self.expected, "validated": self.validated}


_EXPECTED = {
    "min x orbit": "mu >= 3",
    "max x orbit": "mu = 2, hyperbolic",
    "orbit x orbit": "rho integer >= 2, mu >= 3",
}


def classify_product_orbit(datum1, datum2, *, model: Optional[MechanicalModel] = None,
                           validate: bool = False, k_max: int = 1000) -> ProductClass:
    """Index class of a product orbit of a decoupled system.

    With ``validate`` the orbit is built and its index (and for orbit x orbit
    products its rotation number) is computed with the index engine.
    """
    crit = [d for d in (datum1, datum2) if isinstance(d, FactorCritical)]
    if len(crit) == 2:
        raise FoliationError("at most one datum may be a critical point")
    if crit:
        c = crit[0]
        if c.kind == "degenerate":
            raise FoliationError("degenerate critical point input")
        kind = "min x orbit" if c.kind == "minimum" else "max x orbit"
    else:
        kind = "orbit x orbit"
    out = ProductClass(kind, _EXPECTED[kind])
    if validate:
        if model is None:
            raise ValueError("validation needs the model")
        out.validated = _validate_product(model, datum1, datum2, kind, k_max)
    return out


def _validate_product(model, d1, d2, kind, k_max):
    from .czindex import conley_zehnder_index, rotation_number, winding_interval
    from .dynamics import monodromy

    orb = product_orbit(model, d1, d2)
    I = winding_interval(model, orb)
    res = conley_zehnder_index(I)
    _, floq, _ = monodromy(model, orb)
    data = {"mu": res.mu, "I": list(I.bounds), "floquet": floq, "period": orb.period,
            "degenerate": res.degenerate}
    if kind == "min x orbit":
        ok = res.mu >= 3
    elif kind == "max x orbit":
        ok = res.mu == 2 and floq == "hyperbolic"
    else:
        rot = rotation_number(model, orb, k_max=k_max, interval=I)
        data.update(rho=rot.rho, rho_error=rot.error)
        # mu(P^k) / 2k sits up to 1/2k below rho when an endpoint of I is an integer
        near = abs(rot.rho - round(rot.rho)) <= 0.5 / k_max + 1e-9
        ok = near and round(rot.rho) >= 2 and res.mu >= 3
    data["consistent"] = bool(ok)
    return data


# ---------------------------------------------------------------------------
# hypotheses


def _saddle_level(model, E):
    cps = find_critical_points(model)
    vals = [c.value for c in cps if c.kind == "saddle" and c.value <= E + 1e-12]
    return (max(vals) if vals else float(E)), cps


def check_foliation_hypotheses(model: MechanicalModel, E: float, interior_points=None,
                               level: Optional[float] = None, tol: float = 1e-6) -> dict:
    """Test that the projections of K0 contain no maximum of V1 or V2.

    K0 is taken at the highest saddle level not above ``E`` (or ``level``),
    one component per interior point; interior points default to the minima
    of V below that level.  A maximum of V_i counts as inside when it lies in
    the open projection interval farther than ``tol`` from its ends.

    Raises
    ------
    FoliationError
        For non-decoupled models or when K0 cannot be extracted.
    """
    f1, f2 = split_decoupled(model)
    L, cps = _saddle_level(model, E)
    if level is not None:
        L = float(level)
    if interior_points is None:
        interior_points = [c.location for c in cps if c.kind == "minimum" and c.value < L]
    comps = []
    for p in interior_points:
        p = np.asarray(p, dtype=float)
        if any(c["_comp"].contains(p)[0] for c in comps):
            continue
        try:
            comp = extract_hill_component(model, L, p, direction=SEED_DIRECTION)
        except GeometryError as exc:
            raise FoliationError(f"K0 extraction failed at {p.tolist()}: {exc}") from None
        proj = comp.projections()
        wit = []
        for fs, (lo, hi) in zip((f1, f2), proj):
            for m in fs.maxima():
                if lo + tol < m.location < hi - tol:
                    wit.append({"factor": fs.index, "location": m.location, "value": m.value})
        comps.append({"_comp": comp, "interior_point": p.tolist(),
                      "projections": [list(v) for v in proj], "witnesses": wit,
                      "pass": not wit})
    for c in comps:
        c.pop("_comp")
    return {"model": model.name, "energy": float(E), "level": float(L), "components": comps,
            "pass": bool(comps) and all(c["pass"] for c in comps)}


# ---------------------------------------------------------------------------
# leaves


@dataclass
class FoliationLeaf:
    """Gradient line of H1 with the H2 circles over it.

    ``t`` and ``base`` are the nodes of the integrated gradient line
    (z' = grad H1 in t).  ``start`` and ``end`` describe the limits:
    ``("critical", x1)`` for a critical point of H1 or ``("collapse",)``.
    """

    kind: str
    base: np.ndarray
    t: np.ndarray
    start: tuple
    end: tuple
    energy: float
    fiber_energy: np.ndarray

    def to_dict(self) -> dict:
        return {"kind": self.kind, "start": list(self.start), "end": list(self.end),
                "base": [[float(a), float(b)] for a, b in self.base]}


@dataclass(frozen=True)
class Binding:
    location: float
    kind: str           # central | lyapunov
    fiber_energy: float
    product_class: str

    def to_dict(self) -> dict:
        return {"x1": self.location, "kind": self.kind, "fiber_energy": self.fiber_energy,
                "class": self.product_class}


@dataclass
class Foliation:
    energy: float
    collapse_level: float
    chambers: list
    bindings: list
    leaves: list
    transversality: dict
    factor1: FactorSystem = field(repr=False, default=None)
    factor2: FactorSystem = field(repr=False, default=None)

    def count(self, kind: str) -> int:
        return sum(1 for l in self.leaves if l.kind == kind)

    def to_dict(self) -> dict:
        return {"energy": self.energy, "collapse_level": self.collapse_level,
                "chambers": [list(c) for c in self.chambers],
                "bindings": [b.to_dict() for b in self.bindings],
                "counts": {k: self.count(k) for k in ("family-plane", "rigid-plane", "rigid-cylinder")},
                "transversality": self.transversality,
                "leaves": [l.to_dict() for l in self.leaves]}

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)
            fh.write("\n")

    def to_svg(self, path, size: int = 480) -> None:
        _foliation_svg(self, path, size)


def _chambers(f1: FactorSystem, top: float, around=None):
    lo_b, hi_b = f1.interval
    maxima = sorted(c.location for c in f1.maxima())
    out = []
    for m in f1.minima():
        if m.value >= top:
            continue
        if around is not None and abs(m.location - around) > 1e-9:
            continue
        left = max([x for x in maxima if x < m.location], default=lo_b)
        right = min([x for x in maxima if x > m.location], default=hi_b)
        out.append((m, (float(left), float(right))))
    return out


def _grad_line(f: Factor, z0, top, sign, stops, t_max, tol, stop_radius, max_step=0.02):
    """Gradient line of H1 from z0; sign=-1 integrates the reversed field."""
    def rhs(t, z):
        return [sign * float(f.dV(z[0])), sign * z[1]]

    def collapse(t, z):
        return 0.5 * z[1] ** 2 + float(f.V(z[0])) - top
    collapse.terminal = True
    collapse.direction = sign

    evs = [collapse]
    for p in stops:
        def near(t, z, p=p):
            return math.hypot(z[0] - p, z[1]) - stop_radius
        near.terminal = True
        near.direction = -1.0
        evs.append(near)
    # nodes are the solver's own steps, so consecutive nodes are exact flow steps
    sol = solve_ivp(rhs, (0.0, t_max), list(z0), method="DOP853", rtol=tol, atol=tol,
                    events=evs, max_step=max_step)
    hit = None
    for k, te in enumerate(sol.t_events):
        if len(te):
            hit = ("collapse",) if k == 0 else ("critical", float(stops[k - 1]))
    return sol.t, sol.y.T, hit


def gradient_leaves(factor1: FactorSystem, E: float, seeds: int = 20, *, factor2: FactorSystem,
                    around: Optional[float] = None, r0: float = 1e-3, delta: float = 1e-8,
                    exclude: float = 1e-2, tol: float = 1e-11, t_max: float = 200.0,
                    fiber_samples: int = 16) -> Foliation:
    """Leaves of the decoupled foliation at total energy ``E``.

    Family planes start on a small H1 level curve around each minimum of H1
    (``seeds`` lines per chamber) and run to the collapse curve; separatrix
    leaves of record start ``delta`` away from each saddle of H1 along its
    eigen-directions.

    The transversality report gives two minima over leaf nodes farther than
    ``exclude`` from every binding: ``projected``, the angle in the
    (x1, y1) plane between the projected flow and the base tangent, and
    ``ambient``, the angle in R^4 between the flow and the leaf tangent
    plane (worst case over the fiber).
    """
    if factor1.index == factor2.index:
        raise ValueError("factor1 and factor2 must be different factors")
    f = factor1.factor
    top = float(E) - factor2.min_value()
    chambers = _chambers(factor1, top, around)
    if not chambers:
        raise FoliationError("fiber empty: E - H1 < min V2 on every chamber")
    leaves = []
    bindings = []
    crit_x = [c.location for c in factor1.critical_points]
    for m, (left, right) in chambers:
        k = m.curvature
        bindings.append(Binding(m.location, "central", float(E) - m.value, "min x orbit"))
        stops = [c for c in crit_x if left - 1e-9 <= c <= right + 1e-9 and c != m.location]
        for j in range(seeds):
            phi = 2 * math.pi * (j + 0.5) / seeds
            z0 = (m.location + r0 * math.cos(phi) / math.sqrt(k), r0 * math.sin(phi))
            ts, Z, hit = _grad_line(f, z0, top, +1, stops, t_max, tol, 1e-6)
            if hit is None:
                raise FoliationError("gradient line neither collapsed nor reached a critical point")
            kind = "family-plane" if hit[0] == "collapse" else "rigid-cylinder"
            leaves.append(_leaf(kind, ts, Z, ("critical", m.location), hit, f, E, top))
        for s in factor1.maxima():
            if not (left - 1e-9 <= s.location <= right + 1e-9) or s.value >= top:
                continue
            shared = any(b.location == s.location for b in bindings)
            if not shared:
                bindings.append(Binding(s.location, "lyapunov", float(E) - s.value, "max x orbit"))
            # rigid cylinder: backward from the saddle towards the minimum
            side = math.copysign(1.0, m.location - s.location)
            ts, Z, hit = _grad_line(f, (s.location + side * delta, 0.0), top, -1,
                                    [m.location], t_max, tol, r0)
            Z = Z[::-1]
            ts = ts[-1] - ts[::-1]
            leaves.append(_leaf("rigid-cylinder", ts, Z, ("critical", m.location),
                                ("critical", s.location), f, E, top))
            if shared:
                # rigid planes of a saddle between two chambers are emitted once
                continue
            for sy in (+1.0, -1.0):
                ts, Z, hit = _grad_line(f, (s.location, sy * delta), top, +1, [], t_max, tol, r0)
                leaves.append(_leaf("rigid-plane", ts, Z, ("critical", s.location), hit, f, E, top))
    trans = _transversality(leaves, bindings, factor1, factor2, exclude, fiber_samples)
    return Foliation(float(E), top, [c for _, c in chambers], bindings, leaves, trans,
                     factor1, factor2)


def _leaf(kind, ts, Z, start, end, f, E, top):
    e2 = float(E) - (0.5 * Z[:, 1] ** 2 + f.V(Z[:, 0]))
    return FoliationLeaf(kind, Z, ts, tuple(start), tuple(end or ("open",)), float(E), e2)


def _fiber_points(factor2: FactorSystem, e2, angles):
    """Points of {H2 = e2} at angles of (x2 - x2*, y2 / scale), shape (n, a, 2)."""
    f = factor2.factor
    m = min(factor2.minima(), key=lambda c: c.value)
    scale = math.sqrt(m.curvature)
    lo, hi = factor2.interval
    e2 = np.atleast_1d(np.asarray(e2, dtype=float))[:, None]
    c = np.cos(np.asarray(angles, dtype=float))[None, :]
    s = np.sin(np.asarray(angles, dtype=float))[None, :]

    def h(r):
        return 0.5 * (scale * r * s) ** 2 + f.V(m.location + r * c) - e2

    # bracket by doubling, then bisect and polish with Newton
    top = np.full(np.broadcast(e2, c).shape, 1e-3)
    for _ in range(80):
        low = h(top) < 0
        if not np.any(low):
            break
        top = np.where(low, top * 1.6, top)
    xs = m.location + top * c
    if np.any((xs > hi + 1e-12) | (xs < lo - 1e-12)) and np.any(h(top) < 0):
        raise FoliationError("fiber leaves the factor interval")
    a = np.zeros_like(top)
    b = top
    for _ in range(60):
        mid = 0.5 * (a + b)
        neg = h(mid) < 0
        a = np.where(neg, mid, a)
        b = np.where(neg, b, mid)
    r = 0.5 * (a + b)
    for _ in range(2):
        d = scale**2 * r * s * s + f.dV(m.location + r * c) * c
        r = np.where(np.abs(d) > 1e-14, r - h(r) / np.where(np.abs(d) > 1e-14, d, 1.0), r)
    r = np.where(e2 <= m.value, 0.0, np.maximum(r, 0.0))
    return np.stack([m.location + r * c, scale * r * s], axis=-1)


def leaf_points(leaf: FoliationLeaf, factor2: FactorSystem, angles=16):
    """Phase-space samples (n_nodes, n_angles, 4) of a leaf."""
    if np.isscalar(angles):
        angles = 2 * math.pi * np.arange(int(angles)) / int(angles)
    fib = _fiber_points(factor2, leaf.fiber_energy, angles)
    n, a = fib.shape[:2]
    out = np.empty((n, a, 4))
    out[:, :, 0] = leaf.base[:, None, 0]
    out[:, :, 2] = leaf.base[:, None, 1]
    out[:, :, 1] = fib[:, :, 0]
    out[:, :, 3] = fib[:, :, 1]
    return out


def _transversality(leaves, bindings, f1, f2, exclude, fiber_samples):
    f = f1.factor
    g = f2.factor
    crit = np.array([b.location for b in bindings])
    angles = 2 * math.pi * np.arange(fiber_samples) / fiber_samples
    proj_min = np.inf
    amb_min = np.inf
    per_leaf = []
    for leaf in leaves:
        Z = leaf.base
        dist = np.min(np.hypot(Z[:, None, 0] - crit[None, :], Z[:, None, 1]), axis=1)
        keep = dist > exclude
        # collapse endpoints have no fiber
        if leaf.end[0] == "collapse":
            keep[-1] = False
        tan = np.gradient(Z, axis=0)
        flow = np.stack([Z[:, 1], -f.dV(Z[:, 0])], axis=1)
        nt = np.linalg.norm(tan, axis=1)
        nf = np.linalg.norm(flow, axis=1)
        ok = keep & (nt > 0) & (nf > 0)
        if not np.any(ok):
            per_leaf.append(None)
            continue
        cosang = np.abs(np.sum(tan[ok] * flow[ok], axis=1)) / (nt[ok] * nf[ok])
        proj = float(np.arccos(np.clip(cosang, 0.0, 1.0)).min())
        fib = _fiber_points(f2, leaf.fiber_energy[ok], angles)
        hn = np.hypot(g.dV(fib[:, :, 0]), fib[:, :, 1])
        amb = float(np.min(np.arctan2(nf[ok][:, None], hn)))
        per_leaf.append({"projected": proj, "ambient": amb})
        proj_min = min(proj_min, proj)
        amb_min = min(amb_min, amb)
    return {"projected": float(proj_min), "ambient": float(amb_min), "exclude": float(exclude),
            "per_leaf": per_leaf}


def leaf_residual(leaf: FoliationLeaf, factor1: FactorSystem, tol: float = 1e-12) -> float:
    """Max deviation of consecutive nodes from the exact gradient flow."""
    f = factor1.factor

    def rhs(t, z):
        return [float(f.dV(z[0])), z[1]]
    err = 0.0
    for i in range(len(leaf.t) - 1):
        dt = leaf.t[i + 1] - leaf.t[i]
        if dt == 0:
            continue
        sol = solve_ivp(rhs, (0.0, dt), leaf.base[i], method="DOP853", rtol=tol, atol=tol)
        err = max(err, float(np.max(np.abs(sol.y[:, -1] - leaf.base[i + 1]))))
    return err


def _level_crossing(leaf: FoliationLeaf, f: Factor, h: float):
    H = 0.5 * leaf.base[:, 1] ** 2 + f.V(leaf.base[:, 0])
    i = np.nonzero((H[:-1] - h) * (H[1:] - h) <= 0)[0]
    if not len(i):
        return None
    i = i[0]
    a = (h - H[i]) / (H[i + 1] - H[i]) if H[i + 1] != H[i] else 0.0
    return leaf.base[i] + a * (leaf.base[i + 1] - leaf.base[i])


def leaf_separation(foliation: "Foliation", levels: Optional[Sequence[float]] = None) -> dict:
    """Distances between the crossings of distinct leaves with H1 levels.

    H1 increases strictly along gradient lines, so every base line meets a
    level curve at most once and distinct lines meet it at distinct points.
    By default the levels are the midpoints between consecutive critical
    values of H1 below the collapse level and the collapse level itself.

    Returns
    -------
    dict
        ``{level: min distance}`` over levels crossed by at least two leaves.
    """
    f = foliation.factor1.factor
    top = foliation.collapse_level
    if levels is None:
        vals = sorted({c.value for c in foliation.factor1.critical_points if c.value < top} | {top})
        levels = [0.5 * (a + b) for a, b in zip(vals[:-1], vals[1:])]
    out = {}
    for h in levels:
        pts = [p for p in (_level_crossing(l, f, h) for l in foliation.leaves) if p is not None]
        if len(pts) < 2:
            continue
        d, _ = cKDTree(np.array(pts)).query(pts, k=2)
        out[float(h)] = float(np.min(d[:, 1]))
    return out


# ---------------------------------------------------------------------------
# export

_COLORS = {"family-plane": "#4477aa", "rigid-plane": "#cc3311", "rigid-cylinder": "#228833"}


def _foliation_svg(fol: Foliation, path, size):
    f = fol.factor1.factor
    pts = np.concatenate([l.base for l in fol.leaves])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = 0.05
    span = float(max(hi - lo)) * (1 + 2 * pad) or 1.0
    off = lo - pad * span

    def xy(p):
        return (p[0] - off[0]) / span * size, size - (p[1] - off[1]) / span * size

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">',
           f'<!-- base portrait (x1, y1), E = {fol.energy:.6g} -->']
    for leaf in fol.leaves:
        d = " ".join(("M" if i == 0 else "L") + "{:.3f},{:.3f}".format(*xy(p))
                     for i, p in enumerate(leaf.base[:: max(1, len(leaf.base) // 200)]))
        out.append(f'<path class="{leaf.kind}" d="{d}" fill="none" '
                   f'stroke="{_COLORS[leaf.kind]}" stroke-width="1"/>')
    for b in fol.bindings:
        cx, cy = xy((b.location, 0.0))
        color = "black" if b.kind == "central" else "red"
        out.append(f'<circle class="binding {b.kind}" cx="{cx:.3f}" cy="{cy:.3f}" r="4" '
                   f'fill="{color}"/>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


# ---------------------------------------------------------------------------
# Euler two-centre regimes


def euler_regime(mu: float, c: float) -> dict:
    """Energy regime of the regularised two-centre problem.

    Returns the regime (``below-critical``, ``I`` or ``II``), the thresholds
    and the number of chambers carrying a foliation with two Lyapunov-type
    bindings.
    """
    if not 0.0 < mu < 1.0:
        raise ModelError("mu must lie in (0, 1)")
    if c >= 0:
        raise ModelError("energy c must be negative")
    th = euler_critical_data(mu)
    if c <= th["c_crit"]:
        regime, chambers = "below-critical", 0
        bindings = ["two separate sphere-like components; no neck"]
    elif c < th["c2"]:
        regime, chambers = "I", 2
        bindings = ["index-2 orbits: continuation of the Lyapunov orbit",
                    "other bindings: collision-brake orbits on x2 = 0"]
    else:
        regime, chambers = "II", 1
        bindings = ["Lyapunov orbit merged into a collision-brake orbit (hyperbolic)",
                    "both bindings: collision-brake orbits"]
    return {"mu": float(mu), "c": float(c), "regime": regime, "chambers": chambers,
            "thresholds": {k: float(v) for k, v in th.items()}, "bindings": bindings}
