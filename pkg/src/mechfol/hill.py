"""Critical points of V, zero-velocity curves and Hill-region components."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from matplotlib.path import Path
from scipy.optimize import brentq

from .models import MechanicalModel, ModelError, principal_axes

__all__ = [
    "CriticalPoint",
    "Polyline",
    "HillComponent",
    "GeometryError",
    "find_critical_points",
    "refine_critical_point",
    "euler_critical_data",
    "seed_on_level",
    "trace_zero_velocity_curve",
    "extract_hill_component",
    "hausdorff_distance",
    "polyline_to_csv",
    "polylines_to_svg",
    "sample_interior",
]

SINGULAR_GRAD = 1e-7


class GeometryError(RuntimeError):
    """Tracing or extraction failure."""


@dataclass(frozen=True)
class CriticalPoint:
    """Critical point of V with its Hessian eigendata.

    For saddles ``a < 0 < b`` are the principal curvatures, ``alpha =
    sqrt(-a)`` and ``omega = sqrt(b)`` the real and imaginary eigenvalue
    magnitudes of the linearised flow at (v, 0).
    """

    location: np.ndarray
    value: float
    kind: str
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    grad_norm: float = 0.0

    @property
    def a(self) -> Optional[float]:
        return float(self.eigenvalues[0]) if self.kind == "saddle" else None

    @property
    def b(self) -> Optional[float]:
        return float(self.eigenvalues[1]) if self.kind == "saddle" else None

    @property
    def alpha(self) -> Optional[float]:
        return math.sqrt(-self.eigenvalues[0]) if self.kind == "saddle" else None

    @property
    def omega(self) -> Optional[float]:
        return math.sqrt(self.eigenvalues[1]) if self.kind == "saddle" else None

    def to_dict(self) -> dict:
        d = {"location": [float(v) for v in self.location], "value": float(self.value),
             "kind": self.kind, "eigenvalues": [float(v) for v in self.eigenvalues]}
        if self.kind == "saddle":
            d.update(alpha=self.alpha, omega=self.omega, a=self.a, b=self.b)
        return d


def _classify(evals, tol=1e-10):
    if np.min(np.abs(evals)) < tol:
        return "degenerate"
    if evals[0] > 0:
        return "minimum"
    if evals[1] < 0:
        return "maximum"
    return "saddle"


def _make_cp(model, x):
    H = model.hess(x)
    evals, evecs = np.linalg.eigh(H)
    return CriticalPoint(np.asarray(x, dtype=float), float(model.V(x)), _classify(evals),
                         evals, evecs, float(np.linalg.norm(model.grad(x))))


def refine_critical_point(model: MechanicalModel, x0, maxiter: int = 60, tol: float = 1e-13):
    """Newton iteration on grad V = 0 from ``x0``; returns a CriticalPoint or None."""
    x = np.array(x0, dtype=float)
    for _ in range(maxiter):
        g = model.grad(x)
        if np.linalg.norm(g) < tol:
            break
        try:
            dx = np.linalg.solve(model.hess(x), -g)
        except np.linalg.LinAlgError:
            return None
        x = x + dx
        if not np.all(np.isfinite(x)):
            return None
    if np.linalg.norm(model.grad(x)) >= 1e-10:
        return None
    return _make_cp(model, x)


def find_critical_points(model: MechanicalModel, rectangle=None, resolution: int = 64,
                         maxiter: int = 80, merge_radius: float = 1e-8):
    """Critical points of V by damped Newton from a grid of seeds.

    Parameters
    ----------
    model : MechanicalModel
    rectangle : ((x1min, x1max), (x2min, x2max)), optional
        Search box, defaults to the model domain.
    resolution : int
        Seeds per axis.

    Returns
    -------
    list of CriticalPoint
        Sorted by value then location.  Every entry has |grad V| < 1e-10.
        Points with a singular Hessian carry ``kind = "degenerate"``.
    """
    rect = model.domain if rectangle is None else rectangle
    (a1, b1), (a2, b2) = rect
    for k, (lo, hi) in enumerate(rect):
        dlo, dhi = model.domain[k]
        if not model.periodic[k] and (lo < dlo - 1e-12 or hi > dhi + 1e-12):
            raise ModelError("search rectangle leaves the model domain")
    g1 = np.linspace(a1, b1, resolution)
    g2 = np.linspace(a2, b2, resolution)
    X = np.stack(np.meshgrid(g1, g2, indexing="ij"), axis=-1).reshape(-1, 2)
    active = np.ones(len(X), dtype=bool)
    lo = np.array([a1, a2])
    hi = np.array([b1, b2])
    span = hi - lo
    for _ in range(maxiter):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        x = X[idx]
        g = model.grad(x)
        H = model.hess(x)
        det = H[:, 0, 0] * H[:, 1, 1] - H[:, 0, 1] * H[:, 1, 0]
        good = np.abs(det) > 1e-14
        dx = np.zeros_like(x)
        dx[good, 0] = -(H[good, 1, 1] * g[good, 0] - H[good, 0, 1] * g[good, 1]) / det[good]
        dx[good, 1] = -(-H[good, 1, 0] * g[good, 0] + H[good, 0, 0] * g[good, 1]) / det[good]
        # damping: never jump more than a tenth of the box
        step = np.linalg.norm(dx, axis=1)
        lim = 0.1 * np.linalg.norm(span)
        scale = np.where(step > lim, lim / np.maximum(step, 1e-300), 1.0)
        X[idx] = x + dx * scale[:, None]
        conv = np.linalg.norm(g, axis=1) < 1e-13
        out = np.any((X[idx] < lo - 0.05 * span) | (X[idx] > hi + 0.05 * span), axis=1)
        active[idx[conv | out | ~good]] = False
    found = []
    for x in X:
        if np.any(x < lo - 1e-9) or np.any(x > hi + 1e-9):
            continue
        if not np.all(np.isfinite(x)):
            continue
        cp = refine_critical_point(model, x)
        if cp is None:
            continue
        if any(np.linalg.norm(cp.location - q.location) < merge_radius for q in found):
            continue
        found.append(cp)
    found.sort(key=lambda c: (round(c.value, 12), c.location[0], c.location[1]))
    return found


def euler_critical_data(mu: float) -> dict:
    """Rest point and energy thresholds of the two-centre problem.

    Returns the abscissa of the collinear rest point, c_crit, c1 = -1/2 and
    c2 = -|mu - 1/2|.  The ordering c_crit < c1 <= c2 <= 0 is verified.
    """
    if not 0.0 < mu < 1.0:
        raise ModelError("mu must lie in (0, 1)")
    r = math.sqrt(mu - mu * mu)
    data = {
        "x1_bar": (2 * mu - 1) / (1 + 2 * r),
        "c_crit": -0.5 - r,
        "c1": -0.5,
        "c2": -abs(mu - 0.5),
    }
    if not data["c_crit"] < data["c1"] <= data["c2"] <= 0.0:
        raise ModelError("threshold ordering violated")
    return data


# ---------------------------------------------------------------------------
# level-set tracing

@dataclass
class Polyline:
    """Polyline on a level set with its singular stops."""

    points: np.ndarray
    closed: bool
    singular: list = field(default_factory=list)
    reason: str = ""

    @property
    def length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.points, axis=0), axis=1)))


def seed_on_level(model: MechanicalModel, E: float, point, direction=(1.0, 0.0),
                  max_distance: Optional[float] = None):
    """First point of {V = E} on the ray from ``point`` along ``direction``."""
    p = np.asarray(point, dtype=float)
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    if max_distance is None:
        max_distance = float(np.hypot(*[hi - lo for lo, hi in model.domain]))
    f0 = float(model.V(p)) - E
    n = 4000
    ts = np.linspace(0.0, max_distance, n + 1)
    pts = p + ts[:, None] * d
    inside = model.contains(pts)
    vals = np.where(inside, model.V(np.where(inside[:, None], pts, p)) - E, np.nan)
    for i in range(n):
        if not inside[i + 1]:
            break
        if np.sign(vals[i + 1]) != np.sign(f0) and vals[i + 1] != 0:
            t = brentq(lambda s: float(model.V(p + s * d)) - E, ts[i], ts[i + 1], xtol=1e-15)
            return p + t * d
    raise GeometryError("ray does not reach the level set inside the domain")


def _project(model, x, E, iters=30):
    for _ in range(iters):
        g = model.grad(x)
        r = float(model.V(x)) - E
        gg = float(g @ g)
        if gg == 0:
            break
        x = x - r * g / gg
        if abs(r) < 1e-14:
            break
    return x


def _branch_rays(cp: CriticalPoint):
    """Unit directions of the four zero-level rays of the quadratic model."""
    R, (a, b) = principal_axes(np.diag(cp.eigenvalues))
    Rv = cp.eigenvectors @ R
    q = math.sqrt(-a / b)
    rays = []
    for s1 in (1, -1):
        for s2 in (1, -1):
            d = Rv @ np.array([s1 * 1.0, s2 * q])
            rays.append(d / np.linalg.norm(d))
    ang = [math.atan2(d[1], d[0]) for d in rays]
    order = np.argsort(ang)
    return [rays[i] for i in order], [ang[i] for i in order]


def _tangent(g):
    # interior {V < E} on the left: tangent = rot(+90) of grad
    t = np.array([-g[1], g[0]])
    return t / np.linalg.norm(t)


def _point_segment_distance(p, a, b):
    ab = b - a
    den = float(ab @ ab)
    s = 0.0 if den == 0 else min(1.0, max(0.0, float((p - a) @ ab) / den))
    return float(np.linalg.norm(a + s * ab - p))


def trace_zero_velocity_curve(model: MechanicalModel, E: float, seed, *,
                              max_step: float = 0.01, min_step: float = 1e-7,
                              angle_step: float = 0.05, max_length: float = 100.0,
                              through_saddles: bool = False, cuts: Sequence = (),
                              node_tol: float = 1e-10):
    """Trace {V = E} from a seed with {V < E} kept on the left.

    Parameters
    ----------
    model, E, seed
        Level set and a starting point near it.
    max_step, min_step, angle_step
        Step bounds; the step is reduced so that the tangent turns by at
        most ``angle_step`` radians per step.
    through_saddles : bool
        When a saddle on the level is met, continue along the branch that
        bounds the same sub-level sector instead of stopping.
    cuts : sequence of (k, 2) arrays
        Arcs joining two points of the level set (projections of Lyapunov
        orbits).  When the trace reaches an endpoint it follows the arc and
        resumes from the other end, which builds the boundary of K_E.

    Returns
    -------
    Polyline
        Nodes satisfy |V - E| < ``node_tol`` except for nodes on cut arcs.
    """
    x = _project(model, np.asarray(seed, dtype=float), E)
    if abs(float(model.V(x)) - E) > 1e-8:
        raise GeometryError("seed is not near the level set")
    if np.linalg.norm(model.grad(x)) < SINGULAR_GRAD:
        raise GeometryError("seed is a singular point of the level set")
    start = x.copy()
    pts = [x.copy()]
    singular = []
    cuts = [np.asarray(c, dtype=float) for c in cuts]
    used_cuts = set()
    length = 0.0
    h = max_step
    left_from = None
    closed = False
    reason = "max-length"
    while length < max_length:
        g = model.grad(x)
        gn = np.linalg.norm(g)
        t = _tangent(g)
        H = model.hess(x)
        kappa = abs(float(t @ H @ t)) / gn
        h = min(max_step, angle_step / kappa if kappa > 0 else max_step, 2.0 * h)
        # a critical point close ahead?
        try:
            dcp = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            dcp = np.full(2, np.inf)
        near = np.linalg.norm(dcp)
        if left_from is not None and np.linalg.norm(x - left_from) < 3.0 * max_step:
            near = np.inf
        if near < 3.0 * h and near < 0.05:
            cp = _locate_singular(model, x, E)
            if cp is not None and np.linalg.norm(cp.location - x) < 3.0 * h + 1e-9:
                pts.append(cp.location.copy())
                singular.append(cp)
                if not through_saddles or cp.kind != "saddle":
                    reason = "singular"
                    break
                x = _leave_saddle(model, E, cp, x, max_step)
                left_from = cp.location
                pts.append(x.copy())
                length += float(np.linalg.norm(pts[-2] - pts[-3]) + np.linalg.norm(pts[-1] - pts[-2]))
                h = 1e-3
                continue
        while True:
            xp = x + h * t
            if not model.contains(xp):
                if h > min_step:
                    h *= 0.5
                    continue
                reason = "domain-exit"
                break
            xn = _project(model, xp, E)
            turn = np.linalg.norm(xn - xp)
            gnew = model.grad(xn)
            ok = (abs(float(model.V(xn)) - E) < node_tol and turn < 0.5 * h
                  and float(_tangent(gnew) @ t) > math.cos(4 * angle_step))
            if ok or h <= min_step:
                break
            h *= 0.5
        if reason == "domain-exit":
            break
        if not np.isfinite(xn).all() or abs(float(model.V(xn)) - E) >= node_tol:
            raise GeometryError("adaptive refinement failed on the level set")
        # cut arcs
        hit = None
        for k, c in enumerate(cuts):
            if k in used_cuts:
                continue
            for end in (0, -1):
                if _point_segment_distance(c[end], x, xn) < max(1e-6, 2 * h * h * kappa):
                    hit = (k, end)
                    break
            if hit:
                break
        if hit is not None:
            k, end = hit
            arc = cuts[k] if end == 0 else cuts[k][::-1]
            used_cuts.add(k)
            for p in arc:
                pts.append(p.copy())
            length += float(np.sum(np.linalg.norm(np.diff(arc, axis=0), axis=1)))
            x = _project(model, arc[-1].copy(), E)
            pts[-1] = x.copy()
            h = min_step * 10
            continue
        length += np.linalg.norm(xn - x)
        x = xn
        # closure
        if length > 4 * max_step and _point_segment_distance(start, pts[-1], x) < max(h, 1e-9) * 1.01:
            pts.append(start.copy())
            closed = True
            reason = "closed"
            break
        pts.append(x.copy())
    return Polyline(np.array(pts), closed, singular, reason)


def _locate_singular(model, x, E):
    cp = refine_critical_point(model, x)
    if cp is None or abs(cp.value - E) > 1e-8:
        return None
    return cp


def _leave_saddle(model, E, cp, x_in, step):
    """Point on the outgoing branch bounding the same sub-level sector."""
    rays, angs = _branch_rays(cp)
    rin = x_in - cp.location
    ain = math.atan2(rin[1], rin[0])
    k = int(np.argmin([abs(math.remainder(a - ain, 2 * math.pi)) for a in angs]))
    out = rays[(k - 1) % 4]  # clockwise neighbour
    h = min(step, 1e-3)
    p = cp.location + h * out
    # correct only across the ray to stay on this branch
    nrm = np.array([-out[1], out[0]])
    for _ in range(50):
        r = float(model.V(p)) - E
        dn = float(model.grad(p) @ nrm)
        if dn == 0:
            break
        p = p - r / dn * nrm
        if abs(r) < 1e-15:
            break
    return p


# ---------------------------------------------------------------------------
# components

@dataclass
class HillComponent:
    """Connected component of {V <= E} given by its boundary loop."""

    energy: float
    boundary: np.ndarray
    interior_point: np.ndarray
    critical_points: list
    singular: list
    area: float
    cut_arcs: list = field(default_factory=list)

    @property
    def path(self) -> Path:
        return Path(self.boundary, closed=True)

    def contains(self, pts, radius: float = 0.0):
        return self.path.contains_points(np.atleast_2d(pts), radius=radius)

    def bounding_box(self):
        return self.boundary.min(axis=0), self.boundary.max(axis=0)

    def projections(self):
        lo, hi = self.bounding_box()
        return [(float(lo[k]), float(hi[k])) for k in range(2)]


def _shoelace(p):
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def extract_hill_component(model: MechanicalModel, E: float, interior_point, *,
                           cuts: Sequence = (), direction=(1.0, 0.0), max_step: float = 0.01,
                           max_length: float = 100.0):
    """Component of {V <= E} containing ``interior_point``.

    The boundary runs counter-clockwise through any saddles on the level and,
    when ``cuts`` (Lyapunov-orbit projections) are provided, across the necks
    along those arcs.
    """
    p = np.asarray(interior_point, dtype=float)
    if not float(model.V(p)) < E:
        raise GeometryError("interior point is not strictly below the level")
    seed = seed_on_level(model, E, p, direction)
    line = trace_zero_velocity_curve(model, E, seed, through_saddles=True, cuts=cuts,
                                     max_step=max_step, max_length=max_length)
    if not line.closed:
        raise GeometryError(f"component boundary did not close ({line.reason})")
    bnd = line.points
    area = _shoelace(bnd)
    if area < 0:
        raise GeometryError("boundary orientation inconsistent with the interior point")
    comp = HillComponent(E, bnd, p, [], line.singular, area, list(cuts))
    if not comp.contains(p)[0]:
        raise GeometryError("traced loop does not enclose the interior point")
    lo, hi = comp.bounding_box()
    pad = 1e-6
    rect = tuple((max(float(lo[k]) - pad, model.domain[k][0]) if not model.periodic[k] else float(lo[k]) - pad,
                  min(float(hi[k]) + pad, model.domain[k][1]) if not model.periodic[k] else float(hi[k]) + pad)
                 for k in range(2))
    cps = find_critical_points(model, rect, resolution=32)
    comp.critical_points = [c for c in cps
                            if comp.contains(c.location, radius=1e-7)[0]
                            or np.min(np.linalg.norm(bnd - c.location, axis=1)) < 1e-6]
    return comp


def sample_interior(component: HillComponent, n: int, rng) -> np.ndarray:
    """Uniform samples of the component by rejection in its bounding box."""
    lo, hi = component.bounding_box()
    out = []
    count = 0
    while count < n:
        pts = lo + (hi - lo) * rng.random((max(2 * n, 1000), 2))
        pts = pts[component.contains(pts)]
        out.append(pts)
        count += len(pts)
    return np.concatenate(out)[:n]


def hausdorff_distance(A: HillComponent, B: HillComponent) -> float:
    """Hausdorff distance between two components (boundary-sampled)."""

    def directed(P, Q):
        inside = Q.contains(P.boundary)
        pts = P.boundary[~inside]
        if len(pts) == 0:
            return 0.0
        segs_a = Q.boundary[:-1]
        segs_b = Q.boundary[1:]
        ab = segs_b - segs_a
        den = np.maximum(np.sum(ab * ab, axis=1), 1e-300)
        best = 0.0
        for p in pts:
            s = np.clip(np.sum((p - segs_a) * ab, axis=1) / den, 0.0, 1.0)
            d = np.min(np.linalg.norm(segs_a + s[:, None] * ab - p, axis=1))
            best = max(best, float(d))
        return best

    return max(directed(A, B), directed(B, A))


# ---------------------------------------------------------------------------
# export

def polyline_to_csv(points, path) -> None:
    pts = np.asarray(points, dtype=float)
    with open(path, "w") as fh:
        fh.write("x1,x2\n")
        for p in pts:
            fh.write(f"{p[0]:.17g},{p[1]:.17g}\n")


def polylines_to_svg(polylines, path, markers=(), size: int = 480, pad: float = 0.05) -> None:
    """Write polylines (and optional point markers) as an SVG drawing."""
    allp = np.concatenate([np.asarray(p, dtype=float) for p in polylines]
                          + [np.asarray(markers, dtype=float).reshape(-1, 2)])
    lo, hi = allp.min(axis=0), allp.max(axis=0)
    span = float(max(hi - lo)) * (1 + 2 * pad) or 1.0
    off = lo - pad * span

    def xy(p):
        return (p[0] - off[0]) / span * size, size - (p[1] - off[1]) / span * size

    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
             f'viewBox="0 0 {size} {size}">']
    for pl in polylines:
        pl = np.asarray(pl, dtype=float)
        d = " ".join(("M" if i == 0 else "L") + "{:.3f},{:.3f}".format(*xy(p))
                     for i, p in enumerate(pl))
        lines.append(f'<path d="{d}" fill="none" stroke="black" stroke-width="1"/>')
    for m in np.asarray(markers, dtype=float).reshape(-1, 2):
        cx, cy = xy(m)
        lines.append(f'<circle cx="{cx:.3f}" cy="{cy:.3f}" r="3" fill="red"/>')
    lines.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
