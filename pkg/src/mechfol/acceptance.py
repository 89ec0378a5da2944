"""Acceptance suite shared by the ``report`` CLI verb and the test-suite.

Each ``criterion_*`` function returns a :class:`Criterion` with its pass flag,
the measured quantities and the wall time.  Wall time only enters the pass
flag; it is kept out of the serialised payload so reports are reproducible.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .czindex import conley_zehnder_index, neck_rotation_experiment, winding_interval
from .decoupled import (check_foliation_hypotheses, classify_product_orbit, euler_regime,
                        factor_orbit, gradient_leaves, matching_energy, split_decoupled)
from .dynamics import integrate_flow, symplecticity_error
from .frame import hh_G_closed, hh_G_longform, j1, j2, kappa_closed_form, positivity_scan, \
    sample_energy_surface
from .hill import euler_critical_data, extract_hill_component, find_critical_points, sample_interior
from .models import Factor, PhaseState, build_model, euler_hamiltonian, product_model
from .orbits import lyapunov_seed, refine_periodic_orbit
from .plane import integrate_profile, verify_transversality_to_flow

__all__ = ["Criterion", "CRITERIA", "run_all", "linear_oracle_interval", "counterexample_model"]


@dataclass
class Criterion:
    number: int
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    elapsed: float = 0.0
    limit: float = float("inf")
    checks: bool = True     # numerical checks alone, without the runtime limit

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number:2d} {self.name} ({self.elapsed:.2f} s)"

    def to_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "checks_passed": bool(self.checks),
                "runtime_limit": None if math.isinf(self.limit) else self.limit,
                "details": _plain(self.details)}


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    return obj


def _timed(number, name, limit, fn):
    t0 = time.perf_counter()
    ok, details = fn()
    dt = time.perf_counter() - t0
    return Criterion(number, name, bool(ok and dt < limit), dict(details), dt, limit, bool(ok))


def _match(found, expected, tol):
    return all(min(np.linalg.norm(np.asarray(f) - e) for f in found) < tol for e in expected) \
        and len(found) == len(expected)


# ---------------------------------------------------------------------------
# 1


def criterion_critical_points() -> Criterion:
    def run():
        out = {}
        ok = True
        hh = [c for c in find_critical_points(build_model("henon-heiles")) if c.kind == "saddle"]
        exp = [(0.0, 1.0), (math.sqrt(3) / 2, -0.5), (-math.sqrt(3) / 2, -0.5)]
        e1 = max(abs(c.value - 1 / 6) for c in hh)
        k = _match([c.location for c in hh], exp, 1e-10) and e1 < 1e-12
        out["henon-heiles"] = {"saddles": len(hh), "value_error": e1, "pass": k}
        ok &= k
        fh = [c for c in find_critical_points(build_model("frozen-hill")) if c.kind == "saddle"]
        r = 6 ** -0.25
        exp = [(r, 0.0), (-r, 0.0), (0.0, r), (0.0, -r)]
        e2 = max(abs(c.value - 4 * math.sqrt(6) / 9) for c in fh)
        k = _match([c.location for c in fh], exp, 1e-10) and e2 < 1e-12
        out["frozen-hill"] = {"saddles": len(fh), "value_error": e2, "pass": k}
        ok &= k
        st = [c for c in find_critical_points(build_model("stark", {"eps": 0.5}))
              if c.kind == "saddle"]
        e3 = max(abs(c.value - 2.0) for c in st)
        k = _match([c.location for c in st], [(1.0, 0.0), (-1.0, 0.0)], 1e-10) and e3 < 1e-12
        out["stark"] = {"saddles": len(st), "value_error": e3, "pass": k}
        ok &= k
        ch = find_critical_points(build_model("chemical", {"alpha": 1.0, "beta": 1.0}))
        vals = sorted({round(c.value, 12) for c in ch})
        k = len(vals) == 2 and abs(vals[0] + 0.25) < 1e-12 and abs(vals[1]) < 1e-12
        out["chemical"] = {"values": vals, "pass": k}
        ok &= k
        return ok, out
    return _timed(1, "critical-point table", 5.0, run)


# ---------------------------------------------------------------------------
# 2


def _euler_rest_value(mu):
    # rest point between the centres from the force balance, evaluated on the
    # Cartesian two-centre energy
    x = brentq(lambda x: mu / (x + 1) ** 2 - (1 - mu) / (1 - x) ** 2, -1 + 1e-12, 1 - 1e-12,
               xtol=1e-16)
    return x, euler_hamiltonian(mu, PhaseState(np.array([x, 0.0]), np.zeros(2)))


def criterion_euler_thresholds() -> Criterion:
    def run():
        ok = True
        rows = []
        for mu in (0.1, 0.25, 0.5):
            d = euler_critical_data(mu)
            x, v = _euler_rest_value(mu)
            err = max(abs(d["c_crit"] - v), abs(d["c_crit"] - (-0.5 - math.sqrt(mu - mu * mu))),
                      abs(d["c1"] + 0.5), abs(d["c2"] + abs(mu - 0.5)), abs(d["x1_bar"] - x))
            order = d["c_crit"] < d["c1"] <= d["c2"] <= 0
            rows.append({"mu": mu, "error": err, "ordered": order})
            ok &= err < 1e-14 and order
        reg = {"(0.25,-0.5)": euler_regime(0.25, -0.5)["regime"],
               "(0.25,-0.2)": euler_regime(0.25, -0.2)["regime"]}
        ok &= reg["(0.25,-0.5)"] == "I" and reg["(0.25,-0.2)"] == "II"
        return ok, {"thresholds": rows, "regimes": reg}
    return _timed(2, "Euler thresholds", 1.0, run)


# ---------------------------------------------------------------------------
# 3


def criterion_action_law() -> Criterion:
    def run():
        m = build_model("henon-heiles")
        v1 = [c for c in find_critical_points(m) if c.kind == "saddle"
              and np.linalg.norm(c.location - [0.0, 1.0]) < 1e-8][0]
        rows = []
        ok = True
        for dE, lim in ((1e-4, 0.01), (1e-3, 0.03), (1e-2, 0.10)):
            seed, T = lyapunov_seed(m, v1, dE)
            orb = refine_periodic_orbit(m, seed, T, energy=v1.value + dE, label="lyapunov")
            law = 2 * math.pi * dE / math.sqrt(v1.b)
            rel = abs(orb.action - law) / law
            rows.append({"dE": dE, "action": orb.action, "law": law, "relative_error": rel,
                         "limit": lim})
            ok &= rel <= lim
        q = build_model("saddle-center", {"a": -1.0, "b": 1.0})
        sq = find_critical_points(q)[0]
        seed, T = lyapunov_seed(q, sq, 1e-2)
        orb = refine_periodic_orbit(q, seed, T, label="lyapunov")
        qerr = abs(orb.action - 2 * math.pi * 1e-2)
        ok &= qerr < 1e-6
        return ok, {"henon-heiles": rows, "quadratic_error": qerr}
    return _timed(3, "Lyapunov action law", 30.0, run)


# ---------------------------------------------------------------------------
# 4


def linear_oracle_interval(model, w0, T, n_angles: int = 256, n_t: int = 4000):
    """Winding interval by direct unwrapping of the variational flow.

    Initial directions cos(th) X1 + sin(th) X2 are pushed by the fundamental
    matrix, projected onto the moving frame (X1, X2) and their angles are
    unwrapped on a fine time grid.
    """
    t = np.linspace(0.0, T, n_t)
    traj = integrate_flow(model, w0, (0.0, T), 1e-12, with_variational=True, t_eval=t)
    W, Phi = traj.states, traj.phi
    G = np.concatenate([model.grad(W[:, :2]), W[:, 2:]], axis=1)
    X0 = G / np.linalg.norm(G, axis=1)[:, None]
    X1, X2 = j1(X0), j2(X0)
    th = 2 * math.pi * np.arange(n_angles) / n_angles
    d0 = np.cos(th)[:, None] * X1[0] + np.sin(th)[:, None] * X2[0]
    D = np.einsum("tij,nj->tni", Phi, d0)
    ang = np.unwrap(np.arctan2(np.einsum("tni,ti->tn", D, X2),
                               np.einsum("tni,ti->tn", D, X1)), axis=0)
    gain = (ang[-1] - ang[0]) / (2 * math.pi)
    return float(gain.min()), float(gain.max())


def _oracle_mu(lo, hi, eps):
    lo, hi = lo - eps, hi - eps
    k = math.floor(hi)
    if lo < k < hi:
        return 2 * k
    return 2 * math.floor(lo) + 1


def criterion_index_oracle(n: int = 20, seed: int = 0) -> Criterion:
    def run():
        rng = np.random.default_rng(seed)
        rows = []
        ok = True
        while len(rows) < n:
            w = rng.uniform(0.5, 2.5, 2)
            k = int(rng.integers(2))
            r = float(rng.uniform(0.2, 1.0))
            m = build_model("harmonic", {"w1": w[0], "w2": w[1]})
            w0 = np.zeros(4)
            w0[k] = r
            T = 2 * math.pi / w[k]
            lo, hi = linear_oracle_interval(m, w0, T)
            # oracle endpoints at integers make the index ill-posed; redraw
            if min(abs(lo - round(lo)), abs(hi - round(hi))) < 1e-3:
                continue
            I = winding_interval(m, (w0, T))
            res = conley_zehnder_index(I)
            mu_o = _oracle_mu(lo, hi, 1e-5)
            same = res.mu == mu_o and I.length < 0.5
            rows.append({"w": w.tolist(), "factor": k + 1, "oracle": [lo, hi],
                         "interval": list(I.bounds), "mu": res.mu, "mu_oracle": mu_o,
                         "pass": same})
            ok &= same
        return ok, {"orbits": rows}
    return _timed(4, "index engine oracle equivalence", 60.0, run)


# ---------------------------------------------------------------------------
# 5


def criterion_decoupled_classes() -> Criterion:
    def run():
        m = build_model("chemical", {"alpha": 1.0, "beta": 1.0})
        g1, g2 = split_decoupled(m)
        top = g1.maxima()[0]
        bottom = g1.minima()[0]
        o2 = factor_orbit(g2, 0.1)
        a = classify_product_orbit(top, o2, model=m, validate=True).validated
        b = classify_product_orbit(bottom, o2, model=m, validate=True).validated
        e1 = matching_energy(g1, o2.period, around=bottom.location)
        o1 = factor_orbit(g1, e1, around=bottom.location)
        c = classify_product_orbit(o1, o2, model=m, validate=True).validated
        ok = (a["mu"] == 2 and a["floquet"] == "hyperbolic" and b["mu"] >= 3
              and round(c["rho"]) >= 2 and abs(c["rho"] - round(c["rho"])) < 1e-3)
        keep = ("mu", "floquet", "rho", "rho_error", "I", "degenerate")
        return ok, {k: {x: v[x] for x in keep if x in v}
                    for k, v in (("max x orbit", a), ("min x orbit", b), ("orbit x orbit", c))}
    return _timed(5, "decoupled index classes", float("inf"), run)


# ---------------------------------------------------------------------------
# 6


def _hh_boundary(n, rng):
    v = np.array([[0.0, 1.0], [-math.sqrt(3) / 2, -0.5], [math.sqrt(3) / 2, -0.5]])
    e = rng.integers(3, size=n)
    s = rng.uniform(0.02, 0.98, n)
    return v[e] + s[:, None] * (v[(e + 1) % 3] - v[e])


def criterion_hh_identity(seed: int = 0) -> Criterion:
    def run():
        rng = np.random.default_rng(seed)
        m = build_model("henon-heiles")
        comp = extract_hill_component(m, 1 / 6, (0.0, 0.0), direction=(math.cos(0.7), math.sin(0.7)))
        x = sample_interior(comp, 10_000, rng)
        err = float(np.max(np.abs(hh_G_longform(m, x) - hh_G_closed(x))))
        b = _hh_boundary(1000, rng)
        W = np.column_stack([b, np.zeros((len(b), 2))])
        k22 = float(np.max(np.abs(kappa_closed_form(m, W)[2])))
        return err < 1e-10 and k22 < 1e-10, {"G_error": err, "kappa22_max": k22}
    return _timed(6, "Henon-Heiles G-identity", float("inf"), run)


# ---------------------------------------------------------------------------
# 7


def criterion_positivity(seed: int = 0) -> Criterion:
    def run():
        rng = np.random.default_rng(seed)
        m = build_model("henon-heiles")
        comp = extract_hill_component(m, 1 / 6, (0.0, 0.0), direction=(math.cos(0.7), math.sin(0.7)))
        x = sample_interior(comp, 10_000, rng)
        x = x[m.V(x) < 1 / 6]
        W = sample_energy_surface(m, 1 / 6, x, rng)
        scan = positivity_scan(m, W)
        ok = bool(np.all(scan["positive"])) and scan["min_eigenvalue"] > 0
        return ok, {"samples": len(W), "min_eigenvalue": scan["min_eigenvalue"],
                    "degenerate": int(np.sum(scan["degenerate"]))}
    return _timed(7, "positivity scan", float("inf"), run)


# ---------------------------------------------------------------------------
# 8


def criterion_profile() -> Criterion:
    def run():
        ok = True
        rows = []
        for b in (1.0, 3.0):
            pos = integrate_profile(b, 1.0)
            neg = integrate_profile(b, -1.0)
            inv = max(pos.invariant_error(), neg.invariant_error())
            rate = abs(pos.tail_rate * math.sqrt(b) - 1.0)
            sp = verify_transversality_to_flow(pos).signs
            sn = verify_transversality_to_flow(neg).signs
            opposite = len(sp) == 1 and len(sn) == 1 and sp[0] == -sn[0]
            rows.append({"b": b, "invariant": inv, "tail_rate": pos.tail_rate,
                         "rate_error": rate, "signs": [sp, sn]})
            ok &= inv < 1e-12 and rate < 0.02 and opposite
        return ok, {"profiles": rows}
    return _timed(8, "profile ODE", 5.0, run)


# ---------------------------------------------------------------------------
# 9


def _refined_orbits():
    out = []
    hh = build_model("henon-heiles")
    for s in [c for c in find_critical_points(hh) if c.kind == "saddle"]:
        seed, T = lyapunov_seed(hh, s, 1e-3)
        out.append(("henon-heiles", refine_periodic_orbit(hh, seed, T, energy=s.value + 1e-3)))
    st = build_model("stark", {"eps": 0.5})
    for s in [c for c in find_critical_points(st) if c.kind == "saddle"]:
        seed, T = lyapunov_seed(st, s, 0.2)
        out.append(("stark", refine_periodic_orbit(st, seed, T, energy=s.value + 0.2)))
    q = build_model("saddle-center", {"a": -1.0, "b": 1.0})
    seed, T = lyapunov_seed(q, find_critical_points(q)[0], 1e-2)
    out.append(("saddle-center", refine_periodic_orbit(q, seed, T)))
    return out


def criterion_integrator() -> Criterion:
    def run():
        hh = build_model("henon-heiles")
        x = np.array([0.1, -0.2])
        speed = math.sqrt(2 * (0.16 - float(hh.V(x))))
        w0 = np.concatenate([x, speed * np.array([math.cos(1.0), math.sin(1.0)])])
        traj = integrate_flow(hh, w0, (0.0, 100.0), 1e-12)
        drift = traj.energy_drift()
        symp = {f"{name}:{i}": symplecticity_error(o.monodromy)
                for i, (name, o) in enumerate(_refined_orbits())}
        eu = build_model("euler-regularized", {"mu": 0.25, "c": -0.5})
        f1, f2 = eu.decoupled
        z0 = np.array([0.4, 1.1, 0.3, -0.2])
        tr = integrate_flow(eu, z0, (0.0, 50.0), 1e-12)
        Z = tr.states
        K1 = 0.5 * Z[:, 2] ** 2 + f1.V(Z[:, 0])
        K2 = 0.5 * Z[:, 3] ** 2 + f2.V(Z[:, 1])
        k_err = max(float(np.max(np.abs(K1 - K1[0]))), float(np.max(np.abs(K2 - K2[0]))))
        ok = drift < 1e-9 and max(symp.values()) < 1e-8 and k_err < 1e-9 \
            and tr.status == "complete"
        return ok, {"energy_drift": drift, "symplecticity": symp, "euler_split_drift": k_err}
    return _timed(9, "integrator quality", float("inf"), run)


# ---------------------------------------------------------------------------
# 10


def counterexample_model():
    """Decoupled model whose K0 projection contains a maximum of V2."""
    f1 = Factor(V=lambda t: 0.5 * t**2 - 0.25 * t**4, dV=lambda t: t - t**3,
                d2V=lambda t: 1 - 3 * t**2, interval=(-3.0, 3.0), label="t^2/2 - t^4/4")
    f2 = Factor(V=lambda t: (t**2 - 0.25) ** 2, dV=lambda t: 4 * t * (t**2 - 0.25),
                d2V=lambda t: 12 * t**2 - 1.0, interval=(-3.0, 3.0), label="(t^2 - 1/4)^2")
    return product_model(f1, f2, name="counterexample")


def criterion_foliation() -> Criterion:
    def run():
        st = build_model("stark", {"eps": 0.5})
        g1, g2 = split_decoupled(st)
        fol = gradient_leaves(g1, 2.2, factor2=g2)
        per = [p["projected"] for p in fol.transversality["per_leaf"] if p is not None]
        trans = min(per)
        hyp = {
            "stark": check_foliation_hypotheses(st, 2.2)["pass"],
            "frozen-hill": check_foliation_hypotheses(build_model("frozen-hill"), 1.1)["pass"],
            "chemical-I": check_foliation_hypotheses(
                build_model("chemical", {"alpha": 1.0, "beta": 1.0}), 0.1)["pass"],
            "counterexample": check_foliation_hypotheses(counterexample_model(), 0.3)["pass"],
        }
        ok = (trans > 0.05 and len(per) == len(fol.leaves) and hyp["stark"]
              and hyp["frozen-hill"] and hyp["chemical-I"] and not hyp["counterexample"])
        return ok, {"leaves": len(fol.leaves), "min_projected_angle": trans,
                    "min_ambient_angle": fol.transversality["ambient"],
                    "bindings": [b.to_dict() for b in fol.bindings], "hypotheses": hyp}
    return _timed(10, "foliation transversality", float("inf"), run)


# ---------------------------------------------------------------------------
# 11


def criterion_neck() -> Criterion:
    def run():
        q = build_model("saddle-center", {"a": -1.0, "b": 1.0})
        s = find_critical_points(q)[0]
        betas = [10.0 ** -k for k in range(1, 16)]
        table = neck_rotation_experiment(q, s, [0.01], betas)
        worst = min(r.delta_min - table.omega * r.transit_time for r in table.runs)
        last = table.runs[-1].delta_min
        grows = all(b.delta_min > a.delta_min for a, b in zip(table.runs, table.runs[1:]))
        ok = worst >= -2 * math.pi - 0.1 and last > 20 * math.pi
        return ok, {"min_excess": worst, "C": table.C, "closest_delta_min": last,
                    "monotone": grows, "runs": len(table.runs)}
    return _timed(11, "neck rotation", float("inf"), run)


CRITERIA = (criterion_critical_points, criterion_euler_thresholds, criterion_action_law,
            criterion_index_oracle, criterion_decoupled_classes, criterion_hh_identity,
            criterion_positivity, criterion_profile, criterion_integrator,
            criterion_foliation, criterion_neck)


def run_all(echo=None) -> list:
    """Run every criterion; ``echo`` receives one status line per criterion."""
    out = []
    for fn in CRITERIA:
        c = fn()
        out.append(c)
        if echo is not None:
            echo(c.line())
    return out
