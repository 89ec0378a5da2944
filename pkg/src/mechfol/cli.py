"""Command-line interface: ``mechfol VERB [options]``.

Exit status is 0 on success, 2 on invalid input and 3 on numerical failure.
With ``--json`` failures also write ``{"status": "error", ...}`` to the path.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from .czindex import (IndexError_, conley_zehnder_index, index_report, neck_rotation_experiment,
                      rotation_number, winding_interval)
from .decoupled import (FoliationError, check_foliation_hypotheses, euler_regime,
                        gradient_leaves, leaf_separation, split_decoupled)
from .dynamics import IntegrationError
from .hill import GeometryError, extract_hill_component, find_critical_points, polylines_to_svg
from .models import DomainError, ModelError, build_model, load_model
from .orbits import OrbitError, attach_index, lyapunov_seed, refine_periodic_orbit, \
    smallest_action_survey
from .plane import PlaneError, build_plane, integrate_profile, plane_to_obj, profile_to_csv, \
    verify_transversality_to_flow

VERBS = ("critical-points", "hill", "lyapunov", "index", "actions", "foliation",
         "euler-regime", "plane", "neck", "report")

INPUT_ERRORS = (ModelError, DomainError, PlaneError, ValueError)
NUMERIC_ERRORS = (OrbitError, IntegrationError, FoliationError, GeometryError, IndexError_,
                  ArithmeticError, np.linalg.LinAlgError, RuntimeError)


class UsageError(ValueError):
    pass


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _param(text):
    key, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        return key.strip(), float(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"parameter {key!r} needs a number")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--model", default=None, help="zoo model name")
    src.add_argument("--model-file", default=None, help="JSON model config")
    common.add_argument("--param", action="append", type=_param, default=[],
                        metavar="KEY=VALUE", help="extra model parameter (repeatable)")
    common.add_argument("--energy", type=float)
    common.add_argument("--eps", type=float, help="Stark field strength")
    common.add_argument("--mu", type=float, help="Euler mass ratio")
    common.add_argument("--c", type=float, help="Euler energy")
    common.add_argument("--tol", type=float, default=1e-12)
    common.add_argument("--out", default=None)
    common.add_argument("--json", default=None)
    common.add_argument("--seed", type=int, default=0)

    p = argparse.ArgumentParser(prog="mechfol", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="verb", required=True, metavar="VERB")

    sub.add_parser("critical-points", parents=[common], help="critical points of V")
    h = sub.add_parser("hill", parents=[common], help="Hill-region component boundary")
    h.add_argument("--point", type=_floats, help="interior point x1,x2")
    for name in ("lyapunov", "index", "actions"):
        q = sub.add_parser(name, parents=[common], help=f"{name} of periodic orbits")
        q.add_argument("--saddle", type=int, default=0, help="saddle index in the table")
        q.add_argument("--state", type=_floats, help="orbit seed x1,x2,y1,y2")
        q.add_argument("--period", type=float, help="orbit period guess")
        if name == "index":
            q.add_argument("--iterates", type=int, default=0,
                           help="also estimate the rotation number up to this iterate")
    f = sub.add_parser("foliation", parents=[common], help="decoupled foliation leaves")
    f.add_argument("--seeds", type=int, default=20)
    sub.add_parser("euler-regime", parents=[common], help="two-centre energy regime")
    pl = sub.add_parser("plane", parents=[common], help="explicit plane profile")
    pl.add_argument("--b", type=float, default=1.0)
    pl.add_argument("--f0", type=float, default=1.0)
    n = sub.add_parser("neck", parents=[common], help="neck rotation sweep")
    n.add_argument("--approaches", type=_floats)
    n.add_argument("--kind", choices=("transit", "bounce"), default="transit")
    sub.add_parser("report", parents=[common], help="run the acceptance suite")
    return p


# ---------------------------------------------------------------------------


def _model(args, default=None):
    params = dict(args.param)
    if args.model_file:
        m = load_model(args.model_file)
        if params:
            m = build_model(m.name, {**m.params, **params}, m.domain)
        return m
    name = args.model or default
    if name is None:
        raise UsageError("this verb needs --model or --model-file")
    if args.eps is not None:
        params["eps"] = args.eps
    if args.mu is not None:
        params["mu"] = args.mu
    if args.c is not None:
        params["c"] = args.c
    return build_model(name, params)


def _need(args, attr):
    val = getattr(args, attr)
    if val is None:
        raise UsageError(f"--{attr.replace('_', '-')} is required")
    return val


def _saddles(model):
    return [c for c in find_critical_points(model) if c.kind == "saddle"]


def _orbit(model, args, tol):
    if args.state is not None:
        if len(args.state) != 4 or args.period is None:
            raise UsageError("--state needs 4 numbers and --period")
        return refine_periodic_orbit(model, np.array(args.state), args.period,
                                     energy=args.energy, int_tol=max(tol, 1e-14), label="custom")
    sad = _saddles(model)
    if not sad:
        raise UsageError("model has no saddle; pass --state and --period")
    if not 0 <= args.saddle < len(sad):
        raise UsageError(f"--saddle must lie in [0, {len(sad) - 1}]")
    s = sad[args.saddle]
    E = _need(args, "energy")
    seed, T = lyapunov_seed(model, s, E - s.value)
    return refine_periodic_orbit(model, seed, T, energy=E, int_tol=max(tol, 1e-14),
                                 label=f"lyapunov-{args.saddle}")


def _write_json(path, payload):
    text = json.dumps(payload, sort_keys=True, indent=1, allow_nan=True)
    if path in (None, "-"):
        print(text)
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def _cmd_critical_points(args):
    m = _model(args)
    cps = find_critical_points(m)
    print(f"{'x1':>14} {'x2':>14} {'value':>20}  kind")
    for c in cps:
        print(f"{c.location[0]:14.10f} {c.location[1]:14.10f} {c.value:20.15f}  {c.kind}")
    return {"model": m.name, "critical_points": [c.to_dict() for c in cps]}


def _cmd_hill(args):
    m = _model(args)
    E = _need(args, "energy")
    if args.point is not None:
        p = args.point
    else:
        mins = [c for c in find_critical_points(m) if c.kind == "minimum" and c.value < E]
        if not mins:
            raise UsageError("no minimum below the energy; pass --point")
        p = min(mins, key=lambda c: c.value).location
    comp = extract_hill_component(m, E, p, direction=(math.cos(0.7), math.sin(0.7)))
    if args.out:
        if args.out.endswith(".csv"):
            from .hill import polyline_to_csv
            polyline_to_csv(comp.boundary, args.out)
        else:
            polylines_to_svg([comp.boundary], args.out,
                             markers=[c.location for c in comp.critical_points])
    proj = comp.projections()
    print(f"component at E = {E:g}: area {comp.area:.10g}, "
          f"x1 in [{proj[0][0]:.8g}, {proj[0][1]:.8g}], x2 in [{proj[1][0]:.8g}, {proj[1][1]:.8g}]")
    return {"model": m.name, "energy": E, "area": comp.area, "projections": proj,
            "critical_points": [c.to_dict() for c in comp.critical_points],
            "boundary_points": len(comp.boundary)}


def _cmd_lyapunov(args):
    m = _model(args)
    orb = attach_index(m, _orbit(m, args, args.tol))
    if args.out:
        orb.to_json(args.out)
    print(f"{orb.label}: period {orb.period:.12g}, action {orb.action:.12g}, mu {orb.mu}, "
          f"{orb.floquet}, residual {orb.residual:.2e}")
    return orb.to_dict()


def _cmd_index(args):
    m = _model(args)
    orb = _orbit(m, args, args.tol)
    I = winding_interval(m, orb)
    res = conley_zehnder_index(I)
    rot = rotation_number(m, orb, k_max=args.iterates, interval=I) if args.iterates else None
    rep = index_report(orb.label, I, res, rot)
    print(f"I = [{I.lower:.10f}, {I.upper:.10f}]  mu = {res.mu}"
          + ("  (degenerate)" if res.degenerate else "")
          + (f"  rho = {rot.rho:.6f}" if rot is not None else ""))
    return rep


def _cmd_actions(args):
    m = _model(args)
    E = _need(args, "energy")
    orbits = []
    for i, s in enumerate(_saddles(m)):
        if s.value >= E:
            continue
        seed, T = lyapunov_seed(m, s, E - s.value)
        o = refine_periodic_orbit(m, seed, T, energy=E, label=f"lyapunov-{i}")
        orbits.append(attach_index(m, o))
    if args.state is not None:
        ns = argparse.Namespace(**{**vars(args), "energy": E})
        orbits.append(attach_index(m, _orbit(m, ns, args.tol)))
    if not orbits:
        raise UsageError("no saddle below the energy and no --state given")
    out = smallest_action_survey(orbits)
    for r in out["ranking"]:
        print(f"{r['label']:>14}  action {r['action']:.12g}  mu {r['mu']}")
    return out


def _cmd_foliation(args):
    m = _model(args)
    E = _need(args, "energy")
    f1, f2 = split_decoupled(m)
    fol = gradient_leaves(f1, E, seeds=args.seeds, factor2=f2)
    hyp = check_foliation_hypotheses(m, E)
    if args.out:
        fol.to_svg(args.out)
    counts = {k: fol.count(k) for k in ("family-plane", "rigid-plane", "rigid-cylinder")}
    print(f"E = {E:g}: bindings " + ", ".join(f"{b.kind}@{b.location:+.6g}" for b in fol.bindings))
    print("leaves " + ", ".join(f"{k} {v}" for k, v in counts.items())
          + f"; transversality projected {fol.transversality['projected']:.4f} rad, "
          f"ambient {fol.transversality['ambient']:.4f} rad; hypotheses "
          + ("pass" if hyp["pass"] else "fail"))
    d = fol.to_dict()
    d.pop("leaves")
    d["transversality"] = {k: v for k, v in d["transversality"].items() if k != "per_leaf"}
    d["hypotheses"] = hyp
    d["separation"] = {str(k): v for k, v in leaf_separation(fol).items()}
    return d


def _cmd_euler_regime(args):
    r = euler_regime(_need(args, "mu"), _need(args, "c"))
    print(f"mu = {r['mu']:g}, c = {r['c']:g}: regime {r['regime']} "
          f"(c_crit = {r['thresholds']['c_crit']:.15g}, c2 = {r['thresholds']['c2']:.15g})")
    return r


def _cmd_plane(args):
    prof = integrate_profile(args.b, args.f0)
    if args.out:
        if args.out.endswith(".obj"):
            plane_to_obj(build_plane(prof, 48), args.out)
        else:
            profile_to_csv(prof, args.out)
    tr = verify_transversality_to_flow(prof)
    print(f"b = {args.b:g}, f0 = {args.f0:g}: {len(prof.s)} nodes on [{prof.s[0]:.4g}, "
          f"{prof.s[-1]:.4g}], invariant error {prof.invariant_error():.2e}, "
          f"tail rate {prof.tail_rate:.6f} (1/sqrt(b) = {1 / math.sqrt(args.b):.6f}), "
          f"crossing sign {tr.signs}")
    return {"b": args.b, "f0": args.f0, "nodes": len(prof.s),
            "s_range": [float(prof.s[0]), float(prof.s[-1])],
            "invariant_error": prof.invariant_error(), "tail_rate": prof.tail_rate,
            "head_rate": prof.head_rate, "crossing_signs": list(tr.signs)}


def _cmd_neck(args):
    m = _model(args, default="saddle-center")
    sad = _saddles(m)
    if not sad:
        raise UsageError("model has no saddle")
    s = sad[0]
    E = args.energy if args.energy is not None else s.value + 0.01
    betas = args.approaches or [10.0 ** -k for k in range(1, 16)]
    table = neck_rotation_experiment(m, s, [E], betas, kind=args.kind, tolerance=args.tol)
    if args.out:
        table.to_csv(args.out)
    print(f"{'approach':>10} {'transit':>10} {'dtheta_min':>12}")
    for r in table.runs:
        print(f"{r.approach:10.3g} {r.transit_time:10.5f} {r.delta_min:12.6f}")
    print(f"C = {table.C:.6f} (bound 2 pi = {2 * math.pi:.6f})")
    return table.to_dict()


def _cmd_report(args):
    from .acceptance import run_all
    results = run_all(print)
    ok = all(c.passed for c in results)
    payload = {"status": "ok" if ok else "failed",
               "criteria": [c.to_dict() for c in results]}
    if not ok:
        payload["reason"] = "criteria failed: " + ", ".join(str(c.number) for c in results
                                                             if not c.passed)
    return payload, (0 if ok else 3)


COMMANDS = {
    "critical-points": _cmd_critical_points, "hill": _cmd_hill, "lyapunov": _cmd_lyapunov,
    "index": _cmd_index, "actions": _cmd_actions, "foliation": _cmd_foliation,
    "euler-regime": _cmd_euler_regime, "plane": _cmd_plane, "neck": _cmd_neck,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    np.random.seed(args.seed)
    status = 0
    try:
        result = COMMANDS[args.verb](args)
        if isinstance(result, tuple):
            result, status = result
        payload = {"status": "ok", "verb": args.verb, "result": result} \
            if args.verb != "report" else result
    except INPUT_ERRORS as exc:
        status = 2
        payload = {"status": "error", "kind": "validation", "verb": args.verb,
                   "reason": f"{type(exc).__name__}: {exc}"}
    except NUMERIC_ERRORS as exc:
        status = 3
        payload = {"status": "error", "kind": "numerical", "verb": args.verb,
                   "reason": f"{type(exc).__name__}: {exc}"}
    if payload.get("status") == "error":
        print(f"mechfol {args.verb}: {payload['reason']}", file=sys.stderr)
    if args.json:
        _write_json(args.json, _jsonable(payload))
    return status


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


if __name__ == "__main__":
    sys.exit(main())
