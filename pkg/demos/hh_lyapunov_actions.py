"""Henon-Heiles Lyapunov orbits above the saddle level.

Refines the three Lyapunov orbits and the index-3 loop orbit at a few
energies above 1/6, prints their actions and indices, and plots the Hill
region with the orbit projections.
"""
import argparse
import math
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from mechfol.dynamics import integrate_flow
from mechfol.hill import extract_hill_component, find_critical_points
from mechfol.models import build_model
from mechfol.orbits import attach_index, lyapunov_seed, refine_periodic_orbit, smallest_action_survey


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="demo_output")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    m = build_model("henon-heiles")
    saddles = [c for c in find_critical_points(m) if c.kind == "saddle"]
    rows = []
    fig, ax = plt.subplots(figsize=(5, 5))
    for dE in (1e-4, 1e-3, 1e-2):
        E = 1 / 6 + dE
        orbits = []
        for k, s in enumerate(saddles):
            seed, T = lyapunov_seed(m, s, dE)
            orbits.append(attach_index(m, refine_periodic_orbit(m, seed, T, energy=E,
                                                                label=f"lyapunov-{k}")))
        loop = refine_periodic_orbit(m, [0.0, 0.0, math.sqrt(2 * E), 0.0], 2 * math.pi,
                                     energy=E, reversor="x1 -> -x1", label="loop")
        orbits.append(attach_index(m, loop))
        rep = smallest_action_survey(orbits)
        law = 2 * math.pi * dE / math.sqrt(3)
        print(f"dE = {dE:.0e}: Lyapunov action {orbits[0].action:.6e} "
              f"(2 pi dE / sqrt 3 = {law:.6e}), loop action {loop.action:.4f}, "
              f"mu = {[o.mu for o in orbits]}, Lyapunov first: {rep['lyapunov_first']}")
        for o in orbits:
            rows.append((dE, o.label, o.period, o.action, o.mu))
        if dE == 1e-2:
            cuts = []
            for o in orbits[:3]:
                tr = integrate_flow(m, o.initial_state, (0, o.period), 1e-12,
                                    t_eval=np.linspace(0, o.period, 200))
                ax.plot(tr.states[:, 0], tr.states[:, 1], "r", lw=1.5)
                cuts.append(tr.states[:100, :2])
            tr = integrate_flow(m, loop.initial_state, (0, loop.period), 1e-12,
                                t_eval=np.linspace(0, loop.period, 400))
            ax.plot(tr.states[:, 0], tr.states[:, 1], "b", lw=1)
            K = extract_hill_component(m, E, (0.0, 0.0), cuts=cuts,
                                       direction=(math.cos(0.7), math.sin(0.7)))
            ax.plot(*np.vstack([K.boundary, K.boundary[:1]]).T, "k", lw=1)
    ax.set_aspect("equal")
    ax.set_title("Henon-Heiles, E = 1/6 + 1e-2")
    fig.savefig(out / "hh_orbits.png", dpi=120)
    with open(out / "hh_actions.csv", "w") as fh:
        fh.write("dE,label,period,action,mu\n")
        for r in rows:
            fh.write(",".join(str(v) for v in r) + "\n")
    print(f"wrote {out / 'hh_orbits.png'} and {out / 'hh_actions.csv'}")


if __name__ == "__main__":
    main()
