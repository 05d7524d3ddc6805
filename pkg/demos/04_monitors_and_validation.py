#!/usr/bin/env python3
"""Health monitors and the phi1 cross-check.

Two things must hold at runtime for the architecture to make sense, and both
are assumptions rather than theorems, so the library watches them:

  * the Riccati solution stays uniformly positive definite (otherwise the
    filter gain is meaningless), witnessed by its eigenvalue extremes; and
  * the filter-error form V2 = err' P^-1 err decays along the reduced loop.

Separately, each plant registers phi1 -- the closed-loop derivative of the
virtual output -- as a hand-derived formula.  A sign error there would wreck
the observer quietly, so the library differentiates a short exact-state
rollout numerically and compares.  Writes out/monitors.png.
"""

import math
import pathlib
from dataclasses import replace

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

import ofsim

OUT = pathlib.Path(__file__).resolve().parent / "out"
OUT.mkdir(exist_ok=True)

system = ofsim.example_system()
feedback = ofsim.example_feedback()

# --- phi1 cross-check -------------------------------------------------------
probe = ofsim.state_feedback_rollout(system, feedback, [0.5], [0.9],
                                     t_final=1.0, step=1e-4)
good = ofsim.validate_phi1(system, probe)
print(f"registered phi1 vs finite difference: {good:.2e} (floor is the "
      f"O(h^2) differencing error)")

broken = replace(system,
                 phi1_fn=lambda eh, xih: -(xih[0] + eh[0] * math.cos(xih[0])))
bad = ofsim.validate_phi1(broken, probe)
print(f"sign-flipped phi1 vs finite difference: {bad:.2e} "
      f"(huge, as it should be)")

# --- Riccati monitors over the reduced run ----------------------------------
cfg = ofsim.SimConfig(mode="reduced")
traj = ofsim.simulate_reduced(cfg)
summaries = [ofsim.pd_monitor(P) for P in traj.P]
lam_min = min(s.lambda_min for s in summaries)
lam_max = max(s.lambda_max for s in summaries)
print(f"Riccati eigenvalue range over the run: [{lam_min:.3g}, {lam_max:.3g}] "
      f"-- uniformly positive definite")
print(f"worst symmetry defect: {max(s.symmetric_defect for s in summaries):.2e}")

drops = np.diff(traj.V2)
print(f"V2 nonincreasing: {bool(np.all(drops <= 1e-9 * max(1.0, traj.V2[0])))} "
      f"(V2(0) = {traj.V2[0]:.3g}, V2(end) = {traj.V2[-1]:.3g})")

# --- the fast-error form under output feedback ------------------------------
full = ofsim.simulate_output_feedback(replace(cfg, mode="output_feedback",
                                              t_final=2.0))
fig, (ax_v2, ax_w) = plt.subplots(1, 2, figsize=(11, 4))
ax_v2.semilogy(traj.times, np.maximum(traj.V2, 1e-30), "C0")
ax_v2.set_title("filter-error form V2 along the reduced loop")
ax_v2.set_xlabel("t [s]")

ax_w.semilogy(full.times, np.maximum(full.W, 1e-30), "C1")
ax_w.set_title("fast-error form W under output feedback")
ax_w.set_xlabel("t [s]")

fig.tight_layout()
fig.savefig(OUT / "monitors.png", dpi=130)
print(f"wrote {OUT / 'monitors.png'}")
