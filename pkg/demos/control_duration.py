"""
How long does a splitting let you hold the population?
======================================================

Once the two levels are split by ``delta_e`` the quarter-period transfer is
no longer complete.  The control duration measures the fraction of the
first quarter period during which the upper-state probability stays above
a target level.
"""

import matplotlib.pyplot as plt
import numpy as np

import qontrol as qc

config = qc.SimConfig(workers=qc.default_workers())
deltas = np.round(np.arange(0.0, 1.0001, 0.05), 2)
thresholds = [0.95, 0.90, 0.80, 0.70]

points = qc.duration_sweep(deltas, thresholds, config)

# %%
# Tabulate one row per splitting.
table = {(p.threshold, p.delta_e_over_E): p.fraction for p in points}
print("dE/E  " + "  ".join(f"{th:>6.2f}" for th in thresholds))
for d in deltas:
    print(f"{d:4.2f}  " + "  ".join(f"{table[(th, d)]:6.3f}" for th in thresholds))

# %%
# The peak transfer itself shows why high levels are lost first.
for d in (0.2, 0.4, 0.7, 1.0):
    traj = config.run(d, 0.25)
    print(f"dE/E={d:.1f}: max p2 over [0, T/4] = {traj.p2.max():.4f}")

# %%
fig, ax = plt.subplots(figsize=(6, 3.5))
for th in thresholds:
    ax.plot(deltas, [table[(th, d)] for d in deltas], marker="o", ms=3, label=f"{th:.0%}")
ax.set_xlabel(r"$\Delta E / E$")
ax.set_ylabel("fraction of T/4 above level")
ax.legend(title="level")
fig.tight_layout()
fig.savefig("control_duration.png", dpi=120)
