"""
Full population transfer in the degenerate limit
================================================

With equal level energies and the coupling tuned so that ``H12 T / hbar``
equals pi/2, a driven two-state system moves all of its population into the
upper state at a quarter period and returns it at half a period.  Here we
integrate the amplitude equations and lay the result over the closed form.
"""

import matplotlib.pyplot as plt
import numpy as np

import qontrol as qc

# %%
# One drive period, coupling chosen for complete transfer.
params = qc.make_params(period=1.0, delta_e_over_E=0.0)
grid = qc.TimeGrid(params.period, qc.default_step(params))
traj = qc.integrate(params, grid, method="rk4")

exact = qc.degenerate_probability_transfer(params, traj.times)
print("samples:", len(traj))
print("max |p2 - closed form|:", np.max(np.abs(traj.p2 - exact)))
print("p2 at T/4:", abs(traj.at(0.25).a12) ** 2)
print("worst unitarity defect:", traj.unitarity_defect.max())

# %%
# The literal reading of the rate equations (drive rate H12/hbar rather
# than 2 pi H12/hbar) barely moves any population under the same condition.
literal = qc.make_params(1.0, 0.0, convention="angular")
print("p2(T/4) with the angular convention:", qc.degenerate_probability_transfer(literal, 0.25))

# %%
step = 50
fig, ax = plt.subplots(figsize=(6, 3.5))
ax.plot(traj.t_over_T[::step], traj.p1[::step], label="$p_1$")
ax.plot(traj.t_over_T[::step], traj.p2[::step], label="$p_2$")
ax.plot(traj.t_over_T[::step], (traj.p1 + traj.p2)[::step], "k--", lw=0.8, label="$p_1+p_2$")
ax.set_xlabel("t / T")
ax.set_ylabel("probability")
ax.legend(loc="center right")
fig.tight_layout()
fig.savefig("degenerate_limit.png", dpi=120)
