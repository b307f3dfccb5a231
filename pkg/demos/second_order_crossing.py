"""
Crossing the singular point of the second-order form
====================================================

Eliminating one amplitude gives a second-order equation whose coefficients
contain ``tan(2 pi t / T)``, singular at T/4.  A fixed-step integrator
steps past the singular point, and the norm of the solution starts to
drift; the first-order system has no such trouble.
"""

import matplotlib.pyplot as plt

import qontrol as qc

policy = qc.DivergencePolicy(defect_threshold=1e-8)

fig, ax = plt.subplots(figsize=(6, 3.5))
for d in (0.2, 0.5, 1.0):
    params = qc.make_params(1.0, d)
    grid = qc.TimeGrid(0.35, qc.default_step(params))
    second = qc.integrate(params, grid, form="second_order", policy=policy)
    first = qc.integrate(params, grid, policy=policy)
    print(
        f"dE/E={d:.1f}: second order diverges at t/T = {second.diverged_at:.5f}; "
        f"first-order defect {first.unitarity_defect.max():.1e}"
    )
    ax.semilogy(second.t_over_T[::20], second.unitarity_defect[::20] + 1e-17, label=f"{d:.1f}")

ax.axvline(0.25, color="k", lw=0.8, ls=":")
ax.set_xlabel("t / T")
ax.set_ylabel("unitarity defect")
ax.legend(title=r"$\Delta E/E$")
fig.tight_layout()
fig.savefig("second_order_crossing.png", dpi=120)
