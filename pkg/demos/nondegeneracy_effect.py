"""
The effect of a small splitting grows like its square
=====================================================

We compare the transfer probability with and without a splitting, express
the difference in percent, and look at how it scales with ``delta_e``
and with time.
"""

import matplotlib.pyplot as plt
import numpy as np

import qontrol as qc

config = qc.SimConfig()

# %%
# Effect curves for two splittings, and the integrator's own error floor
# from step halving.
big = qc.effect_series(0.1, config)
small = qc.effect_series(0.01, config)
floor = qc.numerical_error_series(config)
print("peak effect, dE=0.1E :", big.effect.max(), "%")
print("peak effect, dE=0.01E:", small.effect.max(), "%")
print("largest numerical error:", floor.effect.max(), "%")

# %%
# Quadratic scaling at t = T/8.
slope = qc.scaling_exponent([1e-4, 1e-3, 1e-2], 0.125, config)
print("log-log slope:", slope)

# %%
# Polynomial model effect / (dE/E)^2 = c1 t^2 + c2 t^3 + c3 t^4.  The
# effect is even in time for a cosine drive, so the cubic term has no
# intrinsic meaning; its sign depends on the window.
for window in [(0.0, 0.05), (0.0, 0.125), (0.0, 0.25)]:
    fit = qc.fit_effect(small, window=window)
    print(window, "c =", np.round(fit.coefficients, 2), "residual", f"{fit.residual_norm:.3g}")

# %%
fig, ax = plt.subplots(figsize=(6, 3.5))
ax.plot(big.times, big.effect, "r", label=r"$\Delta E = 0.1E$")
ax.plot(floor.times, floor.effect, "k", label="numerical error")
ax.set_xlabel("t / T")
ax.set_ylabel("effect (%)")
ax.set_yscale("symlog", linthresh=1e-10)
ax.legend()
fig.tight_layout()
fig.savefig("nondegeneracy_effect.png", dpi=120)
