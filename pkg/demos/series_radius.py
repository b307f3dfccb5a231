"""
Power series about t = 0
========================

The rate equations have entire coefficients, so their Taylor series
converge for every t.  At finite order the root test nevertheless
produces a finite number; here we watch it drift and check that the
series really does converge past a quarter period.
"""

import qontrol as qc

params = qc.make_params(1.0, 0.0)

# %%
# Accuracy at t = 0.3 T against the closed form (conjugate convention).
exact = qc.degenerate_amplitudes(params, 0.3)
for order in (40, 60, 80, 120):
    value = qc.evaluate_series(qc.taylor_coefficients(params, order), 0.3)
    err = abs(value.a12 - exact.a12.conjugate())
    print(f"order {order:3d}: error {err:.2e}, tail negligible: {value.converged}")

# %%
# Root-test estimates creep upward with order.
for order in (40, 80, 160):
    sol = qc.taylor_coefficients(params, order)
    print(f"order {order:3d}: radius estimate {sol.radius_estimate:.4f} T")

# %%
# Without coupling the series is a pure phase and the estimate is unbounded.
free = qc.taylor_coefficients(qc.make_params(1.0, 0.0, coupling_override=0.0), 80)
print("uncoupled radius:", free.radius_estimate)
