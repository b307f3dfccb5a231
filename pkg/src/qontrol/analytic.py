"""Closed-form dynamics in the degenerate limit.

For ``delta_e = 0`` the amplitudes are

    a11(t) = cos[A sin(2 pi t / T)]
    a12(t) = i sin[A sin(2 pi t / T)]

with phase amplitude ``A = params.pulse_area`` (``H12 T / hbar`` under the
default cyclic convention).  The ``+i`` on ``a12`` corresponds to the
``exp(+i E t / hbar)`` phase convention; integrating the rate equations
``i hbar da/dt = H a`` gives the complex conjugate, i.e. ``a12 -> -a12``,
with identical probabilities.
"""

from __future__ import annotations

import numpy as np

from .core import AmplitudePair, SystemParams, Trajectory


def _phase(params: SystemParams, t):
    return params.pulse_area * np.sin(params.omega * np.asarray(t, dtype=float))


def degenerate_amplitudes(params: SystemParams, t: float) -> AmplitudePair:
    """Amplitudes of the ``delta_e = 0`` solution; ``params.delta_e`` is ignored."""
    chi = float(_phase(params, t))
    return AmplitudePair(complex(np.cos(chi)), 1j * np.sin(chi))


def degenerate_probability_transfer(params: SystemParams, t):
    """Transfer probability ``|a12(t)|^2 = sin^2[A sin(2 pi t / T)]``.

    Accepts scalar or array ``t``.
    """
    p = np.sin(_phase(params, t)) ** 2
    return float(p) if np.ndim(p) == 0 else p


def degenerate_trajectory(params: SystemParams, times) -> Trajectory:
    """Sample the closed form on ``times``."""
    times = np.asarray(times, dtype=float)
    chi = _phase(params, times)
    return Trajectory(
        params,
        times,
        np.cos(chi).astype(complex),
        1j * np.sin(chi),
        method="exact",
        form="analytic",
    )
