"""Fixed-step integration of the driven two-state amplitude equations.

Two equivalent formulations are supported.

First order (regular everywhere)::

    da11/dt = -i W cos(w t) a12
    da12/dt = -i d a12 - i W cos(w t) a11

Second order (one equation per amplitude, singular where ``tan(w t)`` is)::

    a'' + (w tan(w t) + i d) a' + W^2 cos^2(w t) a                     = 0   (a11)
    a'' + (w tan(w t) + i d) a' + (W^2 cos^2(w t) + i w d tan(w t)) a = 0   (a12)

with ``W = params.drive_rate``, ``d = params.detuning_rate`` and
``w = 2 pi / T``.

Both are linear, so each explicit step is a 2x2 matrix that depends only on
the step's start time.  The step matrices are assembled with numpy in
blocks and then applied sequentially.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .core import AmplitudePair, InvalidParameterError, SystemParams, TimeGrid, Trajectory

_BLOCK = 1 << 15


class IntegrationMethod(str, enum.Enum):
    EULER = "euler"
    RK4 = "rk4"


class EquationForm(str, enum.Enum):
    FIRST_ORDER = "first_order"
    SECOND_ORDER = "second_order"


class GuardExceededError(ArithmeticError):
    """``|tan(2 pi t / T)|`` exceeded the policy's guard near a singular point."""

    def __init__(self, t: float, tan_value: float):
        super().__init__(f"|tan| = {abs(tan_value):.3g} exceeds guard at t = {t!r}")
        self.t = t
        self.tan_value = tan_value


class DivergenceError(ArithmeticError):
    """Raised when divergence is detected and the policy asks to halt.

    ``trajectory`` holds the samples up to and including the offending one.
    """

    def __init__(self, message: str, trajectory: Trajectory):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass(frozen=True)
class DivergencePolicy:
    """When to declare divergence, and whether to stop there.

    defect_threshold
        Unitarity defect above which a sample counts as diverged.
    tan_guard
        Largest ``|tan(w t)|`` the second-order form may evaluate.
    halt_on_divergence
        Raise :class:`DivergenceError` instead of recording ``diverged_at``.
    """

    defect_threshold: float = 1e-3
    tan_guard: float = 1e8
    halt_on_divergence: bool = False

    def __post_init__(self):
        if not self.defect_threshold > 0:
            raise InvalidParameterError("defect_threshold must be positive")
        if not self.tan_guard > 0:
            raise InvalidParameterError("tan_guard must be positive")


def first_order_matrix(params: SystemParams, t) -> np.ndarray:
    """Rate matrix ``M(t)`` with ``da/dt = M(t) a``; shape ``t.shape + (2, 2)``."""
    t = np.asarray(t, dtype=float)
    drive = -1j * params.drive_rate * np.cos(params.omega * t)
    m = np.zeros(t.shape + (2, 2), dtype=complex)
    m[..., 0, 1] = drive
    m[..., 1, 0] = drive
    m[..., 1, 1] = -1j * params.detuning_rate
    return m


def second_order_matrix(params: SystemParams, t, which: str) -> np.ndarray:
    """Companion matrix acting on ``(a, da/dt)`` for amplitude ``which``."""
    if which not in ("a11", "a12"):
        raise InvalidParameterError(f"which must be 'a11' or 'a12', got {which!r}")
    t = np.asarray(t, dtype=float)
    w = params.omega
    d = params.detuning_rate
    tan = np.tan(w * t)
    potential = params.drive_rate**2 * np.cos(w * t) ** 2 + 0j
    if which == "a12":
        potential = potential + 1j * w * d * tan
    m = np.zeros(t.shape + (2, 2), dtype=complex)
    m[..., 0, 1] = 1.0
    m[..., 1, 0] = -potential
    m[..., 1, 1] = -(w * tan + 1j * d)
    return m


def derivative_first_order(
    params: SystemParams, t: float, state: AmplitudePair
) -> AmplitudePair:
    """Time derivatives ``(da11/dt, da12/dt)`` of the first-order system."""
    c = params.drive_rate * math.cos(params.omega * t)
    return AmplitudePair(
        -1j * c * state.a12,
        -1j * (params.detuning_rate * state.a12 + c * state.a11),
    )


def derivative_second_order(
    params: SystemParams,
    t: float,
    state: tuple[complex, complex],
    which: str,
    tan_guard: float = 1e8,
) -> complex:
    """Second derivative of amplitude ``which`` given ``state = (a, da/dt)``.

    Raises
    ------
    GuardExceededError
        If ``|tan(2 pi t / T)| > tan_guard``.
    """
    tan = math.tan(params.omega * t)
    if abs(tan) > tan_guard:
        raise GuardExceededError(t, tan)
    a, adot = state
    return complex(second_order_matrix(params, t, which)[1] @ np.array([a, adot]))


def _step_matrices(matrix, t0: np.ndarray, h: float, method: IntegrationMethod) -> np.ndarray:
    eye = np.eye(2)
    m0 = matrix(t0)
    if method is IntegrationMethod.EULER:
        return eye + h * m0
    mh = matrix(t0 + 0.5 * h)
    m1 = matrix(t0 + h)
    k1 = m0
    k2 = mh @ (eye + 0.5 * h * k1)
    k3 = mh @ (eye + 0.5 * h * k2)
    k4 = m1 @ (eye + h * k3)
    return eye + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _propagate(matrix, times: np.ndarray, h: float, method, y0) -> np.ndarray:
    """Apply step matrices sequentially; returns shape ``(len(times), 2)``."""
    out = np.empty((len(times), 2), dtype=complex)
    x, y = complex(y0[0]), complex(y0[1])
    out[0] = x, y
    row = 1
    for start in range(0, len(times) - 1, _BLOCK):
        t0 = times[start : min(start + _BLOCK, len(times) - 1)]
        steps = _step_matrices(matrix, t0, h, method).tolist()
        block = []
        for (p00, p01), (p10, p11) in steps:
            x, y = p00 * x + p01 * y, p10 * x + p11 * y
            block.append((x, y))
        out[row : row + len(block)] = block
        row += len(block)
    return out


def _guard_trip(params: SystemParams, times: np.ndarray, h: float, method, guard: float):
    """Index of the first step whose stage times breach the tan guard, or None."""
    t0 = times[:-1]
    stages = [t0] if method is IntegrationMethod.EULER else [t0, t0 + 0.5 * h, t0 + h]
    bad = np.zeros(len(t0), dtype=bool)
    for s in stages:
        with np.errstate(over="ignore", invalid="ignore"):
            bad |= ~(np.abs(np.tan(params.omega * s)) <= guard)
    hits = np.flatnonzero(bad)
    return int(hits[0]) if hits.size else None


def integrate(
    params: SystemParams,
    grid: TimeGrid,
    method: Union[IntegrationMethod, str] = IntegrationMethod.RK4,
    form: Union[EquationForm, str] = EquationForm.FIRST_ORDER,
    policy: Optional[DivergencePolicy] = None,
    initial: Optional[AmplitudePair] = None,
) -> Trajectory:
    """Integrate from ``initial`` (default ``a11 = 1, a12 = 0``) over ``grid``.

    ``diverged_at`` is set at the first sample whose unitarity defect exceeds
    ``policy.defect_threshold``.  For the second-order form, the trajectory is
    cut at the last sample before a step whose stage times breach the tan
    guard, and ``diverged_at`` is set there.  Initial derivatives for the
    second-order form come from the first-order system at ``t_start``.

    Raises
    ------
    DivergenceError
        On either kind of divergence when ``policy.halt_on_divergence`` is set.
    """
    method = IntegrationMethod(method)
    form = EquationForm(form)
    policy = policy or DivergencePolicy()
    initial = initial or AmplitudePair(1.0 + 0j, 0j)
    times = grid.times()
    h = grid.dt

    guard_step = None
    if form is EquationForm.SECOND_ORDER:
        guard_step = _guard_trip(params, times, h, method, policy.tan_guard)
        if guard_step is not None:
            times = times[: guard_step + 1]

    if len(times) == 1:
        a11 = np.array([initial.a11], dtype=complex)
        a12 = np.array([initial.a12], dtype=complex)
    elif form is EquationForm.FIRST_ORDER:
        ys = _propagate(
            lambda t: first_order_matrix(params, t),
            times, h, method, (initial.a11, initial.a12),
        )
        a11, a12 = ys[:, 0], ys[:, 1]
    else:
        rates = derivative_first_order(params, times[0], initial)
        a11 = _propagate(
            lambda t: second_order_matrix(params, t, "a11"),
            times, h, method, (initial.a11, rates.a11),
        )[:, 0]
        a12 = _propagate(
            lambda t: second_order_matrix(params, t, "a12"),
            times, h, method, (initial.a12, rates.a12),
        )[:, 0]

    with np.errstate(over="ignore", invalid="ignore"):
        defect = np.abs(np.abs(a11) ** 2 + np.abs(a12) ** 2 - 1.0)
    traj = Trajectory(params, times, a11, a12, defect, None, method.value, form.value)

    bad = np.flatnonzero(~(defect <= policy.defect_threshold))
    if bad.size:
        k = int(bad[0])
        if policy.halt_on_divergence:
            raise DivergenceError(
                f"unitarity defect {defect[k]:.6e} exceeds "
                f"{policy.defect_threshold:g} at t = {float(times[k])!r}",
                traj.head(k + 1),
            )
        return _with_divergence(traj, float(times[k]))
    if guard_step is not None:
        if policy.halt_on_divergence:
            raise DivergenceError(
                f"tan guard {policy.tan_guard:g} exceeded after t = {float(times[-1])!r}", traj
            )
        return _with_divergence(traj, float(times[-1]))
    return traj


def _with_divergence(traj: Trajectory, t: float) -> Trajectory:
    return Trajectory(
        traj.params, traj.times, traj.a11, traj.a12, traj.unitarity_defect,
        t, traj.method, traj.form,
    )


def unitarity_defect_series(traj: Trajectory) -> np.ndarray:
    """``| |a11|^2 + |a12|^2 - 1 |`` recomputed from the stored amplitudes."""
    with np.errstate(over="ignore", invalid="ignore"):
        return np.abs(traj.p1 + traj.p2 - 1.0)
