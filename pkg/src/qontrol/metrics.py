"""Population-control metrics built on integrated trajectories.

* control duration: share of ``[0, window*T]`` with ``p2 >= threshold``
* non-degeneracy effect: percentage deviation of ``p2`` from the degenerate run
* scaling exponent of that effect in ``delta_e / E``
* least-squares fit of the normalised effect onto ``t^2, t^3, t^4``
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .core import (
    DEFAULT_STEP_IN_HBAR_OVER_H12,
    InvalidParameterError,
    SystemParams,
    TimeGrid,
    Trajectory,
    make_params,
)
from .dynamics import DivergencePolicy, EquationForm, IntegrationMethod, integrate

TIME_UNITS = ("fraction_of_T", "hbar_over_H12")
EFFECT_FLOOR = 1e-12
QUARTER = 0.25


class TrajectoryTooShortError(ValueError):
    pass


class DivergedTrajectoryError(ArithmeticError):
    pass


class GridMismatchError(ValueError):
    pass


class EffectBelowNoiseError(ArithmeticError):
    pass


class RankDeficientFitError(np.linalg.LinAlgError):
    pass


class SweepPointError(RuntimeError):
    """A sweep point failed; carries the offending parameters."""

    def __init__(self, delta_e_over_E: float, threshold: Optional[float], cause: BaseException):
        super().__init__(
            f"sweep point delta_e_over_E={delta_e_over_E!r}, threshold={threshold!r} "
            f"failed: {cause}"
        )
        self.delta_e_over_E = delta_e_over_E
        self.threshold = threshold
        self.cause = cause


@dataclass(frozen=True)
class SimConfig:
    """How trajectories for the metrics are produced.

    ``period``, ``coupling`` (None = control condition) and ``convention``
    feed :func:`qontrol.core.make_params`; ``dt_in_hbar_over_H12`` sets the
    fixed step.
    """

    method: str = "rk4"
    form: str = "first_order"
    dt_in_hbar_over_H12: float = DEFAULT_STEP_IN_HBAR_OVER_H12
    period: float = 1.0
    coupling: Optional[float] = None
    convention: str = "cyclic"
    workers: int = 1
    policy: DivergencePolicy = field(default_factory=DivergencePolicy)

    def __post_init__(self):
        IntegrationMethod(self.method)
        EquationForm(self.form)
        if not self.dt_in_hbar_over_H12 > 0:
            raise InvalidParameterError("dt_in_hbar_over_H12 must be positive")
        if self.workers < 1:
            raise InvalidParameterError("workers must be >= 1")

    def params(self, delta_e_over_E: float) -> SystemParams:
        return make_params(
            self.period, delta_e_over_E, self.coupling, convention=self.convention
        )

    def step(self, params: SystemParams) -> float:
        if params.coupling > 0:
            return self.dt_in_hbar_over_H12 * params.hbar / params.coupling
        return self.dt_in_hbar_over_H12 * params.period

    def run(self, delta_e_over_E: float, t_end_over_T: float, dt: Optional[float] = None) -> Trajectory:
        """Integrate from 0 to at least ``t_end_over_T * T``."""
        params = self.params(delta_e_over_E)
        dt = dt or self.step(params)
        grid = TimeGrid(t_end_over_T * params.period + dt, dt)
        return integrate(params, grid, self.method, self.form, self.policy)


@dataclass(frozen=True)
class DurationPoint:
    delta_e_over_E: float
    threshold: float
    fraction: float
    window: float = QUARTER

    def __post_init__(self):
        if not 0 <= self.fraction <= 1:
            raise InvalidParameterError(f"fraction out of range: {self.fraction}")


@dataclass(frozen=True, eq=False)
class EffectSeries:
    """Effect in percent against time in fractions of ``T``.

    ``coupling_period`` is ``H12 T / hbar`` of the underlying runs, used to
    convert time to units of ``hbar / H12``.
    """

    delta_e_over_E: float
    times: np.ndarray
    effect: np.ndarray
    coupling_period: float = math.pi / 2


@dataclass(frozen=True)
class FitResult:
    c1: float
    c2: float
    c3: float
    residual_norm: float
    time_unit: str
    condition_number: float = float("nan")

    @property
    def coefficients(self) -> tuple[float, float, float]:
        return self.c1, self.c2, self.c3


def control_duration(traj: Trajectory, threshold: float, window: float = QUARTER) -> DurationPoint:
    """Share of ``[0, window*T]`` during which ``p2 >= threshold``.

    Each grid interval contributes its length times the mean of its two
    endpoint indicators (trapezoidal set measure).  The interval straddling
    ``window*T`` is clipped there, with the endpoint value interpolated.
    """
    if not 0 < threshold <= 1:
        raise InvalidParameterError(f"threshold must lie in (0, 1], got {threshold}")
    if not window > 0:
        raise InvalidParameterError("window must be positive")
    T = traj.params.period
    t_stop = window * T
    times = traj.times
    if times[0] > 0 or times[-1] < t_stop * (1 - 1e-12):
        raise TrajectoryTooShortError(
            f"trajectory covers [{times[0]}, {times[-1]}], need [0, {t_stop}]"
        )
    if traj.diverged_at is not None and traj.diverged_at < t_stop:
        raise DivergedTrajectoryError(
            f"trajectory diverged at t = {traj.diverged_at} before {t_stop}"
        )
    k = int(np.searchsorted(times, t_stop, side="right"))
    t_in = np.append(times[:k], t_stop)
    end = traj.at(min(t_stop, times[-1]))
    ind = np.append(traj.p2[:k] >= threshold, abs(end.a12) ** 2 >= threshold).astype(float)
    # clip the window start at t = 0 when the grid starts earlier
    start = int(np.searchsorted(t_in, 0.0))
    t_in, ind = t_in[start:], ind[start:]
    measure = np.sum(np.diff(t_in) * 0.5 * (ind[:-1] + ind[1:]))
    fraction = float(min(max(measure / t_stop, 0.0), 1.0))
    return DurationPoint(traj.params.delta_e_over_E, threshold, fraction, window)


def _durations_for(args):
    delta, thresholds, config, window = args
    try:
        traj = config.run(delta, window)
    except Exception as exc:  # re-raised with context by the caller
        return delta, None, exc
    points = []
    for th in thresholds:
        try:
            point = control_duration(traj, th, window)
            points.append(replace(point, delta_e_over_E=delta))
        except Exception as exc:
            return delta, th, exc
    return delta, points, None


def duration_sweep(
    delta_e_list: Sequence[float],
    thresholds: Sequence[float],
    config: SimConfig = SimConfig(),
    window: float = QUARTER,
) -> list[DurationPoint]:
    """Control durations over the product of splittings and thresholds.

    One trajectory per splitting, run on ``config.workers`` processes.  The
    result is sorted by threshold, then splitting, regardless of completion
    order.
    """
    if not len(delta_e_list) or not len(thresholds):
        raise InvalidParameterError("delta_e_list and thresholds must be non-empty")
    for d in delta_e_list:
        if not d >= 0:
            raise InvalidParameterError(f"delta_e_over_E must be >= 0, got {d}")
    for th in thresholds:
        if not 0 < th <= 1:
            raise InvalidParameterError(f"threshold must lie in (0, 1], got {th}")

    deltas = sorted(set(float(d) for d in delta_e_list))
    ths = sorted(set(float(t) for t in thresholds))
    jobs = [(d, ths, config, window) for d in deltas]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(config.workers, len(jobs))) as pool:
            results = list(pool.map(_durations_for, jobs))
    else:
        results = [_durations_for(j) for j in jobs]

    by_delta = {}
    for delta, points, exc in results:
        if exc is not None:
            th = points if isinstance(points, float) else None
            raise SweepPointError(delta, th, exc) from exc
        by_delta[delta] = {p.threshold: p for p in points}
    return [by_delta[d][th] for th in ths for d in deltas]


def nondegeneracy_effect(
    traj_de: Trajectory, traj_0: Trajectory, window: float = QUARTER
) -> EffectSeries:
    """``|p2 - p2_0| / p2_0`` in percent on ``(0, window*T]``.

    Samples where ``p2_0 < 1e-12`` are set to 0: near ``t = 0`` both
    probabilities vanish like ``t^2`` and the ratio tends to 0.
    """
    if len(traj_de) != len(traj_0) or not np.array_equal(traj_de.times, traj_0.times):
        raise GridMismatchError("trajectories must share the same time grid")
    T = traj_0.params.period
    keep = (traj_0.times > 0) & (traj_0.times <= window * T * (1 + 1e-12))
    p = traj_de.p2[keep]
    p0 = traj_0.p2[keep]
    with np.errstate(divide="ignore", invalid="ignore"):
        effect = np.where(p0 < EFFECT_FLOOR, 0.0, np.abs(p - p0) / p0 * 100.0)
    return EffectSeries(
        traj_de.params.delta_e_over_E,
        traj_0.times[keep] / T,
        effect,
        traj_0.params.control_product,
    )


def effect_series(delta_e_over_E: float, config: SimConfig = SimConfig(), window: float = QUARTER) -> EffectSeries:
    """Run the splitting and the degenerate reference on one grid and compare."""
    p0 = config.params(0.0)
    dt = config.step(p0)
    traj_0 = config.run(0.0, window, dt)
    traj = config.run(delta_e_over_E, window, dt)
    return replace(nondegeneracy_effect(traj, traj_0, window), delta_e_over_E=delta_e_over_E)


def numerical_error_series(config: SimConfig = SimConfig(), window: float = QUARTER) -> EffectSeries:
    """Step-halving error of the degenerate run, in the same percent units as the effect.

    ``|p2(dt) - p2(dt/2)| / p2(dt)`` at the shared samples.
    """
    params = config.params(0.0)
    dt = config.step(params)
    coarse = config.run(0.0, window, dt)
    fine = config.run(0.0, window, dt / 2)
    n = min(len(coarse), (len(fine) + 1) // 2)
    coarse = coarse.head(n)
    fine_p2 = fine.p2[: 2 * n - 1 : 2]
    T = params.period
    keep = (coarse.times > 0) & (coarse.times <= window * T * (1 + 1e-12))
    p0 = coarse.p2[keep]
    with np.errstate(divide="ignore", invalid="ignore"):
        err = np.where(p0 < EFFECT_FLOOR, 0.0, np.abs(fine_p2[keep] - p0) / p0 * 100.0)
    return EffectSeries(0.0, coarse.times[keep] / T, err, params.control_product)


def _effect_at(traj: Trajectory, ref: Trajectory, t: float) -> float:
    p = abs(traj.at(t).a12) ** 2
    p0 = abs(ref.at(t).a12) ** 2
    return abs(p - p0) / p0 * 100.0


def scaling_exponent(
    delta_e_list: Sequence[float],
    t_probe: float = 0.125,
    config: SimConfig = SimConfig(),
) -> float:
    """Log-log slope of the effect at ``t_probe * T`` against ``delta_e / E``.

    The noise floor is the degenerate run's step-halving difference at
    ``t_probe``; every effect must clear ten times that floor.
    """
    deltas = [float(d) for d in delta_e_list]
    if any(d <= 0 for d in deltas):
        raise EffectBelowNoiseError("zero splitting gives zero effect; no log-log slope")
    if len(set(deltas)) < 3:
        raise InvalidParameterError("need at least 3 distinct splittings")
    if max(deltas) > 0.1:
        raise InvalidParameterError("splittings must not exceed 0.1 E")
    if not 0 < t_probe <= QUARTER:
        raise InvalidParameterError("t_probe must lie in (0, 1/4]")

    p0 = config.params(0.0)
    dt = config.step(p0)
    t = t_probe * p0.period
    ref = config.run(0.0, t_probe, dt)
    ref_half = config.run(0.0, t_probe, dt / 2)
    noise = _effect_at(ref_half, ref, t)
    effects = []
    for d in deltas:
        e = _effect_at(config.run(d, t_probe, dt), ref, t)
        if not e > 10 * noise:
            raise EffectBelowNoiseError(
                f"effect {e:.3g}% at delta_e_over_E={d} is within 10x noise {noise:.3g}%"
            )
        effects.append(e)
    return float(np.polyfit(np.log(deltas), np.log(effects), 1)[0])


def fit_effect(
    series: EffectSeries,
    time_unit: str = "fraction_of_T",
    window: tuple[float, float] = (0.0, QUARTER),
) -> FitResult:
    """Least squares of ``effect / (delta_e/E)^2`` onto ``t^2, t^3, t^4``.

    ``window`` (fractions of ``T``, open at the left) selects samples.  The
    solve goes through a QR factorisation; the design matrix's condition
    number is reported.
    """
    if time_unit not in TIME_UNITS:
        raise InvalidParameterError(f"time_unit must be one of {TIME_UNITS}")
    if not series.delta_e_over_E > 0:
        raise InvalidParameterError("cannot normalise an effect with zero splitting")
    times = np.asarray(series.times, dtype=float)
    sel = (times > window[0]) & (times <= window[1] * (1 + 1e-12))
    if sel.sum() < 100:
        raise InvalidParameterError(f"need >= 100 samples in the fit window, got {sel.sum()}")
    t = times[sel]
    if time_unit == "hbar_over_H12":
        t = t * series.coupling_period
    y = np.asarray(series.effect, dtype=float)[sel] / series.delta_e_over_E**2

    basis = np.stack([t**2, t**3, t**4], axis=1)
    q, r = np.linalg.qr(basis)
    diag = np.abs(np.diag(r))
    if diag.min() <= np.finfo(float).eps * diag.max() * len(t):
        raise RankDeficientFitError("fit basis is rank deficient on these samples")
    coef = np.linalg.solve(r, q.T @ y)
    resid = basis @ coef - y
    return FitResult(
        float(coef[0]),
        float(coef[1]),
        float(coef[2]),
        float(np.sqrt(np.mean(resid**2))),
        time_unit,
        float(np.linalg.cond(r)),
    )


def default_workers() -> int:
    env = os.environ.get("QONTROL_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1
