"""Taylor series of the amplitudes about ``t = 0`` and a root-test radius estimate.

Substituting ``a11 = sum alpha_n t^n``, ``a12 = sum beta_n t^n`` and
``cos(w t) = sum_m c_2m t^2m`` into the first-order system gives

    (n+1) alpha_{n+1} = -i W sum_m c_2m beta_{n-2m}
    (n+1) beta_{n+1}  = -i (d beta_n + W sum_m c_2m alpha_{n-2m})

with ``W`` the drive rate and ``d`` the detuning rate (``hbar`` folded in).
The rate matrix is entire, so the recurrence is well defined to any order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import mpmath
import numpy as np

from .core import AmplitudePair, InvalidParameterError, SystemParams

#: Orders above this switch to mpmath arithmetic unless told otherwise.
HIGH_PRECISION_ORDER = 100
MIN_RADIUS_ORDER = 20


class TruncatedSeriesError(ArithmeticError):
    """A coefficient overflowed; ``last_valid_order`` is the highest finite order."""

    def __init__(self, last_valid_order: int):
        super().__init__(f"coefficients overflow beyond order {last_valid_order}")
        self.last_valid_order = last_valid_order


class SeriesOverflowError(ArithmeticError):
    """The partial sum at the requested time is not finite."""


class InsufficientOrderError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SeriesSolution:
    params: SystemParams
    order: int
    coeffs_a11: np.ndarray
    coeffs_a12: np.ndarray
    radius_estimate: Optional[float] = None

    @property
    def high_precision(self) -> bool:
        return self.coeffs_a11.dtype == object


@dataclass(frozen=True)
class SeriesValue(AmplitudePair):
    """Partial sums at one time; ``converged`` flags a negligible tail."""

    converged: bool = True


def _recurrence(params: SystemParams, order: int, one, zero, j, factor):
    w, drive, det = params.omega, params.drive_rate, params.detuning_rate
    cos_c = [zero] * (order + 1)
    c = one
    for m in range(0, order // 2 + 1):
        cos_c[2 * m] = c
        c = -c * w * w / factor((2 * m + 1) * (2 * m + 2))
    alpha = [zero] * (order + 1)
    beta = [zero] * (order + 1)
    alpha[0] = one
    for n in range(order):
        sa = zero
        sb = zero
        for k in range(0, n + 1, 2):
            sa += cos_c[k] * beta[n - k]
            sb += cos_c[k] * alpha[n - k]
        alpha[n + 1] = -j * drive * sa / factor(n + 1)
        beta[n + 1] = -j * (det * beta[n] + drive * sb) / factor(n + 1)
    return alpha, beta


def taylor_coefficients(
    params: SystemParams,
    order: int,
    *,
    dps: Optional[int] = None,
    estimate_radius: bool = True,
) -> SeriesSolution:
    """Coefficients ``alpha_n, beta_n`` for ``n = 0..order``.

    Parameters
    ----------
    dps : int, optional
        Decimal digits for mpmath arithmetic.  Defaults to double precision
        for ``order <= 100`` and 50 digits above that; high-precision
        coefficients are stored as ``mpc`` objects.
    estimate_radius : bool
        Attach :func:`radius_estimate` when ``order >= 20``.
    """
    if order < 1:
        raise InvalidParameterError(f"order must be >= 1, got {order}")
    if dps is None and order > HIGH_PRECISION_ORDER:
        dps = 50

    if dps is None:
        with np.errstate(over="ignore", invalid="ignore"):
            alpha, beta = _recurrence(params, order, 1.0 + 0j, 0j, 1j, float)
        alpha = np.array(alpha, dtype=complex)
        beta = np.array(beta, dtype=complex)
        finite = np.isfinite(alpha) & np.isfinite(beta)
        if not finite.all():
            raise TruncatedSeriesError(int(np.argmin(finite)) - 1)
    else:
        with mpmath.workdps(dps):
            alpha, beta = _recurrence(
                params, order, mpmath.mpc(1), mpmath.mpc(0), mpmath.mpc(0, 1), mpmath.mpf
            )
        alpha = np.array(alpha, dtype=object)
        beta = np.array(beta, dtype=object)

    sol = SeriesSolution(params, order, alpha, beta)
    if estimate_radius and order >= MIN_RADIUS_ORDER:
        sol = SeriesSolution(params, order, alpha, beta, radius_estimate(sol))
    return sol


def _horner(coeffs, t):
    acc = coeffs[-1] * 0
    for c in coeffs[::-1]:
        acc = acc * t + c
    return acc


def evaluate_series(sol: SeriesSolution, t: float) -> SeriesValue:
    """Partial sums at ``t`` via Horner's rule.

    ``converged`` is true when the last two retained terms (two, because
    parity can zero every other coefficient) are below ``1e-12`` of the
    partial sums' size.
    """
    a11 = complex(_horner(sol.coeffs_a11, t))
    a12 = complex(_horner(sol.coeffs_a12, t))
    if not (np.isfinite(a11) and np.isfinite(a12)):
        raise SeriesOverflowError(f"partial sum is not finite at t = {t!r}")
    n = sol.order
    tail = max(
        abs(complex(c)) * abs(t) ** k
        for k in (n - 1, n)
        for c in (sol.coeffs_a11[k], sol.coeffs_a12[k])
    )
    scale = max(abs(a11), abs(a12), np.finfo(float).tiny)
    return SeriesValue(a11, a12, converged=bool(tail < 1e-12 * scale))


def radius_estimate(sol: SeriesSolution) -> float:
    """Cauchy-Hadamard estimate ``1 / limsup |kappa_n|^(1/n)``, in time units.

    ``kappa_n = max(|alpha_n|, |beta_n|)`` over the last half of the retained
    orders, and the limsup is taken as the maximum over that tail.  Returns
    ``math.inf`` when the tail is identically zero or when the root-test
    sequence falls off at least like ``n^(-1/2)`` in a log-log fit, the
    signature of an entire function of finite order at most 2.  Slower decay
    cannot be told apart from a finite radius at finite order and is reported
    as finite.
    """
    if sol.order < MIN_RADIUS_ORDER:
        raise InsufficientOrderError(
            f"radius estimate needs order >= {MIN_RADIUS_ORDER}, got {sol.order}"
        )
    ns, logs = [], []
    for n in range(max(1, sol.order // 2), sol.order + 1):
        kappa = max(abs(sol.coeffs_a11[n]), abs(sol.coeffs_a12[n]))
        if kappa > 0:
            ns.append(n)
            logs.append(float(mpmath.log(kappa)) / n)
    if not ns:
        return math.inf
    root = np.exp(np.array(logs))
    if len(ns) >= 3:
        slope = np.polyfit(np.log(ns), np.log(root), 1)[0]
        if slope <= -0.5:
            return math.inf
    return float(1.0 / root.max())


def coefficient_rows(sol: SeriesSolution):
    """Rows ``(n, re_alpha, im_alpha, re_beta, im_beta)`` for CSV output."""
    for n in range(sol.order + 1):
        a = complex(sol.coeffs_a11[n])
        b = complex(sol.coeffs_a12[n])
        yield n, a.real, a.imag, b.real, b.imag
