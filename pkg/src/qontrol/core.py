"""Domain types and unit conventions for the driven two-state system.

Internally everything runs in natural units with ``hbar = 1`` and, unless a
caller says otherwise, ``period = 1``.  Energies are then angular
frequencies and times are fractions of the driving period.

Rate conventions
----------------
The coupling ``H12`` enters the amplitude equations through a *drive rate*.
Two readings are supported:

``"cyclic"`` (default)
    ``H12 / hbar`` is a cyclic frequency, so the drive rate is
    ``2*pi*H12/hbar``.  The degenerate closed form
    ``a11 = cos[(H12/hbar) T sin(2 pi t / T)]`` is then the exact solution and
    the control condition ``H12 T / hbar = pi/2`` gives full transfer at
    ``t = T/4``.
``"angular"``
    ``H12 / hbar`` is used as the drive rate verbatim.  The degenerate phase
    amplitude becomes ``(H12/hbar) T / (2 pi)`` and the control condition
    only reaches ``p2 = sin(1/4)**2 ~ 0.061`` at ``T/4``.

The detuning ``delta_e / hbar`` is the same under both conventions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

CONVENTIONS = ("cyclic", "angular")

#: Default integration step, in units of hbar / H12.
DEFAULT_STEP_IN_HBAR_OVER_H12 = 1e-5


class InvalidParameterError(ValueError):
    """Raised when a physical or numerical parameter is out of range."""


def _check_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise InvalidParameterError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class SystemParams:
    """Driving period, coupling and level splitting of the two-state system.

    Parameters
    ----------
    period : float
        Driving period ``T``.
    coupling : float
        Interaction matrix element ``H12`` (energy).
    delta_e : float
        Level splitting ``E2 - E1`` with ``E1 = 0``.
    hbar : float
        Reduced Planck constant, 1 in natural units.
    convention : {"cyclic", "angular"}
        How ``H12 / hbar`` becomes a drive rate; see the module docstring.
    """

    period: float
    coupling: float
    delta_e: float = 0.0
    hbar: float = 1.0
    convention: str = "cyclic"

    def __post_init__(self):
        for name in ("period", "coupling", "delta_e", "hbar"):
            _check_finite(name, getattr(self, name))
        if self.period <= 0:
            raise InvalidParameterError(f"period must be positive, got {self.period}")
        if self.hbar <= 0:
            raise InvalidParameterError(f"hbar must be positive, got {self.hbar}")
        if self.coupling < 0:
            raise InvalidParameterError(f"coupling must be >= 0, got {self.coupling}")
        if self.delta_e < 0:
            raise InvalidParameterError(f"delta_e must be >= 0, got {self.delta_e}")
        if self.convention not in CONVENTIONS:
            raise InvalidParameterError(
                f"convention must be one of {CONVENTIONS}, got {self.convention!r}"
            )

    @property
    def photon_energy(self) -> float:
        return photon_energy(self)

    @property
    def omega(self) -> float:
        """Angular frequency of the drive, ``2 pi / T``."""
        return 2.0 * math.pi / self.period

    @property
    def drive_rate(self) -> float:
        """Amplitude of the ``cos(omega t)`` coupling term in the rate equations."""
        rate = self.coupling / self.hbar
        if self.convention == "cyclic":
            rate *= 2.0 * math.pi
        return rate

    @property
    def detuning_rate(self) -> float:
        return self.delta_e / self.hbar

    @property
    def pulse_area(self) -> float:
        """Phase amplitude of the degenerate solution, ``drive_rate / omega``."""
        return self.drive_rate / self.omega

    @property
    def delta_e_over_E(self) -> float:
        return self.delta_e / self.photon_energy

    @property
    def control_product(self) -> float:
        """``H12 T / hbar``; equals pi/2 under the control condition."""
        return self.coupling * self.period / self.hbar


def control_coupling(period: float, hbar: float = 1.0) -> float:
    """Coupling satisfying ``H12 T / hbar = pi/2`` (equivalently ``H12 = E/4``)."""
    return math.pi * hbar / (2.0 * period)


def make_params(
    period: float = 1.0,
    delta_e_over_E: float = 0.0,
    coupling_override: Optional[float] = None,
    *,
    hbar: float = 1.0,
    convention: str = "cyclic",
) -> SystemParams:
    """Build parameters from a splitting expressed as a fraction of the photon energy.

    The coupling defaults to the control condition unless ``coupling_override``
    is given.
    """
    _check_finite("period", period)
    _check_finite("delta_e_over_E", delta_e_over_E)
    if period <= 0:
        raise InvalidParameterError(f"period must be positive, got {period}")
    if hbar <= 0:
        raise InvalidParameterError(f"hbar must be positive, got {hbar}")
    if delta_e_over_E < 0:
        raise InvalidParameterError(f"delta_e_over_E must be >= 0, got {delta_e_over_E}")
    if coupling_override is None:
        coupling = control_coupling(period, hbar)
    else:
        _check_finite("coupling_override", coupling_override)
        if coupling_override < 0:
            raise InvalidParameterError(
                f"coupling_override must be >= 0, got {coupling_override}"
            )
        coupling = float(coupling_override)
    energy = 2.0 * math.pi * hbar / period
    return SystemParams(
        period=float(period),
        coupling=coupling,
        delta_e=delta_e_over_E * energy,
        hbar=float(hbar),
        convention=convention,
    )


def photon_energy(params: SystemParams) -> float:
    """Photon energy ``E = h / T = 2 pi hbar / T``."""
    return 2.0 * math.pi * params.hbar / params.period


def default_step(params: SystemParams) -> float:
    """Fixed step of ``1e-5 hbar / H12``; falls back to ``1e-5 T`` without coupling."""
    if params.coupling > 0:
        return DEFAULT_STEP_IN_HBAR_OVER_H12 * params.hbar / params.coupling
    return DEFAULT_STEP_IN_HBAR_OVER_H12 * params.period


@dataclass(frozen=True)
class AmplitudePair:
    """Complex amplitudes of the two states at one instant."""

    a11: complex
    a12: complex

    @property
    def probabilities(self) -> tuple[float, float]:
        return probabilities(self)


def probabilities(pair: AmplitudePair) -> tuple[float, float]:
    """Occupation probabilities ``(|a11|^2, |a12|^2)``."""
    return abs(pair.a11) ** 2, abs(pair.a12) ** 2


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_start + k*dt`` for ``k = 0..n_steps``.

    ``n_steps = round((t_end - t_start) / dt)``, so the last sample sits within
    ``dt/2`` of ``t_end``.  The step is used exactly as given; the grid is not
    stretched to land on ``t_end``.
    """

    t_end: float
    dt: float
    t_start: float = 0.0

    def __post_init__(self):
        for name in ("t_start", "t_end", "dt"):
            _check_finite(name, getattr(self, name))
        if self.dt <= 0:
            raise InvalidParameterError(f"dt must be positive, got {self.dt}")
        if self.t_end <= self.t_start:
            raise InvalidParameterError("t_end must exceed t_start")
        if self.n_steps < 1:
            raise InvalidParameterError("grid must contain at least one step")

    @property
    def n_steps(self) -> int:
        return int(round((self.t_end - self.t_start) / self.dt))

    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_steps + 1)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled amplitudes with their unitarity defect.

    The amplitudes are held as two complex arrays parallel to ``times``.
    ``unitarity_defect`` is ``| |a11|^2 + |a12|^2 - 1 |`` per sample.
    """

    params: SystemParams
    times: np.ndarray
    a11: np.ndarray
    a12: np.ndarray
    unitarity_defect: np.ndarray = field(default=None)
    diverged_at: Optional[float] = None
    method: str = ""
    form: str = ""

    def __post_init__(self):
        n = len(self.times)
        if len(self.a11) != n or len(self.a12) != n:
            raise InvalidParameterError("amplitude arrays must match the time grid")
        if n > 1 and np.any(np.diff(self.times) <= 0):
            raise InvalidParameterError("times must be strictly increasing")
        if self.unitarity_defect is None:
            object.__setattr__(
                self, "unitarity_defect", np.abs(self.p1 + self.p2 - 1.0)
            )
        if self.diverged_at is not None and not (
            self.times[0] <= self.diverged_at <= self.times[-1]
        ):
            raise InvalidParameterError("diverged_at lies outside the sampled window")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def p1(self) -> np.ndarray:
        return np.abs(self.a11) ** 2

    @property
    def p2(self) -> np.ndarray:
        return np.abs(self.a12) ** 2

    @property
    def t_over_T(self) -> np.ndarray:
        return self.times / self.params.period

    @property
    def amplitudes(self) -> list[AmplitudePair]:
        return [AmplitudePair(complex(x), complex(y)) for x, y in zip(self.a11, self.a12)]

    def pair(self, i: int) -> AmplitudePair:
        return AmplitudePair(complex(self.a11[i]), complex(self.a12[i]))

    def at(self, t: float) -> AmplitudePair:
        """Amplitudes at ``t`` by local cubic interpolation over four samples."""
        times = self.times
        if not times[0] <= t <= times[-1]:
            raise InvalidParameterError(
                f"t={t} outside sampled window [{times[0]}, {times[-1]}]"
            )
        if len(times) < 4:
            return AmplitudePair(
                complex(np.interp(t, times, self.a11.real) + 1j * np.interp(t, times, self.a11.imag)),
                complex(np.interp(t, times, self.a12.real) + 1j * np.interp(t, times, self.a12.imag)),
            )
        k = int(np.searchsorted(times, t))
        lo = min(max(k - 2, 0), len(times) - 4)
        nodes = times[lo : lo + 4]
        weights = np.ones(4)
        for j in range(4):
            for m in range(4):
                if m != j:
                    weights[j] *= (t - nodes[m]) / (nodes[j] - nodes[m])
        return AmplitudePair(
            complex(weights @ self.a11[lo : lo + 4]),
            complex(weights @ self.a12[lo : lo + 4]),
        )

    def head(self, n: int) -> "Trajectory":
        """First ``n`` samples, keeping ``diverged_at`` if it falls inside them."""
        keep = self.diverged_at
        if keep is not None and keep > self.times[n - 1]:
            keep = None
        return Trajectory(
            self.params,
            self.times[:n],
            self.a11[:n],
            self.a12[:n],
            self.unitarity_defect[:n],
            keep,
            self.method,
            self.form,
        )
