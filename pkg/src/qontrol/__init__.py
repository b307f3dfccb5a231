"""Driven nearly degenerate two-state systems: closed forms, integration and control metrics."""

from .analytic import degenerate_amplitudes, degenerate_probability_transfer, degenerate_trajectory
from .core import (
    AmplitudePair,
    InvalidParameterError,
    SystemParams,
    TimeGrid,
    Trajectory,
    control_coupling,
    default_step,
    make_params,
    photon_energy,
    probabilities,
)
from .dynamics import (
    DivergenceError,
    DivergencePolicy,
    EquationForm,
    GuardExceededError,
    IntegrationMethod,
    derivative_first_order,
    derivative_second_order,
    integrate,
    unitarity_defect_series,
)
from .metrics import (
    DurationPoint,
    EffectSeries,
    FitResult,
    SimConfig,
    control_duration,
    default_workers,
    duration_sweep,
    effect_series,
    fit_effect,
    nondegeneracy_effect,
    numerical_error_series,
    scaling_exponent,
)
from .series import SeriesSolution, evaluate_series, radius_estimate, taylor_coefficients

__version__ = "0.1.0"
