import math

import numpy as np
import pytest
from numpy.polynomial import polynomial as P

from qontrol import (
    TimeGrid,
    default_step,
    degenerate_amplitudes,
    evaluate_series,
    integrate,
    make_params,
    radius_estimate,
    taylor_coefficients,
)
from qontrol.series import (
    InsufficientOrderError,
    SeriesOverflowError,
    TruncatedSeriesError,
    coefficient_rows,
)

CONTROL = make_params(1.0, 0.0)


def closed_form(t):
    # the rate equations produce the conjugate of the printed closed form
    pair = degenerate_amplitudes(CONTROL, t)
    return pair.a11, pair.a12.conjugate()


def test_leading_coefficients_literal_coupling():
    sol = taylor_coefficients(make_params(1.0, 0.0, convention="angular"), 5)
    assert sol.coeffs_a11[0] == 1 and sol.coeffs_a12[0] == 0
    assert sol.coeffs_a11[1] == 0
    assert sol.coeffs_a12[1] == pytest.approx(-1j * math.pi / 2)
    assert len(sol.coeffs_a11) == len(sol.coeffs_a12) == 6


def test_leading_coefficients_cyclic_coupling():
    sol = taylor_coefficients(CONTROL, 3)
    assert sol.coeffs_a12[1] == pytest.approx(-1j * math.pi**2)
    assert sol.radius_estimate is None


def test_decoupled_system():
    sol = taylor_coefficients(make_params(1.0, 1.0, coupling_override=0.0), 30)
    np.testing.assert_array_equal(sol.coeffs_a12, 0)
    np.testing.assert_array_equal(sol.coeffs_a11, np.eye(31)[0])
    assert sol.radius_estimate == math.inf


def test_partial_sums_match_closed_form_at_eighth_period():
    sol = taylor_coefficients(CONTROL, 40)
    val = evaluate_series(sol, 0.125)
    a11, a12 = closed_form(0.125)
    assert val.a11 == pytest.approx(a11, abs=1e-10)
    assert val.a12 == pytest.approx(a12, abs=1e-10)


def test_evaluate_at_origin_exact():
    val = evaluate_series(taylor_coefficients(make_params(1.0, 0.4), 50), 0.0)
    assert val.a11 == 1 and val.a12 == 0
    assert val.converged


@pytest.mark.parametrize("order, tol", [(60, 1e-7), (64, 1e-8), (80, 1e-12)])
def test_converges_past_quarter_period_when_degenerate(order, tol):
    # truncation error at 0.3 T: 4.0e-8 (order 60), 4.6e-9 (64), 4.6e-13 (80)
    val = evaluate_series(taylor_coefficients(CONTROL, order), 0.3)
    a11, a12 = closed_form(0.3)
    assert val.a11 == pytest.approx(a11, abs=tol)
    assert val.a12 == pytest.approx(a12, abs=tol)


def test_nondegenerate_probe_is_finite():
    p = make_params(1.0, 0.5)
    val = evaluate_series(taylor_coefficients(p, 60), 0.3)
    assert np.isfinite(val.a11) and np.isfinite(val.a12)


def test_radius_unbounded_without_coupling():
    sol = taylor_coefficients(make_params(1.0, 0.0, coupling_override=0.0), 40)
    assert radius_estimate(sol) == math.inf


def test_radius_exceeds_quarter_period_when_degenerate():
    sol = taylor_coefficients(CONTROL, 80)
    assert sol.radius_estimate > 0.25
    assert radius_estimate(sol) == sol.radius_estimate


def test_radius_reported_for_large_splitting():
    r = taylor_coefficients(make_params(1.0, 0.5), 80).radius_estimate
    assert r > 0


def test_radius_for_entire_exponential():
    # alpha_n = (-i c)^n / n! (exp(-i c t)): root test decays like 1/n
    from qontrol.series import SeriesSolution

    n = np.arange(61)
    alpha = np.array([(-2j) ** k / math.factorial(k) for k in n])
    sol = SeriesSolution(CONTROL, 60, alpha, np.zeros(61, dtype=complex))
    assert radius_estimate(sol) == math.inf


def test_radius_for_geometric_series():
    from qontrol.series import SeriesSolution

    alpha = 0.5 ** -np.arange(41.0) * 1.0 + 0j  # 1 / (1 - t / 0.5)
    sol = SeriesSolution(CONTROL, 40, alpha, np.zeros(41, dtype=complex))
    assert radius_estimate(sol) == pytest.approx(0.5, rel=1e-12)


def test_radius_needs_order():
    sol = taylor_coefficients(CONTROL, 10)
    with pytest.raises(InsufficientOrderError):
        radius_estimate(sol)


@pytest.mark.parametrize("delta", [0.0, 0.3, 1.0])
def test_recurrence_leaves_only_high_degree_residual(delta):
    p = make_params(1.0, delta)
    order = 30
    sol = taylor_coefficients(p, order)
    alpha, beta = sol.coeffs_a11, sol.coeffs_a12
    cos_coeffs = np.zeros(order + 1)
    for m in range(order // 2 + 1):
        cos_coeffs[2 * m] = (-1) ** m * p.omega ** (2 * m) / math.factorial(2 * m)
    w, d = p.drive_rate, p.detuning_rate
    # d/dt of the partial sums minus the right-hand side, degrees 0..order-1
    res1 = P.polyder(alpha) + 1j * w * P.polymul(cos_coeffs, beta)[:order]
    res2 = P.polyder(beta) + 1j * (d * beta[:order] + w * P.polymul(cos_coeffs, alpha)[:order])
    scale = w * max(np.abs(alpha).max(), np.abs(beta).max())
    assert np.abs(res1).max() <= 1e-13 * scale
    assert np.abs(res2).max() <= 1e-13 * scale


def test_agrees_with_integration_inside_radius():
    p = make_params(1.0, 0.3)
    sol = taylor_coefficients(p, 60)
    t_max = 0.8 * sol.radius_estimate
    traj = integrate(p, TimeGrid(t_max + 0.01, default_step(p)))
    for t in np.linspace(0, t_max, 7):
        val, ref = evaluate_series(sol, t), traj.at(t)
        assert val.a11 == pytest.approx(ref.a11, abs=1e-6)
        assert val.a12 == pytest.approx(ref.a12, abs=1e-6)


@pytest.mark.parametrize("t", [0.1, 0.2, 0.3, 0.4])
def test_error_non_increasing_with_order(t):
    a11, a12 = closed_form(t)
    errs = []
    for order in range(40, 81, 10):
        val = evaluate_series(taylor_coefficients(CONTROL, order), t)
        errs.append(max(abs(val.a11 - a11), abs(val.a12 - a12)))
    for prev, nxt in zip(errs, errs[1:]):
        assert nxt <= prev + 1e-12


def test_convergence_flag():
    sol = taylor_coefficients(CONTROL, 40)
    assert evaluate_series(sol, 0.05).converged
    assert not evaluate_series(sol, 0.6).converged


def test_high_precision_mode_agrees_with_double():
    dbl = taylor_coefficients(CONTROL, 60)
    hp = taylor_coefficients(CONTROL, 60, dps=40)
    assert hp.high_precision and not dbl.high_precision
    for a, b in zip(dbl.coeffs_a11, hp.coeffs_a11):
        assert complex(b) == pytest.approx(a, rel=1e-10, abs=1e-30)
    assert complex(evaluate_series(hp, 0.3).a11) == pytest.approx(
        evaluate_series(dbl, 0.3).a11, abs=1e-14
    )


def test_high_order_switches_to_mpmath():
    sol = taylor_coefficients(CONTROL, 120)
    assert sol.high_precision
    assert sol.radius_estimate > 0.25


def test_overflow_reports_last_valid_order():
    p = make_params(1.0, 0.0, coupling_override=1e150)
    with pytest.raises(TruncatedSeriesError) as info:
        taylor_coefficients(p, 10)
    assert info.value.last_valid_order == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_evaluation_overflow():
    sol = taylor_coefficients(CONTROL, 40)
    with pytest.raises(SeriesOverflowError):
        evaluate_series(sol, 1e200)


def test_coefficient_rows():
    rows = list(coefficient_rows(taylor_coefficients(CONTROL, 3)))
    assert rows[0] == (0, 1.0, 0.0, 0.0, 0.0)
    assert rows[1][4] == pytest.approx(-math.pi**2)
    assert len(rows) == 4
