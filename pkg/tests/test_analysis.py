from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import zeta

from srpolymer.analysis import (
    MonteCarloPressure,
    Pressure,
    ScalingFit,
    classify_regime,
    clt_calibration,
    clt_test,
    coupling_sum_bound,
    coupling_sum_ratios,
    extrapolated_second_derivative,
    fit_gamma,
    pressure,
    pressure_curve,
    pressure_second_derivative,
    richardson_second_difference,
)
from srpolymer.couplings import CouplingSpec
from srpolymer.errors import ParameterError
from srpolymer.montecarlo import McmcPlan
from srpolymer.polymer import PolymerParams, endpoint_projection_moments, tilted_log_moment

LR = CouplingSpec.power_law(1.5)


def test_coupling_sum_values():
    assert coupling_sum_bound(2.0, 2) == 1.0
    assert coupling_sum_bound(2.0, 3) == 2.25
    with pytest.raises(ParameterError):
        coupling_sum_bound(0.9, 10)


def test_coupling_sum_matches_double_loop():
    for n in (1, 5, 17):
        brute = sum((j - i) ** -1.7 for i in range(n) for j in range(i + 1, n))
        assert coupling_sum_bound(1.7, n) == pytest.approx(brute, rel=1e-13)


def test_coupling_sum_ratio_bound():
    r = coupling_sum_ratios(1.5, 100_000)
    assert np.all(np.diff(r) >= 0)
    assert r[-1] < zeta(1.5) < 2.6124
    assert r[-1] == pytest.approx(coupling_sum_bound(1.5, 100_000) / 100_000, rel=1e-12)


def test_fit_gamma_exact_power_laws():
    ns = np.array([16, 32, 64, 128, 256], dtype=float)
    f1 = fit_gamma([(n, n, 0.0) for n in ns])
    assert f1.gamma_hat == pytest.approx(1.0, abs=1e-12) and f1.gamma_stderr < 1e-10
    assert classify_regime(f1) == "diffusive"
    f2 = fit_gamma([(n, n * n, 0.0) for n in ns])
    assert f2.gamma_hat == pytest.approx(2.0, abs=1e-12)
    assert classify_regime(f2) == "ballistic"
    f3 = fit_gamma([(n, 3 * n**1.5, 0.01 * n**1.5) for n in ns[:4]])
    assert f3.gamma_hat == pytest.approx(1.5, abs=1e-8)
    assert f3.intercept == pytest.approx(math.log(3), abs=1e-8)
    assert classify_regime(f3) == "superdiffusive"


def test_fit_gamma_rejects_degenerate():
    with pytest.raises(ParameterError):
        fit_gamma([(16, 16, 1), (32, 32, 1)])
    with pytest.raises(ParameterError):
        fit_gamma([(16, 16, 1), (16, 16, 1), (32, 32, 1)])


def test_classify_inconclusive_when_interval_straddles():
    fit = ScalingFit(1.2, 0.1, 0.0, 1.0, 5)
    assert classify_regime(fit) not in ("diffusive", "superdiffusive")


def test_pressure_examples():
    p = PolymerParams(6, 1.0, (1.0, 0.0), LR)
    assert pressure(p, (1.0, 0.0), 0.0) == pytest.approx(0.0, abs=1e-14)
    direct = tilted_log_moment(p, (1.0, 0.0), 0.1) / 6
    assert pressure(p, (1.0, 0.0), 0.1) == pytest.approx(direct, abs=1e-10)
    assert pressure_second_derivative(p, (0.0, 0.0)) == 0.0


def test_pressure_symmetric_without_drift():
    p = PolymerParams(8, 1.3, (0.0, 0.0), LR)
    for t in (0.1, 0.4):
        assert pressure(p, (0.7, -0.3), t) == pytest.approx(pressure(p, (0.7, -0.3), -t), abs=1e-12)


def test_pressure_beyond_walk_cap():
    # chains enumerate to N=20 even though walks stop at 10
    p = PolymerParams(16, 0.8, (0.3, 0.1), LR)
    assert math.isfinite(pressure(p, (1.0, 1.0), 0.2))
    with pytest.raises(Exception):
        pressure(PolymerParams(21, 0.8, (0.3, 0.1), LR), (1.0, 1.0), 0.2)


def test_pressure_nn_uses_transfer_matrix():
    p = PolymerParams(300, 1.0, (1.0, 0.0), CouplingSpec.nearest_neighbor(1.0))
    assert math.isfinite(pressure(p, (1.0, 0.0), 0.1))


@pytest.mark.parametrize("v", [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0)])
def test_variance_identity(v):
    p = PolymerParams(6, 1.0, (1.0, 0.0), LR)
    _, var = endpoint_projection_moments(p, v)
    assert abs(pressure_second_derivative(p, v) - var / 6) < 1e-6


def test_variance_scales_as_beta_squared():
    # at beta=1e-6 the t-differences sit at rounding level, so only the limit is checked there
    assert abs(pressure_second_derivative(PolymerParams(5, 1e-6, (0.0, 0.0), LR), (1.0, 0.0))) < 1e-9
    for beta in (1e-3, 2e-3):
        d2 = pressure_second_derivative(PolymerParams(5, beta, (0.0, 0.0), LR), (1.0, 0.0))
        assert d2 / beta**2 == pytest.approx(0.5, rel=1e-2)


def test_richardson_on_polynomial_and_exp():
    assert richardson_second_difference(lambda t: t**4 - 3 * t**2, 0.3, 0.05) == pytest.approx(12 * 0.09 - 6, abs=1e-10)
    assert richardson_second_difference(math.exp, 0.0, 0.1) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=15, deadline=None)
@given(beta=st.floats(0.1, 2.0), hx=st.floats(-1, 1), vx=st.floats(-1, 1), vy=st.floats(-1, 1))
def test_pressure_is_convex(beta, hx, vx, vy):
    curve = pressure_curve(PolymerParams(6, beta, (hx, 0.2), LR), (vx, vy), np.linspace(-1, 1, 21))
    assert np.all(np.diff(curve.psi_values, 2) >= -1e-12)


def test_extrapolated_second_derivative_runs():
    val = extrapolated_second_derivative(1.0, (1.0, 0.0), (1.0, 0.0), LR, math.inf, n_points=(8, 9))
    assert math.isfinite(val)


def test_monte_carlo_pressure_matches_exact_small_n():
    p = PolymerParams(8, 1.0, (0.5, 0.0), LR)
    mc = MonteCarloPressure(p, (1.0, 0.0), McmcPlan(41_000, 1000, seed=2), nodes=4)
    mean, var = endpoint_projection_moments(p, (1.0, 0.0))
    assert mc.mean_projection() == pytest.approx(p.beta * mean, rel=0.02)
    assert mc.second_derivative(0.0) == pytest.approx(Pressure(p, (1.0, 0.0)).second_derivative(0.0), rel=0.1)


def test_clt_calibration_rate():
    assert abs(clt_calibration(100, 2000, 0.05, 1.0, seed=0) - 0.05) <= 0.03


def test_clt_degenerate_samples_rejected():
    res = clt_test(np.full(1000, 0.3), 1.0)
    assert res.p_value < 1e-10 and res.ks_statistic > 0.5


def test_clt_small_sample_refused():
    with pytest.raises(ParameterError):
        clt_test(np.zeros(10), 1.0)


def test_clt_lattice_correction():
    rng = np.random.default_rng(3)
    x = np.round(rng.normal(0, 4.0, 4000))  # integer lattice, variance 16 + ~1/12
    assert clt_test(x, 16.0).p_value < 1e-3
    assert clt_test(x, 16.0, lattice_spacing=1.0, seed=1).p_value > 0.01
