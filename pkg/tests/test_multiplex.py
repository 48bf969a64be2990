"""Batch heralding schedule statistics and dual-rail idle lifetimes."""

import numpy as np
import pytest

from omcache.constants import TWO_PI
from omcache.errors import InvalidState
from omcache.multiplex import (
    FidelityBudget,
    ScheduleParams,
    dual_rail_lifetimes,
    dual_rail_survival,
    expected_max_cycle,
    herald_cdf,
    idling_fidelity,
    idling_rate,
    max_cycle_inclusion_exclusion,
    monte_carlo_schedule,
    total_fidelity,
)


def test_schedule_params_validation():
    with pytest.raises(InvalidState):
        ScheduleParams(N=0, p_hsp=0.5, T_h=1e-6)
    with pytest.raises(InvalidState):
        ScheduleParams(N=2, p_hsp=0.0, T_h=1e-6)
    with pytest.raises(InvalidState):
        ScheduleParams(N=2, p_hsp=1.1, T_h=1e-6)
    with pytest.raises(InvalidState):
        ScheduleParams(N=2, p_hsp=0.5, T_h=0.0)
    with pytest.raises(InvalidState):
        ScheduleParams(N=2, p_hsp=0.5, T_h=1e-6, n_th=-0.1)


def test_herald_cdf():
    s = ScheduleParams(N=2, p_hsp=0.5, T_h=1e-6)
    assert herald_cdf(2, s) == pytest.approx(0.5625, abs=1e-15)
    assert herald_cdf(0, s) == 0.0
    vals = herald_cdf(np.arange(0, 30), s)
    assert vals.shape == (30,)
    assert np.all(np.diff(vals) > 0) and vals[-1] == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(InvalidState):
        herald_cdf(-1, s)


def test_expected_max_cycle_frozen():
    m_big, m_small = expected_max_cycle(ScheduleParams(N=2, p_hsp=0.5, T_h=1e-6))
    assert m_big == pytest.approx(8.0 / 3.0, rel=1e-14)  # exact rational path
    assert m_small == 2.0
    m_big, m_small = expected_max_cycle(ScheduleParams(N=100, p_hsp=0.01, T_h=1e-6))
    assert m_big == pytest.approx(516.639718438601, rel=1e-10)  # series path
    assert m_small == 100.0
    assert expected_max_cycle(ScheduleParams(N=5, p_hsp=1.0, T_h=1e-6)) == (1.0, 1.0)


def test_inclusion_exclusion_matches_survival_series():
    # the alternating-binomial closed form against the plain survival sum
    for n in (2, 10, 50):
        for p in (0.01, 0.1, 0.5):
            q = 1.0 - p
            m = np.arange(0, 6000, dtype=float)
            series = np.sum(1.0 - (1.0 - q**m) ** n)
            assert max_cycle_inclusion_exclusion(n, p) == pytest.approx(
                series, rel=1e-11
            )


def test_tiny_p_switches_to_asymptotic_form():
    # harmonic/lambda + 1/2 limit agrees with the exact rational value
    s = ScheduleParams(N=10, p_hsp=1e-7, T_h=1.0)
    em, _ = expected_max_cycle(s)
    assert em == pytest.approx(max_cycle_inclusion_exclusion(10, 1e-7), rel=1e-12)


def test_expected_max_bounds():
    for n, p in ((1, 0.1), (10, 0.01), (100, 0.5)):
        m_big, m_small = expected_max_cycle(ScheduleParams(N=n, p_hsp=p, T_h=1.0))
        assert m_small <= m_big + 1e-12
        assert m_big <= n / p


def test_idling_rate_split():
    total, loss, heat = idling_rate(1.0, 0.5)
    assert (total, loss, heat) == (2.5, 1.5, 1.0)
    assert total == pytest.approx(loss + heat, rel=1e-15)
    assert idling_rate(2.0, 0.0) == (2.0, 2.0, 0.0)


def test_idling_fidelity():
    cold = ScheduleParams(N=10, p_hsp=0.1, T_h=1e-6)
    assert idling_fidelity(cold) == 1.0  # Gamma = 0: no decay while waiting
    s = ScheduleParams(N=10, p_hsp=0.1, T_h=1e-6, Gamma=TWO_PI * 10, n_th=0.1)
    m_big, m_small = expected_max_cycle(s)
    rate = (3 * 0.1 + 1) * TWO_PI * 10
    expect = np.exp(-rate * (m_big - m_small) * 1e-6)
    assert idling_fidelity(s) == pytest.approx(expect, rel=1e-12)
    hotter = ScheduleParams(N=10, p_hsp=0.1, T_h=1e-6, Gamma=TWO_PI * 10, n_th=0.5)
    assert idling_fidelity(hotter) < idling_fidelity(s)


def test_total_fidelity_budget():
    b = total_fidelity(0.999, 0.9995, 0.998, 0.998)
    assert isinstance(b, FidelityBudget)
    assert b.f_tot == pytest.approx(0.999 * 0.9995 * 0.998 * 0.998, rel=1e-15)
    with pytest.raises(InvalidState):
        total_fidelity(1.001, 0.9, 0.9, 0.9)
    with pytest.raises(InvalidState):
        total_fidelity(0.9, 0.9, -0.1, 0.9)


def test_monte_carlo_matches_closed_forms():
    s = ScheduleParams(N=10, p_hsp=0.1, T_h=1e-6, Gamma=TWO_PI * 10, n_th=0.1)
    mc = monte_carlo_schedule(s, trials=200_000, seed=7)
    m_big, m_small = expected_max_cycle(s)
    assert abs(mc.mean_max_cycle - m_big) < 3.0 * mc.stderr_max_cycle
    assert abs(mc.mean_idle_cycles - (m_big - m_small)) < 3.0 * mc.stderr_idle_cycles
    # Jensen: averaging exp(-rate*idle) over sources sits above the closed
    # form, which exponentiates the averaged idle time
    assert mc.decay_mean > idling_fidelity(s) - 3.0 * mc.decay_stderr
    # empirical CDF against (1-(1-p)^m)^N at a few cycles
    for m in (10, 30, 60):
        f = herald_cdf(m, s)
        sigma = np.sqrt(f * (1.0 - f) / mc.trials)
        assert abs(mc.cdf_values[m - 1] - f) < 4.0 * sigma + 1e-12
    assert mc.cdf_values[-1] == pytest.approx(1.0, abs=1e-12)


def test_monte_carlo_deterministic():
    s = ScheduleParams(N=4, p_hsp=0.3, T_h=1e-6)
    a = monte_carlo_schedule(s, trials=5000, seed=42)
    b = monte_carlo_schedule(s, trials=5000, seed=42)
    c = monte_carlo_schedule(s, trials=5000, seed=43)
    assert a.mean_max_cycle == b.mean_max_cycle
    assert a.decay_mean == b.decay_mean
    assert np.array_equal(a.cdf_values, b.cdf_values)
    assert a.mean_max_cycle != c.mean_max_cycle


def test_monte_carlo_guards():
    s = ScheduleParams(N=1000, p_hsp=0.1, T_h=1e-6)
    with pytest.raises(InvalidState):
        monte_carlo_schedule(s, trials=200_000, seed=1)  # trials*N over cap
    with pytest.raises(InvalidState):
        monte_carlo_schedule(s, trials=0, seed=1)


def test_dual_rail_lifetimes_frozen():
    g = TWO_PI * 10.0
    for n_th, tau_x in ((0.01, 0.054539337013987506),
                        (0.1, 0.023649248325609742),
                        (1.0, 0.006034545390664672)):
        r = dual_rail_lifetimes(g, n_th)
        assert r.tau_leak == pytest.approx(1.0 / ((4 * n_th + 1) * g), rel=1e-14)
        assert r.tau_X == pytest.approx(tau_x, rel=1e-5)
        # thermal hopping is rail-symmetric: no X/Z bias
        assert r.bias == pytest.approx(1.0, abs=1e-6)


def test_dual_rail_zero_temperature():
    g = TWO_PI * 10.0
    r = dual_rail_lifetimes(g, 0.0)
    assert r.tau_leak == pytest.approx(1.0 / g, rel=1e-14)
    assert np.isinf(r.tau_X) and np.isinf(r.tau_Z)
    with pytest.raises(InvalidState):
        dual_rail_lifetimes(0.0, 0.1)
    with pytest.raises(InvalidState):
        dual_rail_lifetimes(g, -0.5)


def test_dual_rail_survival_initial_decay():
    g = TWO_PI * 10.0
    assert dual_rail_survival(g, 0.1, 0.0) == pytest.approx(1.0, abs=1e-12)
    # at n_th = 0 the subspace only loses population: exactly exp(-Gamma t)
    for t in (0.005, 0.02):
        assert dual_rail_survival(g, 0.0, t) == pytest.approx(
            np.exp(-g * t), rel=1e-8
        )
    # early-time slope reproduces 1/tau_leak; later the refill flattens it
    n_th = 0.1
    tau = 1.0 / ((4 * n_th + 1) * g)
    t = 0.05 * tau
    tau_est = -t / np.log(dual_rail_survival(g, n_th, t, dim=10))
    assert tau_est == pytest.approx(tau, rel=0.02)
    assert dual_rail_survival(g, n_th, tau, dim=10) > np.exp(-1.0)
