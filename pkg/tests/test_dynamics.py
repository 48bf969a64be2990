"""Pump photon number, cooling/squeezing dynamics, retrieval, duration solvers."""

import warnings

import numpy as np
import pytest

from omcache.constants import TWO_PI
from omcache.errors import (
    InvalidState,
    StrongCouplingRegime,
    Unreachable,
    WeakCouplingViolation,
)
from omcache.params import DrivePulse, SystemParams, load_preset
from omcache import dynamics as dyn

TARGET = load_preset("target")
NEAR = load_preset("near_term")
MW = DrivePulse(power=1e-3, duration=10e-9, shape="constant")


def _quiet(fn, *a, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", WeakCouplingViolation)
        return fn(*a, **kw)


def test_pump_photon_number_frozen():
    at = dyn.pump_photon_number(TARGET.system, MW)
    an = dyn.pump_photon_number(NEAR.system, MW)
    assert at.alpha_sq == pytest.approx(4973158.180842759, rel=1e-10)
    assert an.alpha_sq == pytest.approx(97571471.81633443, rel=1e-10)
    assert at.alpha == pytest.approx(np.sqrt(at.alpha_sq), rel=1e-12)
    assert at.steady_state and at.stiff_pump
    # steady-state photon number is linear in drive power
    half = dyn.pump_photon_number(
        TARGET.system, DrivePulse(power=0.5e-3, duration=10e-9, shape="constant")
    )
    assert half.alpha_sq == pytest.approx(at.alpha_sq / 2.0, rel=1e-10)


def test_optical_damping_frozen():
    s = TARGET.system
    at = dyn.pump_photon_number(s, MW)
    g_opt, coop = _quiet(dyn.optical_damping, s, at.alpha)
    assert g_opt / TWO_PI == pytest.approx(198926327.23371038, rel=1e-10)
    assert coop == pytest.approx(19892632.723371036, rel=1e-10)
    assert g_opt == pytest.approx(coop * s.gamma, rel=1e-12)
    an = dyn.pump_photon_number(NEAR.system, MW)
    _, coop_n = _quiet(dyn.optical_damping, NEAR.system, an.alpha)
    assert coop_n == pytest.approx(156114.35490613506, rel=1e-10)


def test_cooled_population_frozen():
    s = TARGET.system
    at = dyn.pump_photon_number(s, MW)
    n_ss = _quiet(dyn.cooled_population, s, at.alpha)
    assert n_ss == pytest.approx(1.8536014687528302e-7, rel=1e-10)
    _, coop = _quiet(dyn.optical_damping, s, at.alpha)
    assert n_ss == pytest.approx(s.n_thermal() / (coop + 1.0), rel=1e-12)
    an = dyn.pump_photon_number(NEAR.system, MW)
    assert _quiet(dyn.cooled_population, NEAR.system, an.alpha) == pytest.approx(
        1.7497238179150636e-5, rel=1e-10
    )


def test_weak_coupling_threshold():
    thr_t = dyn.weak_coupling_power_threshold(TARGET.system)
    thr_n = dyn.weak_coupling_power_threshold(NEAR.system)
    assert thr_t == pytest.approx(0.001256746673386702, rel=1e-10)
    assert thr_n == pytest.approx(0.0016013902126445346, rel=1e-10)
    # at the threshold power the pump sits exactly at g0*alpha = kappa/4
    s = TARGET.system
    amp = dyn.pump_photon_number(
        s, DrivePulse(power=thr_t, duration=1e-9, shape="constant")
    )
    assert s.g0 * amp.alpha / s.kappa == pytest.approx(0.25, rel=1e-9)


def test_strong_coupling_warning():
    s = TARGET.system
    hot = dyn.pump_photon_number(
        s, DrivePulse(power=2e-3, duration=1e-9, shape="constant")
    )
    with pytest.warns(WeakCouplingViolation):
        dyn.optical_damping(s, hot.alpha)
    ok = dyn.pump_photon_number(s, MW)
    with warnings.catch_warnings():
        warnings.simplefilter("error", WeakCouplingViolation)
        dyn.optical_damping(s, ok.alpha)  # 1 mW stays below threshold


def test_cooling_durations_frozen():
    s, ns = TARGET.system, NEAR.system
    d1 = dyn.solve_pulse_duration(s, 1e-3, target_population=1e-3, n_init=s.n_thermal())
    d2 = dyn.solve_pulse_duration(s, 1e-3, target_population=1e-3, n_init=0.06)
    assert d1 * 1e9 == pytest.approx(5.38804211548213, rel=1e-6)
    assert d2 * 1e9 == pytest.approx(2.9550738356769592, rel=1e-6)
    # near-term: population for 0.99 ground-state fidelity, 1/(1+n) = 0.99
    pop = 0.01 / 0.99
    d3 = dyn.solve_pulse_duration(ns, 1e-3, target_population=pop, n_init=ns.n_thermal())
    d4 = dyn.solve_pulse_duration(ns, 1e-3, target_population=pop, n_init=0.06)
    assert d3 * 1e9 == pytest.approx(102.38774177263096, rel=1e-6)
    assert d4 * 1e9 == pytest.approx(38.56059305618148, rel=1e-6)


def test_cooling_solver_and_trajectory_agree():
    s = TARGET.system
    d = dyn.solve_pulse_duration(s, 1e-3, target_population=1e-3, n_init=s.n_thermal())
    pulse = DrivePulse(power=1e-3, duration=d)
    traj = _quiet(dyn.cooling_trajectory, s, pulse, s.n_thermal())
    assert traj(0.0) == pytest.approx(s.n_thermal(), rel=1e-12)
    assert traj(d) == pytest.approx(1e-3, rel=1e-2)  # solver bisects to 1e-4 on d
    samples = traj(np.linspace(0.2e-9, d, 30))
    assert np.all(np.diff(samples) < 0)  # monotone cooling below threshold
    with pytest.raises(InvalidState):
        traj(-1e-9)


def test_rate_model_is_the_adiabatic_exponential():
    ns = NEAR.system
    pulse = DrivePulse(power=1e-3, duration=96e-9, shape="constant")
    amp = dyn.pump_photon_number(ns, pulse)
    g_opt, coop = _quiet(dyn.optical_damping, ns, amp.alpha)
    n_th = ns.n_thermal()
    n_ss = n_th / (coop + 1.0)
    traj = _quiet(dyn.cooling_trajectory, ns, pulse, 2.0, model="rate")
    for t in (5e-9, 30e-9, 96e-9):
        exact = n_ss + (2.0 - n_ss) * np.exp(-(g_opt + ns.gamma) * t)
        assert traj(t) == pytest.approx(exact, rel=1e-9)


def test_moment_model_matches_swap_envelope():
    # Gamma*t ~ 3e-7 over the pulse, so the Gamma-free closed form applies
    s = TARGET.system
    pulse = DrivePulse(power=1e-3, duration=6e-9, shape="constant")
    amp = dyn.pump_photon_number(s, pulse)
    traj = _quiet(dyn.cooling_trajectory, s, pulse, 1.0, n_th=0.0)
    for t in (0.5e-9, 2e-9, 5e-9):
        nb, na = dyn.swap_populations(s, amp.alpha, t, 1.0)
        st = traj.state(t)
        assert st[0] == pytest.approx(nb, rel=1e-5)
        assert st[1] == pytest.approx(na, rel=1e-5)


def test_swap_populations_shapes_and_guards():
    s = TARGET.system
    nb0, na0 = dyn.swap_populations(s, 100.0, 0.0, 0.7)
    assert nb0 == pytest.approx(0.7) and na0 == 0.0
    nb, na = dyn.swap_populations(s, 1000.0, np.array([0.0, 1e-9, 2e-9]), 1.0)
    assert nb.shape == na.shape == (3,)
    assert np.all(nb + na <= 1.0 + 1e-12)  # the rest leaks out through kappa
    with pytest.raises(StrongCouplingRegime):
        dyn.swap_populations(s, 1e5, 1e-9, 1.0)
    with pytest.raises(InvalidState):
        dyn.swap_populations(s, 100.0, -1e-9, 1.0)


def test_squeeze_population_sinh_limit():
    # with kappa and Gamma negligible the growth is exactly sinh^2(g alpha t)
    s0 = SystemParams(
        kappa_int=5e-7, kappa_ex=5e-7, mech_freq=1e3, gamma=1e-12,
        g0=1.0, g_herald=1.0, carrier_freq=1e6,
    )
    for gt in (0.5, 1.3, 2.0):
        assert dyn.squeeze_population(s0, 1.0, gt) == pytest.approx(
            np.sinh(gt) ** 2, rel=1e-5
        )


def test_squeeze_population_log_domain_long_time():
    # weak blue drive, kappa*t/4 = 2000: naive cosh overflows, answer is ~0.22
    s = TARGET.system
    alpha = 0.01 * s.kappa / 4.0 / s.g_herald
    t = 8000.0 / s.kappa
    n = dyn.squeeze_population(s, alpha, t)
    assert np.isfinite(n)
    g_t = np.sqrt((s.g_herald * alpha) ** 2 + (s.kappa / 4.0) ** 2)
    assert n == pytest.approx(np.expm1(2.0 * t * (g_t - s.kappa / 4.0)), rel=1e-3)


def test_squeeze_trajectory_vs_closed_form():
    # pulse longer than 10/kappa so the quasi-static pump branch applies,
    # matching the constant-alpha assumption of the closed form
    s = TARGET.system
    bp = DrivePulse(power=175e-6, duration=3e-9, shape="constant", carrier_role="blue")
    alpha = dyn.pump_photon_number(s, bp).alpha
    traj = _quiet(dyn.squeeze_trajectory, s, bp, n_init=0.0, n_th=0.0)
    for t in (0.5e-9, 1.5e-9, 3e-9):
        assert traj(t) == pytest.approx(dyn.squeeze_population(s, alpha, t), rel=1e-5)
    with pytest.raises(InvalidState):
        dyn.squeeze_trajectory(s, DrivePulse(power=1e-6, duration=1e-9), n_init=0.0)


def test_pair_distribution_moments():
    p = dyn.pair_distribution(0.25)
    k = np.arange(0, 60)
    pk = p(k)
    assert pk.sum() == pytest.approx(1.0, abs=1e-12)
    mean = (k * pk).sum()
    var = ((k - mean) ** 2 * pk).sum()
    assert mean == pytest.approx(0.25, rel=1e-12)
    assert var == pytest.approx(0.25 * 1.25, rel=1e-12)  # n(n+1) for geometric
    assert p(-1) == 0.0
    p0 = dyn.pair_distribution(0.0)
    assert p0(0) == 1.0 and p0(3) == 0.0
    with pytest.raises(InvalidState):
        dyn.pair_distribution(-0.1)


def test_retrieval_probability_frozen():
    s, ns = TARGET.system, NEAR.system
    p1 = dyn.retrieval_probability(s, DrivePulse(power=0.5e-3, duration=1.18e-9))
    p2 = dyn.retrieval_probability(ns, DrivePulse(power=0.2e-3, duration=70e-9))
    assert p1 == pytest.approx(0.3744168300343119, rel=1e-8)
    assert p2 == pytest.approx(0.46934854733636905, rel=1e-8)
    # collected-port efficiency is eta_ex times the any-port probability
    eff = dyn.retrieval_efficiency(ns, NEAR.drives["retrieve"])
    assert eff == pytest.approx(0.9652928679507501, rel=1e-8)
    p_any = dyn.retrieval_probability(ns, NEAR.drives["retrieve"])
    assert eff == pytest.approx(ns.eta_ex * p_any, rel=1e-12)
    assert dyn.retrieval_probability(s, DrivePulse(power=0.0, duration=1e-9)) == 0.0


def test_retrieval_window_extends_past_pulse():
    # ring-down: widening the window beyond the default 20/kappa adds little
    s = TARGET.system
    pulse = DrivePulse(power=0.5e-3, duration=1.18e-9)
    base = dyn.retrieval_probability(s, pulse)
    wide = dyn.retrieval_probability(s, pulse, t_re=pulse.duration + 40.0 / s.kappa)
    assert wide >= base
    assert wide - base < 1e-6
    with pytest.raises(InvalidState):
        dyn.retrieval_probability(s, pulse, t_re=0.5 * pulse.duration)


def test_retrieval_duration_solver_frozen():
    s = TARGET.system
    expected = {0.25e-3: 21.61507559609677, 0.5e-3: 10.338571242818142,
                1e-3: 4.617623480880404}
    for power, d_ns in expected.items():
        d = dyn.solve_pulse_duration(s, power, target_efficiency=0.998)
        assert d * 1e9 == pytest.approx(d_ns, rel=1e-6)
        # round-trip: the solved pulse really delivers the efficiency
        eff = dyn.retrieval_efficiency(s, DrivePulse(power=power, duration=d))
        assert eff == pytest.approx(0.998, rel=2e-4)


def test_retrieval_strong_coupling_raises():
    with pytest.raises(StrongCouplingRegime):
        dyn.solve_pulse_duration(TARGET.system, 2e-3, target_p_re=0.9)


def test_solver_argument_validation():
    s = TARGET.system
    with pytest.raises(InvalidState):
        dyn.solve_pulse_duration(s, 1e-3)
    with pytest.raises(InvalidState):
        dyn.solve_pulse_duration(s, 1e-3, target_population=1e-3, target_p_re=0.5)
    with pytest.raises(InvalidState):
        dyn.solve_pulse_duration(s, -1e-3, target_population=1e-3)
    # already at or past the target: zero-length pulse
    assert dyn.solve_pulse_duration(s, 1e-3, target_population=0.1, n_init=0.05) == 0.0
    with pytest.raises(Unreachable):
        dyn.solve_pulse_duration(s, 1e-3, target_population=1e-9, n_init=1.0)
