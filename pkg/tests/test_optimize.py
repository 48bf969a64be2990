"""Design optimization: total-fidelity budget maximization and minimum g0."""

import pytest

from omcache.constants import TWO_PI
from omcache.errors import Infeasible, InvalidState, NoCrossing
from omcache.multiplex import FidelityBudget
from omcache.optimize import (
    FreeParams,
    GivenParams,
    evaluate_total_fidelity,
    maximize_fidelity,
    min_g0,
)

GIVEN = GivenParams(g0=TWO_PI * 1e3, eta_d=0.99, n_th=1e-3, N=10)


def test_params_validation():
    with pytest.raises(InvalidState):
        GivenParams(g0=0.0, eta_d=0.99, n_th=1e-3, N=10)
    with pytest.raises(InvalidState):
        GivenParams(g0=TWO_PI * 1e3, eta_d=0.0, n_th=1e-3, N=10)
    with pytest.raises(InvalidState):
        GivenParams(g0=TWO_PI * 1e3, eta_d=0.99, n_th=-1.0, N=10)
    with pytest.raises(InvalidState):
        GivenParams(g0=TWO_PI * 1e3, eta_d=0.99, n_th=1e-3, N=0)
    with pytest.raises(InvalidState):
        FreeParams(kappa_ex=TWO_PI * 1e8, p1=0.3, T_init=1e-6)
    with pytest.raises(InvalidState):
        FreeParams(kappa_ex=-1.0, p1=0.01, T_init=1e-6)
    with pytest.raises(InvalidState):
        FreeParams(kappa_ex=TWO_PI * 1e8, p1=0.01, T_init=0.0)


def test_maximize_deterministic_and_grid_independent():
    a = maximize_fidelity(GIVEN, points_per_decade=8)
    b = maximize_fidelity(GIVEN, points_per_decade=8)
    assert a.f_tot == b.f_tot and a.free == b.free
    # refinement converges to the same optimum from a coarser grid
    c = maximize_fidelity(GIVEN, points_per_decade=20)
    assert a.f_tot == pytest.approx(c.f_tot, rel=1e-9)
    assert a.f_tot == pytest.approx(0.9898215119359206, rel=1e-9)
    assert a.diagnostics["grid_evaluations"] > 0


def test_result_budget_reproducible_from_free_point():
    res = maximize_fidelity(GIVEN, points_per_decade=8)
    budget = evaluate_total_fidelity(GIVEN, res.free)
    assert isinstance(budget, FidelityBudget)
    assert budget.f_tot == pytest.approx(res.f_tot, rel=1e-12)
    for name in ("f_init", "f_hsp", "f_idle", "eta_re"):
        assert 0.0 < getattr(budget, name) <= 1.0


def test_pinned_kappa_ex_mode():
    free = maximize_fidelity(GIVEN, points_per_decade=8)
    pinned = maximize_fidelity(
        GIVEN, points_per_decade=8, kappa_ex=free.free.kappa_ex
    )
    assert pinned.free.kappa_ex == free.free.kappa_ex
    assert pinned.f_tot == pytest.approx(free.f_tot, rel=1e-9)
    # pinning away from the optimum can only do worse
    off = maximize_fidelity(
        GIVEN, points_per_decade=8, kappa_ex=free.free.kappa_ex / 4.0
    )
    assert off.f_tot < free.f_tot
    with pytest.raises(InvalidState):
        maximize_fidelity(GIVEN, kappa_ex=-1.0)


def test_infeasible_device():
    # kappa_int alone already kills sideband resolution: no feasible point
    bad = GivenParams(
        g0=TWO_PI * 1e3, eta_d=0.99, n_th=1e-3, N=10, mech_freq=TWO_PI * 1e6
    )
    with pytest.raises(Infeasible):
        maximize_fidelity(bad, points_per_decade=6)


def test_evaluate_infeasible_point():
    # external coupling so large the cavity swallows the mechanical sideband
    with pytest.raises(Infeasible):
        evaluate_total_fidelity(
            GIVEN, FreeParams(kappa_ex=TWO_PI * 50e9, p1=0.01, T_init=1e-6)
        )


def test_min_g0_frozen():
    res = min_g0(0.99, 1e-3, 10, points_per_decade=6)
    assert res.g0 / TWO_PI == pytest.approx(1016.3067925859785, rel=1e-6)
    assert res.at_crossing.f_tot >= 0.99
    lo, hi = res.bracket
    assert hi / lo <= 1.02**2 + 1e-12
    assert lo <= res.g0 * 1.02 <= hi
    assert res.evaluations >= 3


def test_min_g0_edge_cases():
    with pytest.raises(NoCrossing):
        min_g0(0.99, 1e-3, 10, target_fidelity=0.99999, points_per_decade=6)
    with pytest.raises(InvalidState):
        min_g0(0.99, 1e-3, 10, target_fidelity=1.0)
    free_ride = min_g0(0.99, 1e-3, 10, target_fidelity=0.0, points_per_decade=6)
    assert free_ride.g0 == free_ride.bracket[0]


def test_squeeze_time_roundtrip():
    from omcache.dynamics import DrivePulse, pump_photon_number, squeeze_population
    from omcache.optimize import _squeeze_time
    from omcache.params import load_preset

    s = load_preset("target").system
    pump = pump_photon_number(
        s, DrivePulse(175e-6, 1.0, shape="constant", carrier_role="blue")
    )
    for n_bar in (1e-3, 0.05, 0.5):
        t = _squeeze_time(s, pump, n_bar)
        assert squeeze_population(s, pump, t) == pytest.approx(n_bar, rel=1e-9)
    assert _squeeze_time(s, pump, 0.0) == 0.0
