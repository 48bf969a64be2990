import numpy as np
import pytest

from omcache.fock import DensityMatrix, ModeRegistry, PureState, make_thermal_state
from omcache.lindblad import (
    LindbladSpec,
    evolve,
    evolve_counting,
    liouvillian_matrix,
)


def _decay_spec(reg, kappa):
    a = reg.destroy("a")
    return LindbladSpec(reg, hamiltonian_terms=[], collapse_terms=[(kappa, a)])


def test_single_mode_decay_rate():
    reg = ModeRegistry([("a", 4)])
    kappa = 2.0
    spec = _decay_spec(reg, kappa)
    psi = PureState(reg, np.array([0.0, 1.0, 0.0, 0.0]))
    times = np.linspace(0.0, 1.5, 7)[1:]
    res = evolve(spec, psi, times)
    n_op = reg.number("a")
    np.testing.assert_allclose(
        res.expect(n_op), np.exp(-kappa * times), rtol=1e-6
    )


def test_thermal_steady_state():
    # damped mode in thermal contact relaxes to Bose occupation n_th
    reg = ModeRegistry([("a", 18)])
    a, ad = reg.destroy("a"), reg.create("a")
    gamma, n_th = 1.0, 0.8
    spec = LindbladSpec(
        reg,
        collapse_terms=[(gamma * (n_th + 1.0), a), (gamma * n_th, ad)],
    )
    vac = np.zeros(reg.size)
    vac[0] = 1.0
    res = evolve(spec, PureState(reg, vac), [25.0])
    assert res.final.mean_occupation("a") == pytest.approx(n_th, rel=1e-4)


def test_rabi_oscillation_under_swap_hamiltonian():
    # H = g (a b' + a' b): excitation swaps at frequency g
    reg = ModeRegistry([("a", 3), ("b", 3)])
    g = 3.0
    a, b = reg.destroy("a"), reg.destroy("b")
    h = g * (a @ b.conj().T + a.conj().T @ b)
    spec = LindbladSpec(reg, hamiltonian_terms=[(1.0, h)])
    amps = np.zeros(reg.size)
    amps[reg.basis_index((1, 0))] = 1.0
    times = np.linspace(0.01, 2.0, 9)
    res = evolve(spec, PureState(reg, amps), times)
    np.testing.assert_allclose(
        res.expect(reg.number("a")), np.cos(g * times) ** 2, atol=1e-7
    )


def test_eig_propagator_matches_ode():
    reg = ModeRegistry([("a", 16)])
    spec = _decay_spec(reg, 1.3)
    rho0 = make_thermal_state(reg, "a", 0.5)
    t = [0.7]
    ode = evolve(spec, rho0, t, method="dop853").final
    eig = evolve(spec, rho0, t, method="eig").final
    np.testing.assert_allclose(ode.matrix, eig.matrix, atol=1e-8)


def test_liouvillian_matrix_action():
    reg = ModeRegistry([("a", 3)])
    spec = _decay_spec(reg, 0.9)
    lmat = liouvillian_matrix(spec)
    rho = np.diag([0.6, 0.3, 0.1]).astype(complex)
    # L acting on vec(rho) must equal the dissipator applied directly
    a = reg.destroy("a")
    direct = 0.9 * (
        a @ rho @ a.conj().T
        - 0.5 * (a.conj().T @ a @ rho + rho @ a.conj().T @ a)
    )
    np.testing.assert_allclose(
        (lmat @ rho.reshape(-1)).reshape(3, 3), direct, atol=1e-12
    )


def test_counting_resolves_emission_number():
    # pure decay from |2>: P(n emissions by t) follows the two-step cascade
    reg = ModeRegistry([("a", 3)])
    kappa = 1.0
    a = reg.destroy("a")
    spec = LindbladSpec(reg)
    psi = np.zeros(3)
    psi[2] = 1.0
    res = evolve_counting(
        spec, PureState(reg, psi), [(kappa, a)], n_max=2, times=[0.8]
    )
    p = res.probabilities[-1]
    t = 0.8
    # |2> decays at 2k; the cascade 2->1->0 gives these closed forms
    p2_surv = np.exp(-2 * kappa * t)
    p1 = 2 * np.exp(-kappa * t) * (1 - np.exp(-kappa * t))
    assert p[0] == pytest.approx(p2_surv, abs=1e-7)
    assert p[1] == pytest.approx(p1, abs=1e-7)
    assert p[2] == pytest.approx(1 - p2_surv - p1, abs=1e-7)
    assert res.overflow[-1] == pytest.approx(0.0, abs=1e-9)


def test_trace_preservation_flags():
    reg = ModeRegistry([("a", 12)])
    spec = _decay_spec(reg, 1.0)
    rho0 = make_thermal_state(reg, "a", 0.2)
    res = evolve(spec, rho0, [0.5, 1.0])
    for s in res:
        assert s.trace() == pytest.approx(1.0, abs=1e-7)
