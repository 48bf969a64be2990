import numpy as np
import pytest

from omcache.detection import (
    DetectorModel,
    count_class,
    detect_photon_number,
    fock_network_unitary,
    number_decomposition,
    optical_scatter,
)
from omcache.errors import NonUnitary
from omcache.fock import ModeRegistry, PureState


def _bs_matrix():
    return np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)


def test_hong_ou_mandel_dip():
    # |1,1> into a 50/50 splitter: coincidences vanish, bunching is 1/2 each
    reg = ModeRegistry([("u", 3), ("v", 3)])
    amps = np.zeros(reg.size)
    amps[reg.basis_index((1, 1))] = 1.0
    out = optical_scatter(PureState(reg, amps), _bs_matrix(), ["u", "v"])
    probs = {
        occ: abs(a) ** 2
        for occ, a in zip(
            [reg.occupations(i) for i in range(reg.size)], out.amplitudes
        )
        if abs(a) > 1e-12
    }
    assert probs[(2, 0)] == pytest.approx(0.5)
    assert probs[(0, 2)] == pytest.approx(0.5)
    assert (1, 1) not in probs


def test_single_photon_splits_evenly():
    reg = ModeRegistry([("u", 2), ("v", 2)])
    amps = np.zeros(reg.size)
    amps[reg.basis_index((1, 0))] = 1.0
    out = optical_scatter(PureState(reg, amps), _bs_matrix(), ["u", "v"])
    assert abs(out.amplitudes[reg.basis_index((1, 0))]) ** 2 == pytest.approx(0.5)
    assert abs(out.amplitudes[reg.basis_index((0, 1))]) ** 2 == pytest.approx(0.5)


def test_scatter_rejects_nonunitary():
    reg = ModeRegistry([("u", 2), ("v", 2)])
    amps = np.zeros(reg.size)
    amps[0] = 1.0
    bad = np.array([[1.0, 0.0], [0.0, 0.5]])
    with pytest.raises(NonUnitary):
        optical_scatter(PureState(reg, amps), bad, ["u", "v"])


def test_network_unitary_preserves_norm():
    reg = ModeRegistry([("u", 3), ("v", 3)])
    sub, u = fock_network_unitary(reg, _bs_matrix(), ["u", "v"])
    np.testing.assert_allclose(u @ u.conj().T, np.eye(sub.size), atol=1e-12)


def test_observe_kernel_rows_are_distributions():
    d = DetectorModel(efficiency=0.7, dark_prob=0.01)
    o = d.observe_kernel(4)
    np.testing.assert_allclose(o.sum(axis=1), np.ones(5), atol=1e-12)
    # one incident photon: P(see 1) = eta(1-pd) + (1-eta)pd... single dark max
    assert o[1, 1] == pytest.approx(0.7 * 0.99 + 0.3 * 0.01)
    assert o[0, 1] == pytest.approx(0.01)


def test_number_decomposition_probabilities():
    reg = ModeRegistry([("u", 3), ("b", 2)])
    amps = np.zeros(reg.size)
    amps[reg.basis_index((1, 0))] = np.sqrt(0.3)
    amps[reg.basis_index((0, 1))] = np.sqrt(0.7)
    sectors = number_decomposition(PureState(reg, amps), ["u"])
    p = {counts: prob for counts, prob, _ in sectors}
    assert p[(1,)] == pytest.approx(0.3)
    assert p[(0,)] == pytest.approx(0.7)


def test_detect_photon_number_ideal_heralds_partner_mode():
    # photon-number-correlated pair: clicking 1 on the optical mode leaves
    # the partner in |1> exactly
    reg = ModeRegistry([("u", 3), ("b", 3)])
    amps = np.zeros(reg.size)
    amps[reg.basis_index((0, 0))] = np.sqrt(0.8)
    amps[reg.basis_index((1, 1))] = np.sqrt(0.2)
    outs = detect_photon_number(PureState(reg, amps), ["u"])
    by_counts = {o.counts: o for o in outs}
    assert by_counts[(1,)].probability == pytest.approx(0.2)
    pops = by_counts[(1,)].post_state.mode_populations("b")
    assert pops[1] == pytest.approx(1.0)


def test_detect_photon_number_total_probability_with_loss_and_dark():
    reg = ModeRegistry([("u", 4), ("b", 2)])
    amps = np.zeros(reg.size)
    amps[reg.basis_index((2, 1))] = 1.0
    det = DetectorModel(efficiency=0.8, dark_prob=0.02)
    outs = detect_photon_number(PureState(reg, amps), ["u"], det)
    total = sum(o.probability for o in outs)
    assert total == pytest.approx(1.0, abs=1e-12)
    # two photons through eta=0.8 with possible dark count
    p0 = 0.2**2 * 0.98
    by_counts = {o.counts: o.probability for o in outs}
    assert by_counts[(0,)] == pytest.approx(p0, rel=1e-12)


def test_count_class_collapses_multis():
    assert count_class(0) == 0
    assert count_class(1) == 1
    assert count_class(2) == "many"
    assert count_class(7) == "many"
