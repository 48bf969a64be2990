"""Scheduling statistics for N parallel heralded sources, plus qubit lifetimes.

Closed forms for the distribution of the last-to-herald cycle, the fidelity
lost to idling while the slowest source catches up, and the total fidelity
budget; a seeded Monte Carlo cross-check; and numerically extracted dual-rail
lifetime scales (leakage, bit-flip, phase-flip).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidState, TruncationError
from .fock import ModeRegistry
from .lindblad import LindbladSpec, liouvillian_matrix

_FLIP_THRESHOLD = 1.0 / (2.0 * np.e)


@dataclass(frozen=True)
class ScheduleParams:
    """One batch of N identical sources retried every T_h until all herald."""

    N: int
    p_hsp: float
    T_h: float  # s per heralding cycle
    Gamma: float = 0.0  # rad/s acoustic decay
    n_th: float = 0.0

    def __post_init__(self):
        if self.N < 1:
            raise InvalidState("N must be >= 1")
        if not 0.0 < self.p_hsp <= 1.0:
            raise InvalidState("p_hsp must lie in (0, 1]")
        if self.T_h <= 0.0:
            raise InvalidState("T_h must be positive")
        if self.Gamma < 0.0 or self.n_th < 0.0:
            raise InvalidState("Gamma and n_th must be >= 0")


def herald_cdf(m, s):
    """P(all N sources have heralded by cycle m) = (1-(1-p)^m)^N."""
    m_arr = np.asarray(m)
    if np.any(m_arr < 0):
        raise InvalidState("cycle index must be >= 0")
    out = (1.0 - (1.0 - s.p_hsp) ** m_arr) ** s.N
    return float(out) if out.ndim == 0 else out


def max_cycle_inclusion_exclusion(n, p):
    """Exact E[max of n geometrics]: sum_k C(n,k)(-1)^(k+1)/(1-(1-p)^k).

    Evaluated in exact rational arithmetic; the alternating binomial terms
    reach ~1e14 by n = 50 and would cancel catastrophically in floats.
    """
    q = 1 - Fraction(p)
    total = Fraction(0)
    qk = Fraction(1)
    for k in range(1, n + 1):
        qk *= q
        term = Fraction(comb(n, k)) / (1 - qk)
        total = total + term if k % 2 else total - term
    return float(total)


def expected_max_cycle(s):
    """(M_bar, m_bar): expected last-herald cycle and per-source mean 1/p.

    M_bar = sum_{M>=0} (1 - CDF(M)), truncated with the analytic tail bound
    N q^M/(1-q) once it is below 1e-10 of the running sum; for very small p
    (expected M beyond ~5e6 cycles) the equivalent Euler-Maclaurin limit
    H_N/lambda + 1/2 is used, which is far inside the same tolerance there.
    """
    p, n = s.p_hsp, s.N
    m_bar = 1.0 / p
    if p == 1.0:
        return 1.0, 1.0
    lam = -np.log1p(-p)
    harmonic = np.sum(1.0 / np.arange(1, n + 1))
    if harmonic / lam > 5e6:
        return float(harmonic / lam + 0.5), m_bar
    if n <= 64:
        # the exact-rational closed form beats summing the survival series
        return max_cycle_inclusion_exclusion(n, p), m_bar
    q = 1.0 - p
    total = 0.0
    m0 = 0
    chunk = 65536
    while True:
        m_vals = np.arange(m0, m0 + chunk, dtype=float)
        total += np.sum(1.0 - (1.0 - q**m_vals) ** n)
        m0 += chunk
        tail_bound = n * q**m0 / (1.0 - q)
        if tail_bound < 1e-10 * total:
            return float(total), m_bar


def idling_rate(gamma, n_th):
    """(total, loss part, heating part) of the single-phonon idle decay rate.

    Total (3 n_th + 1) Gamma splits into (n_th + 1) Gamma (phonon loss) and
    2 n_th Gamma (thermal-occupation growth mixing in wrong-number states).
    """
    return (3.0 * n_th + 1.0) * gamma, (n_th + 1.0) * gamma, 2.0 * n_th * gamma


def idling_fidelity(s):
    """Average fidelity factor from waiting for the slowest source.

    exp(-(3 n_th + 1) Gamma (M_bar - m_bar) T_h): each source idles from its
    own herald cycle to the batch's last one.
    """
    rate, _, _ = idling_rate(s.Gamma, s.n_th)
    if rate == 0.0:
        return 1.0
    m_big, m_small = expected_max_cycle(s)
    return float(np.exp(-rate * (m_big - m_small) * s.T_h))


@dataclass(frozen=True)
class FidelityBudget:
    """Multiplicative single-photon fidelity budget."""

    f_init: float
    f_hsp: float
    f_idle: float
    eta_re: float

    @property
    def f_tot(self):
        return self.f_init * self.f_hsp * self.f_idle * self.eta_re


def total_fidelity(f_init, f_hsp, f_idle, eta_re):
    """Bundle the four fidelity factors; F_tot is their product."""
    budget = FidelityBudget(f_init=f_init, f_hsp=f_hsp, f_idle=f_idle,
                            eta_re=eta_re)
    for name in ("f_init", "f_hsp", "f_idle", "eta_re"):
        v = getattr(budget, name)
        if not 0.0 <= v <= 1.0:
            raise InvalidState(f"{name} = {v} outside [0, 1]")
    return budget


# ---------------------------------------------------------------------------
# Monte Carlo cross-check


@dataclass(frozen=True)
class MonteCarloSchedule:
    trials: int
    seed: int
    mean_max_cycle: float
    stderr_max_cycle: float
    mean_idle_cycles: float  # per source, averaged over the batch
    stderr_idle_cycles: float
    decay_mean: float  # mean over sources of exp(-rate * idle * T_h)
    decay_stderr: float
    cdf_cycles: np.ndarray = field(repr=False)  # M = 1 .. observed max
    cdf_values: np.ndarray = field(repr=False)


def monte_carlo_schedule(s, trials, seed):
    """Sample the batch schedule; bit-reproducible for a given seed.

    Each trial draws N geometric herald cycles by inverse CDF from a
    counter-based generator, so results do not depend on chunking.  Reports
    the empirical distribution of the last-herald cycle M, per-source idle
    cycles, and the per-source decay factor exp(-rate*idle*T_h) whose mean
    upper-bounds the closed-form idling_fidelity (Jensen).
    """
    trials = int(trials)
    if trials < 1:
        raise InvalidState("trials must be >= 1")
    if trials * s.N > 1e8:
        raise InvalidState("trials * N > 1e8; reduce one of them")
    rng = np.random.Generator(np.random.Philox(key=seed))
    rate, _, _ = idling_rate(s.Gamma, s.n_th)

    max_sum = max_sq = 0.0
    idle_sum = idle_sq = 0.0
    decay_sum = decay_sq = 0.0
    counts = {}
    done = 0
    chunk = max(1, int(2e6) // s.N)
    log_q = np.log1p(-s.p_hsp)
    while done < trials:
        rows = min(chunk, trials - done)
        u = rng.random((rows, s.N))
        if s.p_hsp == 1.0:
            m = np.ones((rows, s.N))
        else:
            m = np.floor(np.log1p(-u) / log_q) + 1.0
        m_max = m.max(axis=1)
        idle = m_max[:, None] - m
        idle_trial = idle.mean(axis=1)
        decay_trial = np.exp(-rate * idle * s.T_h).mean(axis=1)

        max_sum += m_max.sum()
        max_sq += (m_max**2).sum()
        idle_sum += idle_trial.sum()
        idle_sq += (idle_trial**2).sum()
        decay_sum += decay_trial.sum()
        decay_sq += (decay_trial**2).sum()
        vals, cnts = np.unique(m_max.astype(np.int64), return_counts=True)
        for v, c in zip(vals, cnts):
            counts[int(v)] = counts.get(int(v), 0) + int(c)
        done += rows

    def _mean_stderr(total, total_sq):
        mean = total / trials
        var = max(total_sq / trials - mean**2, 0.0)
        return mean, np.sqrt(var / trials)

    mean_max, se_max = _mean_stderr(max_sum, max_sq)
    mean_idle, se_idle = _mean_stderr(idle_sum, idle_sq)
    mean_dec, se_dec = _mean_stderr(decay_sum, decay_sq)
    m_hi = max(counts)
    pmf = np.zeros(m_hi + 1)
    for v, c in counts.items():
        pmf[v] = c
    cdf = np.cumsum(pmf)[1:] / trials
    return MonteCarloSchedule(
        trials=trials,
        seed=seed,
        mean_max_cycle=mean_max,
        stderr_max_cycle=se_max,
        mean_idle_cycles=mean_idle,
        stderr_idle_cycles=se_idle,
        decay_mean=mean_dec,
        decay_stderr=se_dec,
        cdf_cycles=np.arange(1, m_hi + 1),
        cdf_values=cdf,
    )


# ---------------------------------------------------------------------------
# dual-rail lifetimes


@dataclass(frozen=True)
class DualRailRates:
    """Lifetime scales of a dual-rail phonon qubit under thermal contact."""

    tau_leak: float  # s, leaves the {|10>, |01>} subspace
    tau_X: float  # s, conditional flip probability from |+_L> reaches 1/2e
    tau_Z: float  # s, same threshold from |0_L>
    bias: float  # tau_X / tau_Z (nan when both are infinite at n_th = 0)


class _ThermalPair:
    """Two independent thermally damped modes; propagate rho = Phi_t x Phi_t.

    Because the two rails never interact, the channel factorizes and only the
    single-mode Liouvillian (dim^2 x dim^2) is ever diagonalized.  Density
    matrices are handled as (d, d, d, d) tensors indexed [i1, i2, j1, j2]
    (ket indices first), matching the C-order vec convention of
    ``liouvillian_matrix``.
    """

    def __init__(self, gamma, n_th, dim):
        self.dim = dim
        reg = ModeRegistry([("b", dim)])
        b = reg.destroy("b")
        spec = LindbladSpec(
            reg,
            collapse_terms=[(gamma * (n_th + 1.0), b), (gamma * n_th, b.conj().T)],
        )
        lv = liouvillian_matrix(spec)
        self._evals, vr = np.linalg.eig(lv)
        self._vr = vr
        self._vr_inv = np.linalg.inv(vr)

    def channel(self, t):
        return (self._vr * np.exp(self._evals * t)) @ self._vr_inv

    def propagate(self, rho0, t):
        d = self.dim
        ch = self.channel(t).reshape(d, d, d, d)  # [i', j', i, j]
        # mode 1: rho1[i1',i2,j1',j2] = ch[i1',j1',i1,j1] rho[i1,i2,j1,j2]
        out = np.einsum("aAbB,bcBd->acAd", ch, rho0)
        # mode 2: rho2[i1,i2',j1,j2'] = ch[i2',j2',i2,j2] rho1[i1,i2,j1,j2]
        out = np.einsum("aAbB,cbCB->caCA", ch, out)
        return out


def _minus_weight(rho_t):
    """<-_L| rho |-_L> with |-_L> = (|10> - |01>)/sqrt(2)."""
    return 0.5 * np.real(
        rho_t[1, 0, 1, 0] + rho_t[0, 1, 0, 1]
        - rho_t[1, 0, 0, 1] - rho_t[0, 1, 1, 0]
    )


def _swapped_weight(rho_t):
    """<01| rho |01>: the phonon moved to the other rail."""
    return np.real(rho_t[0, 1, 0, 1])


def _conditional_flip(pair, rho0, t, flip_weight):
    rho_t = pair.propagate(rho0, t)
    d = pair.dim
    top = np.real(
        sum(rho_t[d - 1, k, d - 1, k] + rho_t[k, d - 1, k, d - 1]
            for k in range(d))
    )
    if top > 1e-4:
        raise TruncationError("rail truncation too small for this n_th and t")
    p_sub = np.real(rho_t[1, 0, 1, 0] + rho_t[0, 1, 0, 1])
    return flip_weight(rho_t) / p_sub, p_sub


def _rail_dim(n_th):
    return int(min(12, max(4, 4 + np.ceil(2.5 * n_th))))


def _plus_logical_rho(dim):
    psi = np.zeros((dim, dim), dtype=complex)
    psi[1, 0] = psi[0, 1] = 1.0 / np.sqrt(2.0)
    return np.einsum("ab,cd->abcd", psi, psi.conj())


def _zero_logical_rho(dim):
    # |0_L> = |10>: rail 1 holds the phonon
    rho = np.zeros((dim, dim, dim, dim), dtype=complex)
    rho[1, 0, 1, 0] = 1.0
    return rho


def dual_rail_survival(gamma, n_th, t, dim=None):
    """P(still inside the dual-rail subspace) at time t, from |+_L>."""
    if dim is None:
        dim = _rail_dim(n_th)
    pair = _ThermalPair(gamma, n_th, dim)
    _, p_sub = _conditional_flip(pair, _plus_logical_rho(dim), t, _minus_weight)
    return p_sub


def _threshold_time(pair, rho0, flip_weight, gamma, n_th):
    def f(t):
        p, _ = _conditional_flip(pair, rho0, t, flip_weight)
        return p - _FLIP_THRESHOLD

    t_hi = 0.05 / (gamma * max(n_th, 1e-3))
    for _ in range(60):
        if f(t_hi) > 0.0:
            break
        t_hi *= 2.0
    else:  # pragma: no cover
        raise InvalidState("flip probability never reaches 1/2e")
    return brentq(f, 0.0, t_hi, rtol=1e-6, xtol=1e-30 + 1e-9 * t_hi)


def dual_rail_lifetimes(gamma, n_th, dim=None):
    """Leakage, bit-flip, and phase-flip lifetime scales of a dual-rail qubit.

    tau_leak = 1/((4 n_th + 1) Gamma) in closed form (rates (n_th+1)Gamma +
    n_th Gamma + 2 n_th Gamma across the two rails).  tau_X and tau_Z come
    from the two-rail thermal Lindblad evolution: the time at which the
    conditional flip probability, given the state is still in the dual-rail
    subspace, reaches 1/2e — from |+_L> (weight on |-_L>) for tau_X and from
    |0_L> (weight on the swapped rail) for tau_Z.  At n_th = 0 flips cannot
    occur and both are +inf.
    """
    if gamma <= 0.0:
        raise InvalidState("Gamma must be positive")
    if n_th < 0.0:
        raise InvalidState("n_th must be >= 0")
    tau_leak = 1.0 / ((4.0 * n_th + 1.0) * gamma)
    if n_th == 0.0:
        return DualRailRates(tau_leak=tau_leak, tau_X=np.inf, tau_Z=np.inf,
                             bias=np.nan)
    if dim is None:
        dim = _rail_dim(n_th)
    for d_try in (dim, min(dim + 4, 14)):
        pair = _ThermalPair(gamma, n_th, d_try)
        try:
            tau_x = _threshold_time(
                pair, _plus_logical_rho(d_try), _minus_weight, gamma, n_th
            )
            tau_z = _threshold_time(
                pair, _zero_logical_rho(d_try), _swapped_weight, gamma, n_th
            )
            break
        except TruncationError:
            if d_try >= 14:
                raise
    return DualRailRates(tau_leak=tau_leak, tau_X=tau_x, tau_Z=tau_z,
                         bias=tau_x / tau_z)
