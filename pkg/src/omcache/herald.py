"""Heralding statistics: click probabilities and heralded-state fidelities.

Covers the single-phonon herald (one click on the pair-generation output)
and the n-qubit entangling herald (one click per detector pair), both under
finite detection efficiency and dark counts.  These are small closed forms;
the ``ghz`` module checks them against full Fock-space simulations.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .detection import DetectorModel
from .errors import DarkCountRegime, InvalidP1, InvalidState


@dataclass(frozen=True)
class HeraldModel:
    """Detection chain seen by a herald: efficiency and dark counts.

    ``eta_d`` is the detection-system efficiency (filters, fibers, SNSPD),
    ``eta_ex`` the cavity extraction efficiency kappa_ex/kappa; their product
    ``efficiency`` is the only combination the statistics depend on.  Dark
    counts enter through ``dark_prob = dark_rate * window``.
    """

    eta_d: float
    eta_ex: float
    dark_rate: float = 0.0  # counts/s
    window: float = 0.0  # s

    def __post_init__(self):
        if not 0.0 <= self.eta_d <= 1.0 or not 0.0 <= self.eta_ex <= 1.0:
            raise InvalidState("efficiencies must lie in [0, 1]")
        if self.dark_rate < 0.0 or self.window < 0.0:
            raise InvalidState("dark_rate and window must be >= 0")
        if self.dark_prob >= 1e-2:
            raise InvalidState(
                f"dark probability {self.dark_prob:.3g} per window is outside "
                "the low-dark-count regime (< 1e-2) assumed throughout"
            )

    @classmethod
    def with_dark_prob(cls, eta_d, eta_ex, dark_prob, window=1.0):
        """Build from a per-window dark probability instead of a rate."""
        return cls(eta_d=eta_d, eta_ex=eta_ex, dark_rate=dark_prob / window,
                   window=window)

    @property
    def efficiency(self):
        return self.eta_d * self.eta_ex

    @property
    def dark_prob(self):
        return self.dark_rate * self.window

    def detector(self):
        """Equivalent classical detector for Fock-space simulations."""
        return DetectorModel(efficiency=self.efficiency, dark_prob=self.dark_prob)


@dataclass(frozen=True)
class HeraldResult:
    """Herald probability and conditional fidelity, with regime flags."""

    probability: float
    fidelity: float
    fidelity_simplified: float = None
    dark_count_dominated: bool = False
    multipair_dominated: bool = False


def mean_pairs_from_p1(p1):
    """Mean pair number n_bar with single-pair probability p1 (n_bar < 1 root).

    Inverts p1 = n_bar/(1+n_bar)^2, whose maximum 1/4 sits at n_bar = 1.
    """
    if p1 < 0.0 or p1 > 0.25:
        raise InvalidP1(f"p1 = {p1} outside [0, 0.25]")
    # rationalized root, stable for small p1
    return 2.0 * p1 / (1.0 - 2.0 * p1 + np.sqrt(1.0 - 4.0 * p1))


def _pair_probs(p1):
    n_bar = mean_pairs_from_p1(p1)
    p0 = 1.0 / (1.0 + n_bar)
    return p0, n_bar


def sp_herald_probability(p1, h):
    """Probability of a single-phonon herald click per attempt.

    p_h,sp = eta*p1 + 2 eta (1-eta) p1^2/p0 + p_d*p0: a detected single
    pair, a half-detected double pair, or a dark count on no pair.
    """
    p0, _ = _pair_probs(p1)
    eta = h.efficiency
    return (
        eta * p1
        + 2.0 * eta * (1.0 - eta) * p1**2 / p0
        + h.dark_prob * p0
    )


def sp_herald_fidelity(p1, h):
    """Heralded single-phonon fidelity (exact Bayes form) with diagnostics.

    The exact form is F = eta*p1 / p_h,sp.  The simplified expansion
    1 - F ~ 2 p1 (1-eta) + p_d/(p1*eta) is reported alongside; the regime
    flags mark which of its two terms dominates.
    """
    prob = sp_herald_probability(p1, h)
    eta = h.efficiency
    if prob == 0.0:
        return HeraldResult(probability=0.0, fidelity=0.0,
                            fidelity_simplified=0.0)
    fid = eta * p1 / prob

    multi_term = 2.0 * p1 * (1.0 - eta)
    dark_term = h.dark_prob / (p1 * eta) if p1 * eta > 0.0 else np.inf
    simplified = 1.0 - min(multi_term + dark_term, 1.0)
    return HeraldResult(
        probability=prob,
        fidelity=fid,
        fidelity_simplified=simplified,
        dark_count_dominated=dark_term > multi_term and h.dark_prob > 0.0,
        multipair_dominated=multi_term >= dark_term and multi_term > 0.0,
    )


def no_herald_residual(f_hsp):
    """Residual phonon population after a failed herald: (1 - F_hsp)/2.

    The no-click state is close to thermal; this is its mean occupation.
    """
    if not 0.0 <= f_hsp <= 1.0:
        raise InvalidState("fidelity outside [0, 1]")
    return 0.5 * (1.0 - f_hsp)


def _ghz_dark_factor(n, p_re, h):
    """n^2 p_d (1 - eta p_re)/(eta p_re), the dark-count admixture weight."""
    ep = h.efficiency * p_re
    if ep == 0.0:
        return np.inf if h.dark_prob > 0.0 else 0.0
    return n**2 * h.dark_prob * (1.0 - ep) / ep


def _warn_dark_regime(n, p_re, h):
    if h.dark_prob > 0.0 and n * h.dark_prob >= h.efficiency * p_re / 10.0:
        warnings.warn(
            DarkCountRegime(
                f"n*p_d = {n * h.dark_prob:.3g} is not << eta*p_re = "
                f"{h.efficiency * p_re:.3g}; dark-count linearization strained"
            ),
            stacklevel=3,
        )


def ghz_herald_probability(n, p_re, h):
    """Probability that an n-qubit entangling herald pattern fires.

    p = 2 (eta p_re)^n (1 - eta p_re)^n (1 + n^2 p_d (1-eta p_re)/(eta p_re)),
    written out so the p_re -> 0 limit is finite.
    """
    if n < 2:
        raise InvalidState("entangling herald needs n >= 2")
    if not 0.0 <= p_re <= 1.0:
        raise InvalidState("p_re outside [0, 1]")
    _warn_dark_regime(n, p_re, h)
    ep = h.efficiency * p_re
    base = 2.0 * ep**n * (1.0 - ep) ** n
    dark = 2.0 * n**2 * h.dark_prob * ep ** (n - 1) * (1.0 - ep) ** (n + 1)
    return base + dark


def ghz_herald_fidelity(n, p_re, h):
    """Fidelity of the heralded n-qubit GHZ state.

    F = ((1-p_re)/(1-eta p_re))^n / (1 + n^2 p_d (1-eta p_re)/(eta p_re)).
    The numerator is the no-undetected-photon weight; the denominator folds
    in false heralds from dark counts.
    """
    if n < 2:
        raise InvalidState("entangling herald needs n >= 2")
    if not 0.0 <= p_re <= 1.0:
        raise InvalidState("p_re outside [0, 1]")
    _warn_dark_regime(n, p_re, h)
    ep = h.efficiency * p_re
    dark = _ghz_dark_factor(n, p_re, h)
    if np.isinf(dark):
        return 0.0
    if p_re == 1.0 and ep < 1.0:
        return 0.0
    return ((1.0 - p_re) / (1.0 - ep)) ** n / (1.0 + dark)


def effective_retrieval(p_list):
    """Combined retrieval probability of repeated attempts: 1 - prod(1-p_k)."""
    p = np.asarray(p_list, dtype=float)
    if p.size == 0 or np.any((p < 0.0) | (p > 1.0)):
        raise InvalidState("need a nonempty list of probabilities in [0, 1]")
    return float(1.0 - np.prod(1.0 - p))


def effective_dark_prob(dark_prob, iterations):
    """Dark probability over an effectively longer window: 1-(1-p_d)^K."""
    if iterations < 1:
        raise InvalidState("iterations must be >= 1")
    return float(1.0 - (1.0 - dark_prob) ** iterations)
