"""Kraus-level engine for heralded GHZ-state preparation on cached phonons.

Layout: 2n acoustic modes labeled ``b{i}_{q}`` for resonator pair i = 1..n and
rail q in {0, 1}.  Logical dual-rail basis per pair: |0_L> = |10>, |1_L> = |01>
(phonon in rail 1 means logical one).  Retrieval sends each rail through an
optomechanical beam splitter of transmissivity p_re into an optical rail; the
optical rails pass two rounds of 50/50 splitters (convention (a, b) ->
((a+b)/sqrt2, (a-b)/sqrt2)): first within each pair, then on a ring coupling
[i,1] with [(i mod n)+1, 0].  Referred back to the acoustic side, detector
(i, 1) annihilates (b_{i,+} - b_{i+1,-})/sqrt2 and detector (j, 0)
annihilates (b_{j-1,+} + b_{j,-})/sqrt2, with b_{i,±} = (b_{i,0} ±
b_{i,1})/sqrt2 and pair indices mod n.

A full detection round at retrieval rate p is the multimode loss channel
K_m = (1-p)^(n_active/2) prod_d (sqrt(p) D_d)^(m_d)/sqrt(m_d!), the no-jump
factor evaluated on the post-jump state and restricted to acoustic pairs that
are still being retrieved.  A pair stops being retrieved once both detector
pairs adjacent to it have completed.
"""

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from .detection import detect_photon_number, optical_scatter
from .errors import (
    ComplexityLimit,
    DimensionMismatch,
    InvalidState,
    TruncationError,
)
from .fock import KrausOp, ModeRegistry, PureState
from .herald import HeraldModel, effective_dark_prob, effective_retrieval, ghz_herald_fidelity
from .multiplex import ScheduleParams, expected_max_cycle

# Full-round enumerations (single_shot, bleeding, expected_rounds) blow up
# combinatorially in n; the asymptotic recursion only ever applies single
# clicks and scales much further.
_ROUND_ENUM_MAX_N = 4
_ASYMPTOTIC_MAX_N = 12

IDEAL_HERALD = HeraldModel(eta_d=1.0, eta_ex=1.0)


# ---------------------------------------------------------------------------
# geometry: modes, detectors, exclusion rule


def _flat_index(i, q, n):
    """Flat position of pair i (1-based, mod n), rail q — shared by acoustic
    modes and detectors."""
    return 2 * ((i - 1) % n) + q


@lru_cache(maxsize=None)
def ghz_registry(n, dim=2):
    """Acoustic registry: modes b1_0, b1_1, ..., bn_1 with ``dim`` levels."""
    return ModeRegistry(
        [(f"b{i}_{q}", dim) for i in range(1, n + 1) for q in (0, 1)]
    )


@lru_cache(maxsize=None)
def _detector_order(n):
    return tuple((i, q) for i in range(1, n + 1) for q in (0, 1))


@lru_cache(maxsize=None)
def _detector_terms(n):
    """Acoustic-mode coefficients of each detector's annihilator.

    Detector (i,1) = (b_{i,+} - b_{i+1,-})/sqrt2, detector (i+1,0) =
    (b_{i,+} + b_{i+1,-})/sqrt2; each expands to four acoustic terms with
    coefficients ±1/2.
    """
    terms = {}
    for i in range(1, n + 1):
        j = i % n + 1
        terms[(i, 1)] = (
            (_flat_index(i, 0, n), 0.5),
            (_flat_index(i, 1, n), 0.5),
            (_flat_index(j, 0, n), -0.5),
            (_flat_index(j, 1, n), 0.5),
        )
        terms[(j, 0)] = (
            (_flat_index(i, 0, n), 0.5),
            (_flat_index(i, 1, n), 0.5),
            (_flat_index(j, 0, n), 0.5),
            (_flat_index(j, 1, n), -0.5),
        )
    return terms


@lru_cache(maxsize=None)
def _network_matrix(n):
    """Unitary of the two-round splitter network on the 2n optical rails.

    Row d (flat detector order), column c (flat rail order): D_d =
    sum_c M[d,c] o_c.  Rows are the same ±1/2 patterns as _detector_terms.
    """
    m = np.zeros((2 * n, 2 * n))
    for d, det in enumerate(_detector_order(n)):
        for c, coeff in _detector_terms(n)[det]:
            m[d, c] = coeff
    return m


# ---------------------------------------------------------------------------
# detection records


@dataclass(frozen=True)
class DetectionRecord:
    """Cumulative click counts, detector (i, q) at flat index 2(i-1)+q."""

    n: int
    counts: tuple

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        object.__setattr__(self, "counts", counts)
        if self.n < 2:
            raise DimensionMismatch("need at least two resonator pairs")
        if len(counts) != 2 * self.n:
            raise DimensionMismatch("one count per detector required")
        if any(c < 0 for c in counts):
            raise InvalidState("negative click count")

    @staticmethod
    def empty(n):
        return DetectionRecord(n, (0,) * (2 * n))

    def total(self):
        return sum(self.counts)

    def detector_count(self, i, q):
        return self.counts[_flat_index(i, q, self.n)]

    def pair_total(self, i):
        """Clicks accumulated by detector pair i = {[i,1], [(i mod n)+1, 0]}."""
        return self.detector_count(i, 1) + self.detector_count(i % self.n + 1, 0)

    def add(self, i, q, clicks=1):
        counts = list(self.counts)
        counts[_flat_index(i, q, self.n)] += clicks
        return DetectionRecord(self.n, tuple(counts))

    def add_counts(self, mvec):
        if len(mvec) != 2 * self.n:
            raise DimensionMismatch("one count per detector required")
        return DetectionRecord(
            self.n, tuple(c + int(m) for c, m in zip(self.counts, mvec))
        )

    @property
    def classification(self):
        if max(self.counts) > 1:
            return "failed"
        totals = [self.pair_total(i) for i in range(1, self.n + 1)]
        if all(t == 1 for t in totals):
            return "complete"
        if max(totals) <= 1:
            return "partial"
        if self.n == 2 and self.total() == 2:
            # both detectors of one splitter pair fired: still a Bell state,
            # but in a dual-rail encoding that pairs the resonators the other
            # way round
            return "wrong-basis"
        return "failed"

    @property
    def parity_bits(self):
        if self.classification != "complete":
            return None
        return tuple(
            1 if self.detector_count(i, 1) == 1 else -1
            for i in range(1, self.n + 1)
        )

    @property
    def total_parity(self):
        bits = self.parity_bits
        if bits is None:
            return None
        return int(np.prod(bits))

    def pattern(self):
        """Compact click string in flat detector order, e.g. '0101'."""
        return "".join(str(c) for c in self.counts)


def _excluded_pairs(record):
    """Acoustic pairs no longer retrieved: both adjacent detector pairs done."""
    n = record.n
    out = set()
    for j in range(1, n + 1):
        prev = (j - 2) % n + 1
        if record.pair_total(j) == 1 and record.pair_total(prev) == 1:
            out.add(j)
    return frozenset(out)


def _active_pairs(record):
    return frozenset(range(1, record.n + 1)) - _excluded_pairs(record)


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class GhzConfig:
    """n resonator pairs, per-iteration retrieval rates, detection model.

    Schedule entries are floats, or mappings {detections-so-far: p_re} for
    state-dependent rates.
    """

    n: int
    retrieval_schedule: tuple = (0.5,)
    herald_model: HeraldModel = IDEAL_HERALD

    def __post_init__(self):
        if self.n < 2:
            raise DimensionMismatch("need at least two resonator pairs")
        sched = tuple(self.retrieval_schedule)
        if not sched:
            raise InvalidState("retrieval schedule is empty")
        for entry in sched:
            if isinstance(entry, dict):
                vals = entry.values()
            else:
                vals = (entry,)
            for p in vals:
                if not 0.0 <= float(p) <= 1.0:
                    raise InvalidState(f"retrieval probability {p} outside [0, 1]")
        object.__setattr__(self, "retrieval_schedule", sched)


def _resolve_rate(entry, record):
    if isinstance(entry, dict):
        c = record.total()
        if c in entry:
            return float(entry[c])
        raise InvalidState(
            f"schedule entry has no rate for {c} accumulated detections"
        )
    return float(entry)


# ---------------------------------------------------------------------------
# array kernels (states kept as shape (dim,)*2n tensors)


def _lower(arr, axis):
    """Apply the annihilator of one mode to a state tensor."""
    out = np.zeros_like(arr)
    src = np.moveaxis(arr, axis, 0)
    dst = np.moveaxis(out, axis, 0)
    for k in range(1, arr.shape[axis]):
        dst[k - 1] = math.sqrt(k) * src[k]
    return out


def _apply_detector(arr, n, det, active_pairs):
    """D_det · arr, dropping terms on pairs that are no longer retrieved."""
    out = None
    for m, coeff in _detector_terms(n)[det]:
        if m // 2 + 1 not in active_pairs:
            continue
        term = coeff * _lower(arr, m)
        out = term if out is None else out + term
    if out is None:
        out = np.zeros_like(arr)
    return out


def _no_jump(arr, p, n, active_pairs):
    """Multiply by (1-p)^(n_active/2), component-wise over occupations."""
    if p == 0.0:
        return arr
    out = arr
    for pair in active_pairs:
        for q in (0, 1):
            ax = _flat_index(pair, q, n)
            d = arr.shape[ax]
            vec = np.sqrt(1.0 - p) ** np.arange(d)
            shape = [1] * arr.ndim
            shape[ax] = d
            out = out * vec.reshape(shape)
    return out


def _active_occupation(arr_shape, n, active_pairs):
    """Integer tensor: per basis component, phonons on retrieved pairs."""
    occ = np.zeros(arr_shape, dtype=np.int64)
    for pair in active_pairs:
        for q in (0, 1):
            ax = _flat_index(pair, q, n)
            d = arr_shape[ax]
            shape = [1] * len(arr_shape)
            shape[ax] = d
            occ = occ + np.arange(d).reshape(shape)
    return occ


def _initial_array(n):
    reg = ghz_registry(n)
    arr = np.zeros(reg.dims, dtype=float)
    arr[(1,) * (2 * n)] = 1.0
    return arr


def _as_array(state, n):
    reg = ghz_registry(n)
    if state.amplitudes.size != reg.size:
        raise DimensionMismatch("state does not cover the 2n acoustic modes")
    arr = state.amplitudes.reshape(reg.dims)
    if np.abs(arr.imag).max() > 1e-12:
        return arr.astype(complex)
    return np.ascontiguousarray(arr.real)


# ---------------------------------------------------------------------------
# target states and the GHZ Kraus operator


def ghz_state(n, parity=1, registry=None):
    """(|+_L>^n + parity |-_L>^n)/sqrt2 with |±_L> = (|10> ± |01>)/sqrt2."""
    if parity not in (1, -1):
        raise InvalidState("parity must be ±1")
    if registry is None:
        registry = ghz_registry(n)
    plus = np.zeros((2, 2))
    plus[1, 0] = plus[0, 1] = 1.0 / math.sqrt(2.0)
    minus = np.zeros((2, 2))
    minus[1, 0] = 1.0 / math.sqrt(2.0)
    minus[0, 1] = -1.0 / math.sqrt(2.0)
    term_p, term_m = np.ones(()), np.ones(())
    for _ in range(n):
        term_p = np.multiply.outer(term_p, plus)
        term_m = np.multiply.outer(term_m, minus)
    arr = (term_p + parity * term_m) / math.sqrt(2.0)
    full = np.zeros(registry.dims)
    full[tuple(slice(0, 2) for _ in range(2 * n))] = arr
    return PureState(registry, full.reshape(-1))


def ghz_kraus(n, s, p_re, registry=None):
    """Kraus operator of a complete herald with parity bits ``s``.

    (p_re/2)^(n/2) (1-p_re)^(n_ph/2) prod_i (b_{i,+} - s_i b_{i+1,-}),
    the no-jump factor evaluated on the post-jump phonon number.
    """
    s = tuple(int(x) for x in s)
    if len(s) != n or any(x not in (1, -1) for x in s):
        raise DimensionMismatch("need n parity bits ±1")
    if not 0.0 <= p_re <= 1.0:
        raise InvalidState("retrieval probability outside [0, 1]")
    if registry is None:
        registry = ghz_registry(n)
    prod = registry.identity()
    for i in range(1, n + 1):
        j = i % n + 1
        op = (
            registry.destroy(f"b{i}_0")
            + registry.destroy(f"b{i}_1")
            - s[i - 1] * (registry.destroy(f"b{j}_0") - registry.destroy(f"b{j}_1"))
        ) / 2.0
        prod = op @ prod
    occ = np.array(
        [sum(registry.occupations(k)) for k in range(registry.size)], dtype=float
    )
    weights = np.power(1.0 - p_re, occ / 2.0)  # 0^0 = 1 keeps the vacuum row
    mat = (p_re / 2.0) ** (n / 2.0) * (weights[:, None] * prod)
    label = "K_ghz[" + "".join("+" if x == 1 else "-" for x in s) + "]"
    return KrausOp(registry, mat, label)


@lru_cache(maxsize=None)
def _record_target(n, counts):
    """Normalized state the click record ideally heralds (None if the
    unnormalized product vanishes)."""
    arr = _initial_array(n)
    dets = _detector_order(n)
    for d, m in enumerate(counts):
        for _ in range(m):
            arr = _apply_detector(arr, n, dets[d], frozenset(range(1, n + 1)))
    nrm = float(np.linalg.norm(arr))
    if nrm == 0.0:
        return None
    out = arr / nrm
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# one full detection round


def _round_outcomes(arr, n, p, active_pairs):
    """All detection outcomes of one retrieval round at rate ``p``.

    Returns [(mvec, amplitude array)]; squared norms sum to 1 (loss-channel
    completeness over the retrieved pairs).
    """
    dets = _detector_order(n)
    sp = math.sqrt(p)
    results = []

    def descend(cur, k, counts):
        if k == len(dets):
            results.append((tuple(counts), _no_jump(cur, p, n, active_pairs)))
            return
        descend(cur, k + 1, counts + [0])
        if sp == 0.0:
            return
        m = 0
        nxt = cur
        while True:
            m += 1
            nxt = (sp / math.sqrt(m)) * _apply_detector(nxt, n, dets[k], active_pairs)
            if not np.any(nxt):
                break
            descend(nxt, k + 1, counts + [m])

    descend(arr, 0, [])
    return results


# ---------------------------------------------------------------------------
# single shot


@dataclass(frozen=True)
class ShotOutcome:
    record: DetectionRecord
    state: PureState
    probability: float


@dataclass(frozen=True)
class ObservedOutcome:
    """A click pattern as read out through the detector model."""

    record: DetectionRecord
    probability: float
    fidelity: float  # vs the record's ideal target; nan when undefined


@dataclass(frozen=True)
class GhzHeraldSummary:
    probability: float
    fidelity: float
    wrong_basis_probability: float


@dataclass(frozen=True)
class ShotDistribution:
    """Exhaustive ideal-detection outcome set of one retrieval round."""

    config: GhzConfig
    outcomes: tuple

    def __iter__(self):
        return iter(self.outcomes)

    def total_probability(self):
        return float(sum(o.probability for o in self.outcomes))

    def observed(self, herald_model=None):
        """Fold detector efficiency and dark counts into the outcome set.

        Observed counts per detector: binomial thinning of the true clicks at
        the herald model's end-to-end efficiency, plus at most one dark count.
        Fidelity of an observed record is evaluated against that record's
        ideal target state, mixing over the true patterns behind it.
        """
        h = self.config.herald_model if herald_model is None else herald_model
        det = h.detector()
        n = self.config.n
        kernel = det.observe_kernel(2 * n)
        acc = {}
        for out in self.outcomes:
            rows = [kernel[m] for m in out.record.counts]
            arrs = [np.nonzero(r > 0.0)[0] for r in rows]
            psi = out.state.amplitudes
            for obs in itertools.product(*arrs):
                w = out.probability
                for r, o in zip(rows, obs):
                    w *= r[o]
                if w <= 0.0:
                    continue
                slot = acc.setdefault(obs, [0.0, 0.0])
                slot[0] += w
                target = _record_target(n, obs)
                if target is not None:
                    ov = np.vdot(target.reshape(-1), psi)
                    slot[1] += w * float(np.abs(ov) ** 2)
        observed = []
        for obs in sorted(acc):
            w, fw = acc[obs]
            rec = DetectionRecord(n, obs)
            fid = fw / w if rec.classification in ("complete", "wrong-basis") else math.nan
            observed.append(ObservedOutcome(rec, w, fid))
        return tuple(observed)

    def summary(self, include_wrong_basis=False, herald_model=None):
        """Heralding probability and mean conditional fidelity.

        With ``include_wrong_basis`` the two extra n=2 patterns count as
        successes and the probability is rescaled by 2/3, so the ideal value
        matches the canonical four-pattern figure.
        """
        obs = self.observed(herald_model)
        p_c = f_c = p_w = f_w = 0.0
        for o in obs:
            cls = o.record.classification
            if cls == "complete":
                p_c += o.probability
                f_c += o.probability * o.fidelity
            elif cls == "wrong-basis":
                p_w += o.probability
                f_w += o.probability * o.fidelity
        if include_wrong_basis:
            prob = (p_c + p_w) * (2.0 / 3.0)
            fid = (f_c + f_w) / (p_c + p_w) if p_c + p_w > 0 else math.nan
        else:
            prob = p_c
            fid = f_c / p_c if p_c > 0 else math.nan
        return GhzHeraldSummary(prob, fid, p_w)


def single_shot(config, initial=None):
    """Exhaustive outcome distribution of one retrieval round.

    Conditional states are exact and pure; detector imperfections are layered
    on afterwards by :meth:`ShotDistribution.observed`.
    """
    n = config.n
    if n > _ROUND_ENUM_MAX_N:
        raise ComplexityLimit(
            f"full-round enumeration capped at n={_ROUND_ENUM_MAX_N}"
        )
    record0 = DetectionRecord.empty(n)
    p = _resolve_rate(config.retrieval_schedule[0], record0)
    arr = _initial_array(n) if initial is None else _as_array(initial, n)
    reg = ghz_registry(n)
    outcomes = []
    for mvec, out in sorted(_round_outcomes(arr, n, p, _active_pairs(record0))):
        pr = float(np.vdot(out, out).real)
        if pr <= 0.0:
            continue
        state = PureState(reg, (out / math.sqrt(pr)).reshape(-1))
        outcomes.append(ShotOutcome(DetectionRecord(n, mvec), state, pr))
    return ShotDistribution(config, tuple(outcomes))


def single_shot_optical(config, initial=None):
    """Full optical-network oracle for n = 2: OM beam splitters, the splitter
    ring, then lossy/dark photon counting on the four optical rails.

    Returns ObservedOutcome entries; conditional acoustic states are density
    matrices internally and enter only through the fidelity column.  Validates
    the Kraus route including the detector layer.
    """
    n = config.n
    if n != 2:
        raise TruncationError(
            "optical-network oracle holds full Fock spaces; beyond n=2 the "
            "density-matrix readout exceeds the mode budget — use single_shot"
        )
    record0 = DetectionRecord.empty(n)
    p = _resolve_rate(config.retrieval_schedule[0], record0)
    o_dim = 2 * n + 1
    modes = [(f"b{i}_{q}", 2) for i in range(1, n + 1) for q in (0, 1)]
    modes += [(f"o{i}_{q}", o_dim) for i in range(1, n + 1) for q in (0, 1)]
    reg = ModeRegistry(modes)
    if initial is None:
        ac = _initial_array(n).reshape(-1)
    else:
        ac = _as_array(initial, n).reshape(-1)
    vac = np.zeros(o_dim ** (2 * n))
    vac[0] = 1.0
    state = PureState(reg, np.kron(ac, vac))

    sp, sq = math.sqrt(p), math.sqrt(1.0 - p)
    v_om = np.array([[sq, -sp], [sp, sq]])
    for i in range(1, n + 1):
        for q in (0, 1):
            state = optical_scatter(state, v_om, [f"b{i}_{q}", f"o{i}_{q}"])
    o_labels = [f"o{i}_{q}" for (i, q) in _detector_order(n)]
    state = optical_scatter(state, _network_matrix(n), o_labels)

    outcomes = detect_photon_number(state, o_labels, detector=config.herald_model.detector())
    observed = []
    ghz_reg = ghz_registry(n)
    for out in outcomes:
        rec = DetectionRecord(n, out.counts)
        fid = math.nan
        if rec.classification in ("complete", "wrong-basis"):
            target = _record_target(n, out.counts)
            fid = out.post_state.fidelity_with_pure(
                PureState(ghz_reg, target.reshape(-1))
            )
        observed.append(ObservedOutcome(rec, out.probability, fid))
    return observed


def outcome_table(observed):
    """CSV-ready rows (pattern, parity, probability, fidelity)."""
    rows = []
    for o in observed:
        parity = o.record.total_parity
        rows.append(
            {
                "pattern": o.record.pattern(),
                "parity": "" if parity is None else f"{parity:+d}",
                "probability": o.probability,
                "fidelity": "" if math.isnan(o.fidelity) else o.fidelity,
            }
        )
    return rows


# ---------------------------------------------------------------------------
# bleeding (iterated weak retrieval)


@dataclass(frozen=True)
class BleedState:
    """Acoustic state plus the cumulative record after some iterations."""

    state: PureState
    record: DetectionRecord
    iteration: int = 0

    @property
    def classification(self):
        return self.record.classification


def bleed_step(bstate, p_re):
    """One more weak-retrieval iteration; returns [(BleedState, probability)].

    Pairs whose adjacent detector pairs have both completed are not retrieved.
    Probabilities over the returned list sum to 1.
    """
    cls = bstate.record.classification
    if cls != "partial":
        raise InvalidState(f"record already {cls}; nothing to bleed")
    n = bstate.record.n
    if n > _ROUND_ENUM_MAX_N:
        raise ComplexityLimit(
            f"full-round enumeration capped at n={_ROUND_ENUM_MAX_N}"
        )
    p = _resolve_rate(p_re, bstate.record)
    arr = _as_array(bstate.state, n)
    reg = ghz_registry(n)
    active = _active_pairs(bstate.record)
    results = []
    for mvec, out in sorted(_round_outcomes(arr, n, p, active)):
        pr = float(np.vdot(out, out).real)
        if pr <= 0.0:
            continue
        nxt = BleedState(
            PureState(reg, (out / math.sqrt(pr)).reshape(-1)),
            bstate.record.add_counts(mvec),
            bstate.iteration + 1,
        )
        results.append((nxt, pr))
    return results


@dataclass(frozen=True)
class BleedPathway:
    clicks_per_round: tuple
    probability: float
    effective_p_re: float
    fidelity: float


@dataclass(frozen=True)
class BleedResult:
    success_probability: float
    pathways: tuple
    average_fidelity: float
    wrong_basis_probability: float
    failure_probability: float
    unfinished_probability: float

    def pathway_weights(self):
        if self.success_probability <= 0.0:
            return tuple(math.nan for _ in self.pathways)
        return tuple(p.probability / self.success_probability for p in self.pathways)


def bleed_success_probability(config):
    """Probability of completing a herald within the scheduled iterations.

    Detector efficiency is folded into the per-round click rate (an
    undetected retrieval is still a retrieval); pathway fidelities come from
    the closed-form herald model at the pathway's effective retrieval
    probability and the schedule-length dark-count exposure.
    """
    n, K = config.n, len(config.retrieval_schedule)
    if n > _ROUND_ENUM_MAX_N:
        raise ComplexityLimit(
            f"full-round enumeration capped at n={_ROUND_ENUM_MAX_N}"
        )
    h = config.herald_model
    eta = h.efficiency

    # branches keyed by the full per-round click sequence — sequences that
    # differ anywhere are distinguishable records, so they never interfere
    live = {(): _initial_array(n)}
    complete = {}  # clicks-per-round signature -> accumulated probability
    p_wrong = p_fail = 0.0

    for k in range(K):
        entry = config.retrieval_schedule[k]
        nxt_live = {}
        for seq, arr in live.items():
            rec = DetectionRecord.empty(n)
            for past in seq:
                rec = rec.add_counts(past)
            q = eta * _resolve_rate(entry, rec)
            active = _active_pairs(rec)
            for mvec, out in _round_outcomes(arr, n, q, active):
                pr = float(np.vdot(out, out).real)
                if pr <= 0.0:
                    continue
                rec2 = rec.add_counts(mvec)
                hist2 = tuple(sum(m) for m in seq) + (sum(mvec),)
                cls = rec2.classification
                if cls == "complete":
                    complete[hist2] = complete.get(hist2, 0.0) + pr
                elif cls == "wrong-basis":
                    p_wrong += pr
                elif cls == "failed":
                    p_fail += pr
                else:
                    nxt_live[seq + (mvec,)] = out
        live = nxt_live

    p_unfinished = sum(
        float(np.vdot(a, a).real) for a in live.values()
    )

    dark_eff = effective_dark_prob(h.dark_prob, K)
    h_eff = HeraldModel.with_dark_prob(h.eta_d, h.eta_ex, dark_eff)
    pathways = []
    p_succ = 0.0
    for hist in sorted(complete):
        pr = complete[hist]
        p_succ += pr
        # true retrieval rates along this pathway, resolved from the click
        # count the policy saw at each round start
        rates = []
        c = 0
        for k, dk in enumerate(hist):
            rates.append(_rate_at_count(config.retrieval_schedule[k], c))
            c += dk
        p_eff = effective_retrieval(rates)
        fid = ghz_herald_fidelity(n, p_eff, h_eff)
        pathways.append(BleedPathway(hist, pr, p_eff, fid))
    avg = (
        sum(p.probability * p.fidelity for p in pathways) / p_succ
        if p_succ > 0.0
        else math.nan
    )
    return BleedResult(
        p_succ, tuple(pathways), avg, p_wrong, p_fail, p_unfinished
    )


def _rate_at_count(entry, count):
    """Resolve a schedule entry for a branch holding ``count`` detections."""
    if isinstance(entry, dict):
        if count in entry:
            return float(entry[count])
        raise InvalidState(
            f"schedule entry has no rate for {count} accumulated detections"
        )
    return float(entry)


def optimize_bleed_schedule(n, iterations, herald_model=IDEAL_HERALD, sweeps=3):
    """Maximize the bleeding success probability over count-dependent rates.

    Policy: one rate per (round, detections-so-far); coordinate-wise bounded
    scalar maximization.  Returns (schedule, BleedResult at the optimum).
    """
    if iterations < 1:
        raise InvalidState("need at least one iteration")
    schedule = [{0: 0.5}]
    for _ in range(1, iterations):
        schedule.append({c: 0.5 for c in range(n)})

    def objective():
        cfg = GhzConfig(n, tuple(dict(e) for e in schedule), herald_model)
        return bleed_success_probability(cfg).success_probability

    for _ in range(sweeps):
        for k, entry in enumerate(schedule):
            for c in sorted(entry):
                def neg(x, k=k, c=c):
                    schedule[k][c] = float(x)
                    return -objective()

                res = minimize_scalar(
                    neg, bounds=(1e-9, 1.0 - 1e-9), method="bounded",
                    options={"xatol": 1e-10},
                )
                schedule[k][c] = float(res.x)
    final_schedule = tuple(dict(e) for e in schedule)
    cfg = GhzConfig(n, final_schedule, herald_model)
    return final_schedule, bleed_success_probability(cfg)


# ---------------------------------------------------------------------------
# asymptotic success probability (p_re -> 0, unlimited iterations)


def asymptotic_success(n):
    """Success probability of infinitely slow bleeding, by exact recursion.

    In the weak-retrieval limit clicks arrive one at a time; the next click
    lands on detector d with probability |D_d phi|^2 / sum_d' |D_d' phi|^2,
    and the state collapses to the normalized D_d phi.  A click on an
    already-fired detector (or a second click on a completed detector pair)
    is an inconsistent record and ends the attempt.
    """
    if n < 2:
        raise DimensionMismatch("need at least two resonator pairs")
    if n > _ASYMPTOTIC_MAX_N:
        raise ComplexityLimit(f"asymptotic recursion capped at n={_ASYMPTOTIC_MAX_N}")
    memo = {}
    return _asym_succ(n, DetectionRecord.empty(n), _initial_array(n), memo)


def _asym_succ(n, record, arr, memo):
    key = (record.counts, np.round(arr, 10).tobytes())
    hit = memo.get(key)
    if hit is not None:
        return hit
    active = _active_pairs(record)
    branches = []
    total_rate = 0.0
    for det in _detector_order(n):
        child = _apply_detector(arr, n, det, active)
        rate = float(np.vdot(child, child).real)
        if rate > 0.0:
            branches.append((det, rate, child))
            total_rate += rate
    total = 0.0
    for det, rate, child in branches:
        q = rate / total_rate
        rec2 = record.add(*det)
        cls = rec2.classification
        if cls == "complete":
            total += q
        elif cls == "partial":
            total += q * _asym_succ(n, rec2, child / math.sqrt(rate), memo)
    memo[key] = total
    return total


# ---------------------------------------------------------------------------
# expected rounds to a GHZ herald, with single-phonon reset on failure


@dataclass(frozen=True)
class RoundsResult:
    expected_rounds: float
    schedule: tuple  # p_re per detections-so-far bucket
    single_shot_rounds: float
    reset_cycles: float  # expected heralding cycles to refill 2n phonons


def _partial_records(n):
    """All consistent partial records, ordered; empty record first."""
    records = []
    for choice in itertools.product((0, 1, 2), repeat=n):
        if all(c > 0 for c in choice):
            continue  # complete, not partial
        rec = DetectionRecord.empty(n)
        for i, c in enumerate(choice, start=1):
            if c == 1:
                rec = rec.add(i, 1)
            elif c == 2:
                rec = rec.add(i % n + 1, 0)
        records.append(rec)
    records.sort(key=lambda r: (r.total(), r.counts))
    return records


@lru_cache(maxsize=None)
def _chain_tables(n):
    """Per-record one-round outcome polynomials.

    For each partial record: entries (mvec, |m|, N_sector, weight) so that
    P(mvec) = sum weight * p^|m| (1-p)^(N-|m|); plus the weight of stalled
    sectors (routed to failure).
    """
    dets = _detector_order(n)
    tables = []
    for rec in _partial_records(n):
        arr = _initial_array(n)
        for d, m in enumerate(rec.counts):
            for _ in range(m):
                arr = _apply_detector(arr, n, dets[d], frozenset(range(1, n + 1)))
        nrm = np.linalg.norm(arr)
        if nrm == 0.0:
            continue  # unreachable record
        arr = arr / nrm
        active = _active_pairs(rec)
        occ = _active_occupation(arr.shape, n, active)
        weights = np.abs(arr) ** 2
        entries = []
        stalled = 0.0
        for nval in np.unique(occ[weights > 0.0]):
            mask = occ == nval
            w = float(weights[mask].sum())
            if w <= 1e-30:
                continue
            if nval == 0:
                stalled += w
                continue
            phi = np.where(mask, arr, 0.0) / math.sqrt(w)

            def descend(cur, k, counts, total_m):
                if k == len(dets):
                    amp2 = float(np.vdot(cur, cur).real)
                    if amp2 > 0.0:
                        entries.append((tuple(counts), total_m, int(nval), w * amp2))
                    return
                descend(cur, k + 1, counts + [0], total_m)
                m = 0
                nxt = cur
                while True:
                    m += 1
                    nxt = _apply_detector(nxt, n, dets[k], active) / math.sqrt(m)
                    if not np.any(nxt):
                        break
                    descend(nxt, k + 1, counts + [m], total_m + m)

            descend(phi, 0, [], 0)
        tables.append((rec, entries, stalled))
    return tuple(tables)


def _solve_rounds(n, p_of_count, reset_cycles):
    """Expected rounds from the empty record on the record-class chain."""
    tables = _chain_tables(n)
    index = {rec.counts: i for i, (rec, _, _) in enumerate(tables)}
    size = len(tables)
    t_mat = np.zeros((size, size))
    fail = np.zeros(size)
    for i, (rec, entries, stalled) in enumerate(tables):
        p = p_of_count(rec.total())
        if not 0.0 < p <= 1.0:
            raise InvalidState("chain rates must lie in (0, 1]")
        fail[i] += stalled
        for mvec, m_tot, nval, w in entries:
            prob = w * p**m_tot * (1.0 - p) ** (nval - m_tot)
            if prob <= 0.0:
                continue
            if m_tot == 0:
                t_mat[i, i] += prob
                continue
            rec2 = rec.add_counts(mvec)
            cls = rec2.classification
            if cls == "complete":
                continue  # absorbed: success
            if cls == "partial":
                t_mat[i, index[rec2.counts]] += prob
            else:
                fail[i] += prob
    i0 = index[DetectionRecord.empty(n).counts]
    a = np.eye(size) - t_mat
    a[:, i0] -= fail
    rhs = 1.0 + fail * reset_cycles
    return float(np.linalg.solve(a, rhs)[i0])


def expected_rounds(n, p_hsp, schedule=None, sweeps=2):
    """Expected retrieval rounds to herald an n-GHZ state.

    Failures reset all 2n resonators at an expected cost of M̄(2n, p_hsp)
    heralding cycles.  ``schedule`` gives p_re per detections-so-far bucket
    (last entry covers larger counts); None optimizes up to three levels by
    coordinate bounded search.  The single-shot baseline restarts every round
    at p_re = 1/2.
    """
    if n < 2:
        raise DimensionMismatch("need at least two resonator pairs")
    if n > _ROUND_ENUM_MAX_N:
        raise ComplexityLimit(
            f"full-round enumeration capped at n={_ROUND_ENUM_MAX_N}"
        )
    if not 0.0 < p_hsp < 1.0:
        raise InvalidState("p_hsp must lie in (0, 1)")
    m_bar, _ = expected_max_cycle(ScheduleParams(N=2 * n, p_hsp=p_hsp, T_h=1.0))

    q_ss = 2.0 * 0.5 ** (2 * n)  # single-shot herald probability at p_re = 1/2
    r_ss = (1.0 + (1.0 - q_ss) * m_bar) / q_ss

    if schedule is not None:
        sched = tuple(float(p) for p in schedule)
        if not sched:
            raise InvalidState("schedule is empty")
        rounds = _solve_rounds(
            n, lambda c: sched[min(c, len(sched) - 1)], m_bar
        )
        return RoundsResult(rounds, sched, r_ss, m_bar)

    levels = [0.5] * min(n, 3)

    def run(vals):
        return _solve_rounds(
            n, lambda c: vals[min(c, len(vals) - 1)], m_bar
        )

    for _ in range(sweeps):
        for j in range(len(levels)):
            def obj(x, j=j):
                trial = list(levels)
                trial[j] = float(x)
                return run(trial)

            res = minimize_scalar(
                obj, bounds=(1e-6, 1.0 - 1e-9), method="bounded",
                options={"xatol": 1e-9},
            )
            levels[j] = float(res.x)
    return RoundsResult(run(levels), tuple(levels), r_ss, m_bar)
