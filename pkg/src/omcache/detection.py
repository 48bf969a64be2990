"""Linear-optical networks and photon-number detection.

A network on k modes is given by its mode-space unitary V.  Creation
operators transform by columns, U a_i+ U~ = sum_j V[j,i] a_j+, so a single
photon prepared in mode i scatters into the amplitude pattern V[:, i].

Detection is layered: an ideal projective decomposition into joint
photon-number sectors, followed by a classical readout kernel (binomial
thinning at the detector efficiency, plus at most one dark count per
detector).  Everything is exhaustive -- no sampling -- with a complexity
guard on the number of outcome tuples.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm, logm
from scipy.stats import binom

from .errors import ComplexityLimit, DimensionMismatch, NonUnitary, TruncationError
from .fock import DensityMatrix, ModeRegistry, PureState

OUTCOME_CAP = 10_000


def fock_network_unitary(registry, vmat, labels):
    """Fock-space unitary of a linear network on the sub-registry of ``labels``.

    Returns ``(sub_registry, U)`` where ``U`` acts on the product space of the
    listed modes (kept in registry order).  ``vmat[j, i]`` is indexed by the
    caller's ``labels`` order.
    """
    vmat = np.asarray(vmat, dtype=complex)
    k = len(labels)
    if vmat.shape != (k, k):
        raise DimensionMismatch(f"network matrix shape {vmat.shape} != ({k},{k})")
    if np.abs(vmat.conj().T @ vmat - np.eye(k)).max() > 1e-9:
        raise NonUnitary("network matrix is not unitary")
    axes = sorted(registry.axis(l) for l in labels)
    sub = ModeRegistry([(registry.labels[a], registry.dims[a]) for a in axes])
    m = logm(vmat)
    gen = np.zeros((sub.size, sub.size), dtype=complex)
    ann = [sub.destroy(l) for l in labels]
    for i in range(k):
        for j in range(k):
            if m[i, j] != 0.0:
                gen += m[i, j] * ann[i].conj().T @ ann[j]
    return sub, expm(gen)


def optical_scatter(state, vmat, labels, check=True):
    """Scatter ``labels`` of a :class:`PureState` through the network ``vmat``.

    With ``check=True``, verifies that no mode's truncation can clip the
    scattered state: each listed mode must hold the *total* photon number
    present across the listed modes.
    """
    if not isinstance(state, PureState):
        raise DimensionMismatch("optical_scatter expects a PureState")
    reg = state.registry
    sub, u = fock_network_unitary(reg, vmat, labels)
    axes = sorted(reg.axis(l) for l in labels)

    if check:
        n_tot_max = _max_total_occupation(state, labels)
        for l in labels:
            if reg.dim(l) < n_tot_max + 1:
                raise TruncationError(
                    f"mode {l!r} dim {reg.dim(l)} cannot hold up to "
                    f"{n_tot_max} scattered photons"
                )

    t = state.amplitudes.reshape(reg.dims)
    t = np.moveaxis(t, axes, range(len(axes)))
    rest = t.shape[len(axes):]
    t = (u @ t.reshape(sub.size, -1)).reshape(sub.dims + rest)
    t = np.moveaxis(t, range(len(axes)), axes)
    return PureState(reg, t.reshape(-1))


def _max_total_occupation(state, labels):
    reg = state.registry
    axes = sorted(reg.axis(l) for l in labels)
    t = np.abs(state.amplitudes.reshape(reg.dims)) ** 2
    other = tuple(i for i in range(len(reg.dims)) if i not in axes)
    marg = t.sum(axis=other) if other else t
    nz = np.argwhere(marg > 1e-24)
    return int(nz.sum(axis=1).max()) if nz.size else 0


@dataclass
class DetectorModel:
    """Classical readout layer of a photon counter."""

    efficiency: float = 1.0
    dark_prob: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise DimensionMismatch("efficiency outside [0, 1]")
        if not 0.0 <= self.dark_prob < 1.0:
            raise DimensionMismatch("dark_prob outside [0, 1)")

    def observe_kernel(self, n_max):
        """Matrix O[n, m] = P(observe m | n photons arrive), m <= n_max + 1."""
        eta, pd = self.efficiency, self.dark_prob
        o = np.zeros((n_max + 1, n_max + 2))
        for n in range(n_max + 1):
            thin = binom.pmf(np.arange(n + 1), n, eta)
            o[n, : n + 1] += (1.0 - pd) * thin
            o[n, 1 : n + 2] += pd * thin
        return o


IDEAL_DETECTOR = DetectorModel()


@dataclass
class DetectionOutcome:
    counts: tuple  # observed photon counts, one per measured mode
    probability: float
    post_state: object  # state of the unmeasured modes (None if prob ~ 0)


def number_decomposition(state, labels):
    """Ideal projective decomposition over joint photon-number sectors.

    Returns a list of ``(counts, probability, remainder)`` where ``remainder``
    is the normalized :class:`PureState` of the unmeasured modes (or None when
    every mode is measured or the branch has vanishing weight).
    """
    reg = state.registry
    axes = sorted(reg.axis(l) for l in labels)
    label_order = [reg.labels[a] for a in axes]
    t = state.amplitudes.reshape(reg.dims)
    t = np.moveaxis(t, axes, range(len(axes)))
    meas_dims = tuple(reg.dims[a] for a in axes)
    if int(np.prod(meas_dims)) > OUTCOME_CAP:
        raise ComplexityLimit(
            f"{int(np.prod(meas_dims))} outcome sectors exceeds {OUTCOME_CAP}"
        )
    rest_axes = [i for i in range(len(reg.dims)) if i not in axes]
    rest_reg = (
        ModeRegistry([(reg.labels[i], reg.dims[i]) for i in rest_axes])
        if rest_axes
        else None
    )
    flat = t.reshape(int(np.prod(meas_dims)), -1)
    out = []
    for idx, sector in enumerate(itertools.product(*[range(d) for d in meas_dims])):
        amp = flat[idx]
        p = float(np.real(np.vdot(amp, amp)))
        if rest_reg is not None and p > 1e-300:
            rem = PureState(rest_reg, amp / np.sqrt(p))
        else:
            rem = None
        # counts reported in the caller's label order
        counts = tuple(sector[label_order.index(l)] for l in labels)
        out.append((counts, p, rem))
    return out


def detect_photon_number(state, labels, detector=IDEAL_DETECTOR):
    """Measure photon number on ``labels`` through a lossy/dark detector.

    Exhaustively convolves the ideal sector decomposition with the classical
    readout kernel of each detector (``detector`` may be a single
    :class:`DetectorModel` or one per label).  Returns a list of
    :class:`DetectionOutcome`, with ``post_state`` a :class:`DensityMatrix`
    over the unmeasured modes (a mixture, since readout erases which sector
    produced the observed counts).  Probabilities sum to 1.
    """
    if isinstance(detector, DetectorModel):
        detector = [detector] * len(labels)
    if len(detector) != len(labels):
        raise DimensionMismatch("need one detector model per measured mode")
    reg = state.registry
    sectors = number_decomposition(state, labels)
    n_caps = [reg.dim(l) - 1 for l in labels]
    kernels = [d.observe_kernel(c) for d, c in zip(detector, n_caps)]

    obs_ranges = [range(c + 2) for c in n_caps]
    n_obs = int(np.prod([c + 2 for c in n_caps]))
    if n_obs > OUTCOME_CAP:
        raise ComplexityLimit(f"{n_obs} observed tuples exceeds {OUTCOME_CAP}")

    # sector 0 can carry a None remainder (vanishing weight), so scan for one
    rest_reg = next((r.registry for _, _, r in sectors if r is not None), None)
    rest_size = rest_reg.size if rest_reg is not None else 0
    acc = {}
    for counts, p, rem in sectors:
        if p <= 1e-300:
            continue
        kerns = [kernels[i][counts[i]] for i in range(len(labels))]
        # joint readout distribution for this sector (outer product of rows)
        joint = np.ones(1)
        for krow in kerns:
            joint = np.outer(joint, krow).ravel()
        joint = joint.reshape([k.size for k in kerns])
        for obs in itertools.product(*obs_ranges):
            w = float(joint[obs]) * p
            if w <= 0.0:
                continue
            if obs not in acc:
                acc[obs] = [0.0, np.zeros((rest_size, rest_size), dtype=complex)]
            acc[obs][0] += w
            if rem is not None:
                v = rem.amplitudes
                acc[obs][1] += w * np.outer(v, v.conj())
    outcomes = []
    for obs in sorted(acc):
        w, mat = acc[obs]
        post = DensityMatrix(rest_reg, mat / w) if rest_reg is not None else None
        outcomes.append(DetectionOutcome(obs, w, post))
    return outcomes


def count_class(m):
    """Collapse an observed count to the detector's three-way reading."""
    return m if m in (0, 1) else "many"
