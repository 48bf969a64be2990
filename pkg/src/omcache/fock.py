"""Truncated Fock-space machinery: mode registries, states and operators.

Everything here is dense numpy.  Systems of interest are small (a handful of
modes with single-digit Fock dimensions), so clarity wins over sparsity.
Mode order is the registry order; joint basis states are occupation tuples
enumerated in C order (last mode varies fastest), matching
``numpy.reshape(dims)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidState, TruncationError


class ModeRegistry:
    """Ordered collection of bosonic modes with per-mode truncation.

    Parameters
    ----------
    modes : sequence of (label, fock_dim)
        Labels may be any hashable (strings, tuples).  ``fock_dim`` is the
        number of retained Fock levels (occupations 0 .. fock_dim-1).
    """

    def __init__(self, modes):
        modes = list(modes)
        if not modes:
            raise DimensionMismatch("registry needs at least one mode")
        labels = [m[0] for m in modes]
        if len(set(labels)) != len(labels):
            raise DimensionMismatch("duplicate mode labels")
        self.labels = labels
        self.dims = tuple(int(m[1]) for m in modes)
        if any(d < 2 for d in self.dims):
            raise DimensionMismatch("each mode needs fock_dim >= 2")
        self.size = int(np.prod(self.dims))
        self._index = {lab: i for i, lab in enumerate(labels)}

    def axis(self, label):
        try:
            return self._index[label]
        except KeyError:
            raise DimensionMismatch(f"unknown mode label {label!r}") from None

    def dim(self, label):
        return self.dims[self.axis(label)]

    @property
    def modes(self):
        return list(zip(self.labels, self.dims))

    def __len__(self):
        return len(self.labels)

    def __eq__(self, other):
        return (
            isinstance(other, ModeRegistry)
            and self.labels == other.labels
            and self.dims == other.dims
        )

    def __repr__(self):
        inner = ", ".join(f"{l!r}:{d}" for l, d in zip(self.labels, self.dims))
        return f"ModeRegistry({inner})"

    # ---- operator builders -------------------------------------------------

    def destroy(self, label):
        """Dense annihilation operator for one mode, embedded in the full space."""
        return self.embed(label, _destroy(self.dim(label)))

    def create(self, label):
        return self.embed(label, _destroy(self.dim(label)).T.conj())

    def number(self, label):
        d = self.dim(label)
        return self.embed(label, np.diag(np.arange(d, dtype=float)))

    def total_number(self, labels=None):
        labels = self.labels if labels is None else labels
        out = np.zeros((self.size, self.size))
        for lab in labels:
            out += self.number(lab)
        return out

    def identity(self):
        return np.eye(self.size)

    def embed(self, label, op_single):
        """Kron-embed a single-mode operator at ``label`` (identity elsewhere)."""
        ax = self.axis(label)
        d = self.dims[ax]
        op_single = np.asarray(op_single)
        if op_single.shape != (d, d):
            raise DimensionMismatch(
                f"operator shape {op_single.shape} != mode dim {d}"
            )
        out = np.eye(1)
        for i, di in enumerate(self.dims):
            out = np.kron(out, op_single if i == ax else np.eye(di))
        return out

    # ---- basis helpers -----------------------------------------------------

    def basis_index(self, occupations):
        """Flat index of an occupation tuple."""
        occupations = tuple(occupations)
        if len(occupations) != len(self.dims):
            raise DimensionMismatch("occupation tuple has wrong length")
        for n, d in zip(occupations, self.dims):
            if not 0 <= n < d:
                raise DimensionMismatch(f"occupation {n} outside dim {d}")
        return int(np.ravel_multi_index(occupations, self.dims))

    def occupations(self, flat_index):
        return tuple(int(x) for x in np.unravel_index(flat_index, self.dims))

    def basis_state(self, occupations):
        vec = np.zeros(self.size, dtype=complex)
        vec[self.basis_index(occupations)] = 1.0
        return PureState(self, vec)


def _destroy(dim):
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1)


@dataclass
class PureState:
    """State vector over a registry."""

    registry: ModeRegistry
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if self.amplitudes.size != self.registry.size:
            raise DimensionMismatch("vector length != registry size")

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self):
        n = self.norm()
        if n == 0:
            raise InvalidState("cannot normalize the zero vector")
        return PureState(self.registry, self.amplitudes / n)

    def overlap(self, other):
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def expectation(self, op):
        v = self.amplitudes
        return complex(np.vdot(v, op @ v))

    def mean_occupation(self, label):
        pops = self.mode_populations(label)
        return float(np.dot(np.arange(pops.size), pops))

    def mode_populations(self, label):
        """Marginal occupation distribution of one mode."""
        ax = self.registry.axis(label)
        t = np.abs(self.amplitudes.reshape(self.registry.dims)) ** 2
        other = tuple(i for i in range(len(self.registry.dims)) if i != ax)
        return t.sum(axis=other)

    def to_density_matrix(self):
        v = self.amplitudes[:, None]
        return DensityMatrix(self.registry, v @ v.conj().T)

    def check_truncation(self, tol=1e-6):
        _check_top_levels(self, tol)

    def apply_mode_operator(self, label, op_single):
        """Apply a single-mode operator without building the full kron matrix."""
        ax = self.registry.axis(label)
        t = self.amplitudes.reshape(self.registry.dims)
        t = np.tensordot(np.asarray(op_single, dtype=complex), t, axes=([1], [ax]))
        t = np.moveaxis(t, 0, ax)
        return PureState(self.registry, t.reshape(-1))


@dataclass
class DensityMatrix:
    """Density operator over a registry.  ``validate()`` is explicit, not automatic."""

    registry: ModeRegistry
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        n = self.registry.size
        if self.matrix.shape != (n, n):
            raise DimensionMismatch("matrix shape != registry size")

    def trace(self):
        return float(np.real(np.trace(self.matrix)))

    def validate(self, tol=1e-9):
        m = self.matrix
        if np.linalg.norm(m - m.conj().T, ord="fro") > tol * max(1.0, self.trace()):
            raise InvalidState("density matrix is not hermitian")
        if abs(self.trace() - 1.0) > 1e-6:
            raise InvalidState(f"trace {self.trace()} != 1")
        w = np.linalg.eigvalsh((m + m.conj().T) / 2)
        if w.min() < -1e-9:
            raise InvalidState(f"negative eigenvalue {w.min():.3e}")
        return self

    def expectation(self, op):
        return complex(np.trace(op @ self.matrix))

    def purity(self):
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def fidelity_with_pure(self, psi):
        v = psi.amplitudes
        return float(np.real(np.vdot(v, self.matrix @ v)))

    def mean_occupation(self, label):
        pops = self.mode_populations(label)
        return float(np.dot(np.arange(pops.size), pops))

    def mode_populations(self, label):
        rho = self.partial_trace_keep([label]).matrix
        return np.real(np.diag(rho)).clip(min=0.0)

    def partial_trace_keep(self, keep_labels):
        """Reduced density matrix on ``keep_labels`` (registry order preserved)."""
        dims = self.registry.dims
        nd = len(dims)
        keep = sorted(self.registry.axis(l) for l in keep_labels)
        t = self.matrix.reshape(dims + dims)
        traced = 0
        for i in range(nd):
            if i in keep:
                continue
            ax = i - traced
            t = np.trace(t, axis1=ax, axis2=ax + (nd - traced))
            traced += 1
        kept_dims = [dims[i] for i in keep]
        size = int(np.prod(kept_dims))
        reg = ModeRegistry(
            [(self.registry.labels[i], dims[i]) for i in keep]
        )
        return DensityMatrix(reg, t.reshape(size, size))

    def check_truncation(self, tol=1e-6):
        _check_top_levels(self, tol)


def state_to_json(state):
    """Serialize a state (mode labels, dims, complex data as [re, im] pairs)."""
    import json

    kind = "pure" if isinstance(state, PureState) else "density"
    data = state.amplitudes if kind == "pure" else state.matrix
    flat = np.asarray(data).ravel()
    return json.dumps(
        {
            "modes": [[list(l) if isinstance(l, tuple) else l, d]
                      for l, d in state.registry.modes],
            "kind": kind,
            "data": [[float(z.real), float(z.imag)] for z in flat],
        }
    )


def state_from_json(text):
    import json

    doc = json.loads(text)
    reg = ModeRegistry(
        [(tuple(l) if isinstance(l, list) else l, d) for l, d in doc["modes"]]
    )
    flat = np.array([complex(re, im) for re, im in doc["data"]])
    if doc["kind"] == "pure":
        return PureState(reg, flat)
    return DensityMatrix(reg, flat.reshape(reg.size, reg.size))


def _check_top_levels(state, tol):
    for lab in state.registry.labels:
        pops = state.mode_populations(lab)
        if pops[-1] > tol:
            raise TruncationError(
                f"mode {lab!r}: top Fock level holds {pops[-1]:.3e} > {tol:.1e}"
            )


def make_thermal_state(registry, mode_label, n_th, tail_tol=1e-6):
    """Thermal (geometric) state on one mode, vacuum elsewhere.

    ``mode_label`` may also be a dict ``{label: n_th}`` for several thermal
    modes at once (the third argument is then ignored).  Populations are
    renormalized after truncation; if the discarded tail weight reaches
    ``tail_tol`` the truncation is considered too tight and raises.
    """
    if isinstance(mode_label, dict):
        occupations = mode_label
    else:
        occupations = {mode_label: n_th}
        registry.axis(mode_label)  # label check
    diags = []
    for lab, d in zip(registry.labels, registry.dims):
        nbar = float(occupations.get(lab, 0.0))
        if nbar < 0:
            raise InvalidState("negative thermal occupation")
        if nbar == 0:
            p = np.zeros(d)
            p[0] = 1.0
        else:
            r = nbar / (1.0 + nbar)
            tail = r**d  # geometric tail mass beyond the truncation
            if tail >= tail_tol:
                raise TruncationError(
                    f"mode {lab!r}: dim {d} leaves thermal tail {tail:.2e} "
                    f">= {tail_tol:.1e} at n_th={nbar}"
                )
            p = (1.0 - r) * r ** np.arange(d)
            p /= p.sum()
        diags.append(p)
    joint = np.eye(1)
    for p in diags:
        joint = np.kron(joint, np.diag(p))
    return DensityMatrix(registry, joint.astype(complex))


@dataclass
class KrausOp:
    """A single Kraus operator with an outcome label."""

    registry: ModeRegistry
    operator: np.ndarray
    label: object = None

    def __post_init__(self):
        self.operator = np.asarray(self.operator, dtype=complex)
        n = self.registry.size
        if self.operator.shape != (n, n):
            raise DimensionMismatch("Kraus operator shape != registry size")


@dataclass
class KrausOutcome:
    label: object
    probability: float
    state: object  # PureState or DensityMatrix (normalized), None if prob ~ 0


def apply_kraus(k, state):
    """Apply one Kraus operator; returns ``(conditional_state, probability)``.

    The conditional state is renormalized; a vanishing branch returns
    ``(None, 0.0)`` rather than dividing by ~0.
    """
    if k.registry != state.registry:
        raise DimensionMismatch("Kraus operator registry mismatch")
    if isinstance(state, PureState):
        v = k.operator @ state.amplitudes
        p = float(np.real(np.vdot(v, v)))
        if p <= 1e-300:
            return None, 0.0
        return PureState(state.registry, v / np.sqrt(p)), p
    m = k.operator @ state.matrix @ k.operator.conj().T
    p = float(np.real(np.trace(m)))
    if p <= 1e-300:
        return None, 0.0
    return DensityMatrix(state.registry, m / p), p


def apply_kraus_set(state, kraus_ops, require_complete=False, tol=1e-8):
    """Apply a set of Kraus operators as a generalized measurement.

    Returns a list of :class:`KrausOutcome`, one per operator, with Born-rule
    probabilities and normalized conditional states.  The set may be a
    sub-normalized fragment of a channel (probabilities then sum to < 1);
    ``require_complete=True`` enforces sum(K^dag K) == identity within ``tol``.
    """
    reg = state.registry
    for k in kraus_ops:
        if k.registry != reg:
            raise DimensionMismatch("Kraus operator registry mismatch")
    total = np.zeros((reg.size, reg.size), dtype=complex)
    for k in kraus_ops:
        total += k.operator.conj().T @ k.operator
    w = np.linalg.eigvalsh((total + total.conj().T) / 2)
    if w.max() > 1.0 + 1e-7:
        raise InvalidState(f"Kraus set exceeds unity: max eig {w.max():.6f}")
    if require_complete and np.abs(total - np.eye(reg.size)).max() > tol:
        raise InvalidState("Kraus set does not resolve the identity")
    out = []
    for k in kraus_ops:
        post, p = apply_kraus(k, state)
        out.append(KrausOutcome(k.label, p, post))
    return out
