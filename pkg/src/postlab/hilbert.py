"""Dense complex linear algebra for finite-dimensional state spaces.

States are 1-D complex arrays, operators 2-D complex arrays. The ``as_*``
helpers validate and return read-only copies, so values handed between
functions are never mutated in place.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    ClusterAmbiguity,
    CommutationError,
    DimensionMismatch,
    InvalidDecomposition,
    NotHermitian,
    NotNormalized,
    NumericFailure,
)
from .stats import RandomStream

MAX_DIM = 4096
EPS_NORM = 1e-10
EPS_HERM = 1e-10
EPS_UNIT = 1e-9
EPS_COMM = 1e-9
EPS_PROJ = 1e-9
EPS_DECOMP = 1e-8
TOL_CLUSTER = 1e-8
# Gaps within this factor above the clustering threshold are treated as ambiguous.
AMBIGUITY_FACTOR = 10.0

__all__ = [
    "ProjectorDecomposition",
    "as_state",
    "as_operator",
    "as_hermitian",
    "as_unitary",
    "basis_state",
    "uniform_state",
    "max_entry",
    "commutator_norm",
    "eigendecompose",
    "joint_decomposition",
    "evolve",
    "random_unitary",
    "random_state",
    "random_commuting_observables",
    "propagator",
    "PAULI",
]

PAULI = {
    "i": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
for _m in PAULI.values():
    _m.flags.writeable = False


def _frozen(a):
    a = np.array(a, dtype=complex)
    a.flags.writeable = False
    return a


def _check_dim(dim):
    if not 1 <= dim <= MAX_DIM:
        raise DimensionMismatch(f"dimension {dim} outside [1, {MAX_DIM}]")


def max_entry(a) -> float:
    """Max-entry (elementwise infinity) norm."""
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def as_state(psi, dim: int | None = None):
    """Validate a unit-norm state vector and return a read-only complex copy."""
    v = _frozen(psi)
    if v.ndim != 1:
        raise DimensionMismatch(f"state must be a vector, got shape {v.shape}")
    _check_dim(v.shape[0])
    if dim is not None and v.shape[0] != dim:
        raise DimensionMismatch(f"state has dimension {v.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(v)):
        raise NotNormalized("state has non-finite amplitudes")
    n2 = float(np.vdot(v, v).real)
    if abs(n2 - 1.0) > EPS_NORM:
        raise NotNormalized(f"squared norm {n2!r} differs from 1 by more than {EPS_NORM}")
    return v


def as_operator(a, dim: int | None = None):
    m = _frozen(a)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"operator must be square, got shape {m.shape}")
    _check_dim(m.shape[0])
    if dim is not None and m.shape[0] != dim:
        raise DimensionMismatch(f"operator has dimension {m.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(m)):
        raise NumericFailure("operator has non-finite entries")
    return m


def as_hermitian(a, dim: int | None = None):
    m = as_operator(a, dim)
    dev = max_entry(m - m.conj().T)
    if dev > EPS_HERM:
        raise NotHermitian(f"operator deviates from its adjoint by {dev:.3g}")
    return m


def as_unitary(u, dim: int | None = None):
    m = as_operator(u, dim)
    dev = max_entry(m @ m.conj().T - np.eye(m.shape[0]))
    if dev > EPS_UNIT:
        raise NumericFailure(f"matrix is not unitary (||UU^+ - I||_max = {dev:.3g})")
    return m


def basis_state(dim: int, k: int):
    v = np.zeros(dim, dtype=complex)
    v[k] = 1.0
    return _frozen(v)


def uniform_state(dim: int):
    return _frozen(np.full(dim, 1.0 / np.sqrt(dim), dtype=complex))


def commutator_norm(a, b) -> float:
    a = as_operator(a)
    b = as_operator(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"cannot commute {a.shape} with {b.shape}")
    return max_entry(a @ b - b @ a)


def _eigh(a):
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"eigensolver failed: {exc}") from exc
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(v))):
        raise NumericFailure("eigensolver returned non-finite values")
    return w, v


def _clusters(w, threshold):
    """Group sorted eigenvalues ``w``; returns a list of index arrays."""
    groups = []
    start = 0
    for i in range(1, len(w) + 1):
        if i == len(w) or w[i] - w[i - 1] >= threshold:
            gap = w[i] - w[i - 1] if i < len(w) else np.inf
            if gap < AMBIGUITY_FACTOR * threshold:
                raise ClusterAmbiguity(
                    f"eigenvalues {w[i - 1]!r} and {w[i]!r} are separated by {gap:.3g}, "
                    f"too close to the clustering threshold {threshold:.3g}"
                )
            if w[i - 1] - w[start] >= threshold:
                raise ClusterAmbiguity(
                    f"eigenvalue cluster [{w[start]!r}, {w[i - 1]!r}] spans more than "
                    f"the clustering threshold {threshold:.3g}"
                )
            groups.append(np.arange(start, i))
            start = i
    return groups


def _threshold(w, tol_cluster):
    spread = float(w[-1] - w[0]) if len(w) else 0.0
    return tol_cluster * max(spread, 1.0)


def eigendecompose(a, tol_cluster: float = TOL_CLUSTER, *, _threshold_override=None):
    """Spectral decomposition of a Hermitian operator with degenerate eigenvalues merged.

    Eigenvalues closer than ``tol_cluster`` times the spectral range (or times 1
    for ranges below 1) share one eigenspace.

    Returns
    -------
    list of (float, ndarray)
        Eigenvalue and an orthonormal basis of its eigenspace (columns), in
        increasing eigenvalue order.
    """
    a = as_hermitian(a)
    a = (a + a.conj().T) / 2
    w, v = _eigh(a)
    thr = _threshold(w, tol_cluster) if _threshold_override is None else _threshold_override
    out = []
    for idx in _clusters(w, thr):
        basis = np.ascontiguousarray(v[:, idx])
        basis.flags.writeable = False
        out.append((float(np.mean(w[idx])), basis))
    return out


@dataclass(frozen=True, eq=False)
class ProjectorDecomposition:
    """Complete orthogonal family of projectors, each with an outcome label tuple.

    ``bases[i]`` is an isometry whose columns span the range of
    ``projectors[i]``; projection norms are computed through it.
    """

    labels: tuple
    bases: tuple

    def __post_init__(self):
        if len(self.labels) != len(self.bases) or not self.labels:
            raise InvalidDecomposition("need one basis per label and at least one branch")
        if len(set(self.labels)) != len(self.labels):
            raise InvalidDecomposition("outcome labels must be pairwise distinct")
        dims = {b.shape[0] for b in self.bases}
        if len(dims) != 1:
            raise DimensionMismatch("branch bases live in different dimensions")
        if sum(b.shape[1] for b in self.bases) != self.dim:
            raise InvalidDecomposition("branch ranks do not add up to the dimension")
        projs = np.stack([b @ b.conj().T for b in self.bases])
        projs.flags.writeable = False
        object.__setattr__(self, "_projectors", projs)

    @property
    def dim(self) -> int:
        return self.bases[0].shape[0]

    @property
    def N(self) -> int:
        return len(self.labels)

    @property
    def projectors(self) -> np.ndarray:
        """Stacked projectors, shape ``(N, dim, dim)``."""
        return self._projectors

    @property
    def ranks(self) -> tuple:
        return tuple(b.shape[1] for b in self.bases)

    def __len__(self):
        return len(self.labels)

    @classmethod
    def from_bases(cls, labels, bases) -> "ProjectorDecomposition":
        """Build from orthonormal column bases and validate the family."""
        frozen = []
        for b in bases:
            b = np.array(b, dtype=complex)
            if b.ndim == 1:
                b = b[:, None]
            b.flags.writeable = False
            frozen.append(b)
        dec = cls(tuple(tuple(float(x) for x in lab) for lab in labels), tuple(frozen))
        dec.validate()
        return dec

    @classmethod
    def from_projectors(cls, labels, projectors) -> "ProjectorDecomposition":
        """Build from explicit projector matrices; each must be a Hermitian idempotent."""
        bases = []
        for k, p in enumerate(projectors):
            p = as_hermitian(p)
            dev = max_entry(p @ p - p)
            if dev > EPS_PROJ:
                raise InvalidDecomposition(f"projector {k} is not idempotent ({dev:.3g})")
            tr = float(np.trace(p).real)
            rank = int(round(tr))
            if abs(tr - rank) > EPS_PROJ or rank < 1:
                raise InvalidDecomposition(f"projector {k} has trace {tr!r}")
            w, v = _eigh((p + p.conj().T) / 2)
            bases.append(v[:, -rank:])
        return cls.from_bases(labels, bases)

    def validate(self, tol: float = EPS_DECOMP) -> None:
        """Check orthonormal bases, completeness and pairwise orthogonality."""
        for k, b in enumerate(self.bases):
            dev = max_entry(b.conj().T @ b - np.eye(b.shape[1]))
            if dev > tol:
                raise InvalidDecomposition(f"basis of branch {k} is not orthonormal ({dev:.3g})")
        full = np.hstack(self.bases)
        dev = max_entry(full.conj().T @ full - np.eye(self.dim))
        if dev > tol:
            raise InvalidDecomposition(f"projectors are not complete and orthogonal ({dev:.3g})")

    def conjugate(self, u) -> "ProjectorDecomposition":
        """The family ``U P_i U^+`` with unchanged labels."""
        u = as_unitary(u, self.dim)
        return ProjectorDecomposition.from_bases(self.labels, [u @ b for b in self.bases])

    def operator(self, column: int = 0):
        """Reconstruct ``sum_i x_i P_i`` from the ``column``-th entry of each label."""
        vals = np.array([lab[column] for lab in self.labels])
        return np.tensordot(vals, self.projectors, axes=1)

    def index(self, label, atol: float = 1e-9) -> int:
        """Branch index whose label matches ``label`` entrywise within ``atol``."""
        label = tuple(np.atleast_1d(np.asarray(label, dtype=float)))
        for i, lab in enumerate(self.labels):
            if len(lab) == len(label) and np.allclose(lab, label, rtol=0.0, atol=atol):
                return i
        raise KeyError(label)

    def match(self, other: "ProjectorDecomposition", tol: float = 1e-7):
        """Bijection ``i -> j`` with ``P_i == Q_j`` within ``tol``, or None."""
        if other.dim != self.dim or other.N != self.N:
            return None
        mapping = {}
        used = set()
        for i, p in enumerate(self.projectors):
            for j, q in enumerate(other.projectors):
                if j not in used and self.ranks[i] == other.ranks[j] and max_entry(p - q) < tol:
                    mapping[i] = j
                    used.add(j)
                    break
            else:
                return None
        return mapping


def joint_decomposition(observables: Sequence, tol_cluster: float = TOL_CLUSTER) -> ProjectorDecomposition:
    """Projectors onto the common eigenspaces of a commuting set of observables.

    Each branch is labelled by the tuple of eigenvalues, one per observable in
    the given order. The first operator is diagonalized, then every eigenspace
    is refined by diagonalizing each following operator restricted to it.
    Branches are returned in lexicographic label order.
    """
    ops = [as_hermitian(a) for a in observables]
    if not ops:
        raise InvalidDecomposition("observable set is empty")
    dim = ops[0].shape[0]
    for k, a in enumerate(ops):
        if a.shape[0] != dim:
            raise DimensionMismatch(f"observable {k} has dimension {a.shape[0]}, expected {dim}")
    for i in range(len(ops)):
        for j in range(i + 1, len(ops)):
            c = commutator_norm(ops[i], ops[j])
            if c >= EPS_COMM:
                raise CommutationError(f"observables {i} and {j} do not commute (||[A,B]||_max = {c:.3g})")

    branches = [((), np.eye(dim, dtype=complex))]
    for a in ops:
        a = (a + a.conj().T) / 2
        thr = _threshold(_eigh(a)[0], tol_cluster)
        refined = []
        for label, v in branches:
            sub = v.conj().T @ a @ v
            for val, w in eigendecompose((sub + sub.conj().T) / 2, _threshold_override=thr):
                refined.append((label + (val,), v @ w))
        branches = refined
    branches.sort(key=lambda b: b[0])
    labels = [b[0] for b in branches]
    return ProjectorDecomposition.from_bases(labels, [b[1] for b in branches])


def evolve(state, h, t: float):
    """``exp(-iHt)|psi>`` via the spectral decomposition of ``H``."""
    psi = as_state(state)
    h = as_hermitian(h, psi.shape[0])
    if not np.isfinite(t):
        raise ValueError("evolution time must be finite")
    w, v = _eigh((h + h.conj().T) / 2)
    out = v @ (np.exp(-1j * w * t) * (v.conj().T @ psi))
    return _frozen(out)


def propagator(h, t: float):
    """The unitary ``exp(-iHt)``."""
    h = as_hermitian(h)
    w, v = _eigh((h + h.conj().T) / 2)
    return _frozen((v * np.exp(-1j * w * t)) @ v.conj().T)


def _haar(dim, stream: RandomStream):
    z = stream.complex_normal((dim, dim))
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    ph = np.where(np.abs(d) > 0, d / np.where(np.abs(d) > 0, np.abs(d), 1.0), 1.0)
    return q * ph


def random_unitary(dim: int, seed) -> np.ndarray:
    """Haar-distributed unitary from the QR factorization of a seeded Gaussian matrix.

    ``seed`` may be an int or a :class:`RandomStream` (which is advanced).
    """
    _check_dim(dim)
    stream = seed if isinstance(seed, RandomStream) else RandomStream(seed)
    return as_unitary(_haar(dim, stream))


def random_state(dim: int, stream: RandomStream):
    _check_dim(dim)
    z = stream.complex_normal(dim)
    return as_state(z / np.linalg.norm(z))


def random_commuting_observables(dim: int, m: int, stream: RandomStream, *, max_blocks: int | None = None):
    """``m`` commuting observables sharing a random eigenbasis, with random degeneracies.

    Each observable assigns distinct integer eigenvalues to the blocks of a
    random partition of the shared eigenbasis.
    """
    u = _haar(dim, stream)
    ops = []
    for _ in range(m):
        nblocks = int(stream.integers(1, (max_blocks or dim) + 1))
        nblocks = min(nblocks, dim)
        assign = stream.integers(0, nblocks, size=dim)
        assign[stream.permutation(dim)[:nblocks]] = np.arange(nblocks)
        values = stream.permutation(np.arange(-dim - 3, dim + 4))[:nblocks].astype(float)
        d = values[assign]
        ops.append(_frozen((u * d) @ u.conj().T))
    return ops
