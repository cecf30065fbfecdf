import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from postlab.errors import (
    ClusterAmbiguity,
    CommutationError,
    DimensionMismatch,
    NotHermitian,
    NotNormalized,
)
from postlab.hilbert import (
    PAULI,
    ProjectorDecomposition,
    as_state,
    basis_state,
    commutator_norm,
    eigendecompose,
    evolve,
    joint_decomposition,
    max_entry,
    propagator,
    random_commuting_observables,
    random_state,
    random_unitary,
    uniform_state,
)
from postlab.stats import RandomStream


def random_hermitian(d, stream):
    z = stream.complex_normal((d, d))
    return (z + z.conj().T) / 2


# commutator_norm

def test_diagonal_matrices_commute():
    assert commutator_norm(np.diag([1, 2]), np.diag([3, 4])) == 0


def test_pauli_commutator():
    # [sx, sz] = -2i sy, largest entry modulus 2
    assert commutator_norm(PAULI["x"], PAULI["z"]) == pytest.approx(2.0, abs=1e-15)


def test_identity_commutes_with_anything():
    h = random_hermitian(3, RandomStream(3))
    assert commutator_norm(np.eye(3), h) == 0


def test_commutator_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        commutator_norm(np.eye(2), np.eye(3))


# eigendecompose

def test_eigendecompose_coarse_x(paper_x):
    out = eigendecompose(paper_x, 1e-8)
    assert [v for v, _ in out] == [10.0, 20.0]
    assert [b.shape[1] for _, b in out] == [1, 4]


def test_eigendecompose_identity():
    ((val, basis),) = eigendecompose(np.eye(3))
    assert val == pytest.approx(1.0)
    assert basis.shape == (3, 3)


def test_eigendecompose_sigma_z():
    out = eigendecompose(PAULI["z"])
    assert [v for v, _ in out] == pytest.approx([-1.0, 1.0])
    assert all(b.shape[1] == 1 for _, b in out)


def test_eigendecompose_bases_orthonormal_and_spanning():
    s = RandomStream(11)
    (a,) = random_commuting_observables(7, 1, s, max_blocks=3)
    out = eigendecompose(a)
    full = np.hstack([b for _, b in out])
    assert max_entry(full.conj().T @ full - np.eye(7)) < 1e-9


def test_eigendecompose_rejects_straddling_values():
    with pytest.raises(ClusterAmbiguity):
        eigendecompose(np.diag([0.0, 3e-8, 1.0]))


def test_eigendecompose_rejects_non_hermitian():
    with pytest.raises(NotHermitian):
        eigendecompose(np.array([[0, 1], [0, 0]]))


# joint_decomposition

def test_joint_fine_and_coarse(paper_x, paper_y):
    dec = joint_decomposition([paper_x, paper_y])
    assert dec.labels == ((10.0, 1.0), (20.0, 2.0), (20.0, 3.0), (20.0, 4.0), (20.0, 5.0))
    assert dec.ranks == (1,) * 5


def test_joint_coarse_alone(paper_x):
    dec = joint_decomposition([paper_x])
    assert dec.labels == ((10.0,), (20.0,))
    assert dec.ranks == (1, 4)


def test_joint_identity():
    dec = joint_decomposition([np.eye(2)])
    assert dec.labels == ((1.0,),)
    assert max_entry(dec.projectors[0] - np.eye(2)) < 1e-12


def test_joint_rejects_non_commuting():
    with pytest.raises(CommutationError):
        joint_decomposition([PAULI["x"], PAULI["z"]])


def _check_family(dec, ops):
    P = dec.projectors
    assert max_entry(P.sum(axis=0) - np.eye(dec.dim)) < 1e-8
    for i in range(dec.N):
        for j in range(dec.N):
            if i != j:
                assert max_entry(P[i] @ P[j]) < 1e-8
    for k, a in enumerate(ops):
        assert max_entry(dec.operator(k) - a) < 1e-7


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32), dim=st.integers(1, 9), m=st.integers(1, 3))
def test_joint_decomposition_complete_orthogonal_reconstructs(seed, dim, m):
    ops = random_commuting_observables(dim, m, RandomStream(seed))
    _check_family(joint_decomposition(ops), ops)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32), dim=st.integers(2, 8))
def test_joint_decomposition_order_independent(seed, dim):
    ops = random_commuting_observables(dim, 3, RandomStream(seed))
    a = joint_decomposition(ops)
    b = joint_decomposition(ops[::-1])
    assert a.match(b, tol=1e-7) is not None


def test_projector_decomposition_from_projectors_validates():
    with pytest.raises(Exception):
        ProjectorDecomposition.from_projectors([(0,), (1,)], [np.diag([1, 0]), np.diag([1, 0])])
    dec = ProjectorDecomposition.from_projectors([(0,), (1,)], [np.diag([1, 0]), np.diag([0, 1])])
    assert dec.N == 2


# evolve

def test_evolve_zero_time_is_identity():
    psi = random_state(4, RandomStream(1))
    h = random_hermitian(4, RandomStream(2))
    assert max_entry(evolve(psi, h, 0.0) - psi) < 1e-12


def test_evolve_sigma_x_half_pi():
    out = evolve(basis_state(2, 0), PAULI["x"], np.pi / 2)
    # cos t I - i sin t sx applied to |0>
    assert max_entry(out - np.array([0, -1j])) < 1e-12
    assert np.abs(out) ** 2 == pytest.approx([0.0, 1.0], abs=1e-12)


def test_evolve_eigenstate_only_gains_phase():
    out = evolve(basis_state(2, 0), PAULI["z"], 1.234)
    assert abs(np.vdot(basis_state(2, 0), out)) == pytest.approx(1.0, abs=1e-12)


def test_evolve_matches_pade_exponential():
    s = RandomStream(5)
    for d in (2, 3, 6):
        h = random_hermitian(d, s)
        psi = random_state(d, s)
        expected = scipy.linalg.expm(-1j * h * 0.7) @ psi
        assert max_entry(evolve(psi, h, 0.7) - expected) < 1e-10
        assert max_entry(propagator(h, 0.7) @ psi - expected) < 1e-10


def test_evolve_preserves_norm():
    s = RandomStream(9)
    worst = 0.0
    for k in range(1000):
        d = 1 + k % 8
        psi = random_state(d, s)
        h = random_hermitian(d, s) * 10
        t = float(s.normal()) * 10
        worst = max(worst, abs(np.linalg.norm(evolve(psi, h, t)) - 1.0))
    assert worst < 1e-9


def test_evolve_rejects_unnormalized():
    with pytest.raises(NotNormalized):
        evolve(np.array([1.0, 1.0]), PAULI["z"], 1.0)


# random_unitary

def test_random_unitary_dim_one_is_phase():
    u = random_unitary(1, 3)
    assert abs(abs(u[0, 0]) - 1.0) < 1e-12


def test_random_unitary_deterministic():
    assert np.array_equal(random_unitary(4, 7), random_unitary(4, 7))
    assert not np.array_equal(random_unitary(4, 7), random_unitary(4, 8))


def test_random_unitary_is_unitary():
    u = random_unitary(3, 1)
    assert max_entry(u @ u.conj().T - np.eye(3)) < 1e-9


def test_values_are_read_only():
    psi = uniform_state(3)
    with pytest.raises(ValueError):
        psi[0] = 0
    assert as_state(psi) is not psi
