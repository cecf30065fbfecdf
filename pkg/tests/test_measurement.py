import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from postlab.errors import InvariantViolation, OffSupportError
from postlab.hilbert import (
    PAULI,
    basis_state,
    joint_decomposition,
    random_commuting_observables,
    random_state,
    uniform_state,
)
from postlab.measurement import (
    APP,
    BORN,
    TAU,
    MeasurementRule,
    collapse,
    distribution,
    generalized,
    parse_rule,
    sample_indices,
    sample_outcome,
    support_count,
)
from postlab.stats import RandomStream

RULES = [BORN, APP, generalized(0.25), generalized(0.5), generalized(0.75)]


def brute_force_app(psi, projectors, tau):
    """Equal weights over branches with a nonvanishing projection, via full matrix products."""
    norms = [np.vdot(p @ psi, p @ psi).real for p in projectors]
    live = [n > tau for n in norms]
    k = sum(live)
    return np.array([1.0 / k if f else 0.0 for f in live])


@pytest.fixture
def rank_one_5():
    return joint_decomposition([np.diag([1.0, 2.0, 3.0, 4.0, 5.0])])


def test_support_uniform_state(rank_one_5):
    n, flags = support_count(uniform_state(5), rank_one_5)
    assert n == 5 and flags.all()


def test_support_eigenstate(rank_one_5):
    n, flags = support_count(basis_state(5, 2), rank_one_5)
    assert n == 1 and flags.tolist() == [False, False, True, False, False]


def test_support_two_of_three():
    dec = joint_decomposition([np.diag([1.0, 2.0, 3.0])])
    psi = np.array([1, 1, 0]) / math.sqrt(2)
    n, _ = support_count(psi, dec)
    assert n == 2


def test_support_all_below_threshold_is_an_invariant_violation(rank_one_5):
    with pytest.raises(InvariantViolation):
        support_count(uniform_state(5), rank_one_5, tau=1.0)


def test_app_coarse_x(paper_x):
    d = distribution(uniform_state(5), joint_decomposition([paper_x]), APP)
    assert d[10] == 0.5 and d[20] == 0.5


def test_app_fine_y(paper_y):
    d = distribution(uniform_state(5), joint_decomposition([paper_y]), APP)
    assert d.probabilities.tolist() == [0.2] * 5


def test_born_qubit():
    psi = np.array([math.sqrt(0.9), math.sqrt(0.1)])
    d = distribution(psi, joint_decomposition([PAULI["z"]]), BORN)
    assert d[1] == pytest.approx(0.9, abs=1e-15)
    assert d[-1] == pytest.approx(0.1, abs=1e-15)


def test_generalized_half():
    psi = np.array([math.sqrt(0.9), math.sqrt(0.1)])
    d = distribution(psi, joint_decomposition([PAULI["z"]]), generalized(0.5))
    # 0.5 * 0.5 + 0.5 * 0.9 and 0.5 * 0.5 + 0.5 * 0.1
    assert d[1] == pytest.approx(0.70, abs=1e-15)
    assert d[-1] == pytest.approx(0.30, abs=1e-15)


@pytest.mark.parametrize("rule", RULES, ids=str)
def test_eigenstate_certain(rule, rank_one_5):
    d = distribution(basis_state(5, 3), rank_one_5, rule)
    assert d.probabilities[3] == pytest.approx(1.0, abs=1e-15)


def test_collapse_qubit():
    psi = np.array([1, 1]) / math.sqrt(2)
    dec = joint_decomposition([PAULI["z"]])
    out = collapse(psi, dec, dec.index(1))
    assert np.allclose(out, [1, 0], atol=1e-15)


def test_collapse_eigenstate_fixed_point(rank_one_5):
    psi = basis_state(5, 1)
    out = collapse(psi, rank_one_5, 1)
    assert abs(np.vdot(psi, out)) > 1 - 1e-10


def test_collapse_coarse_branch(paper_x):
    dec = joint_decomposition([paper_x])
    out = collapse(uniform_state(5), dec, dec.index(20))
    assert np.allclose(out, [0, 0.5, 0.5, 0.5, 0.5], atol=1e-14)


def test_collapse_off_support(rank_one_5):
    with pytest.raises(OffSupportError):
        collapse(basis_state(5, 0), rank_one_5, 4)


def test_sample_certain_branch():
    dec = joint_decomposition([PAULI["z"]])
    s = RandomStream(0)
    for _ in range(50):
        i, post = sample_outcome(basis_state(2, 0), dec, BORN, TAU, s)
        assert dec.labels[i] == (1.0,)


def test_sample_deterministic(rank_one_5):
    a, b = RandomStream(17), RandomStream(17)
    seq_a = [sample_outcome(uniform_state(5), rank_one_5, APP, TAU, a)[0] for _ in range(100)]
    seq_b = [sample_outcome(uniform_state(5), rank_one_5, APP, TAU, b)[0] for _ in range(100)]
    assert seq_a == seq_b


def test_sample_frequencies_uniform(rank_one_5):
    # binomial standard error sqrt(0.2 * 0.8 / 1e5) ~= 0.00126
    s = RandomStream(123)
    p = distribution(uniform_state(5), rank_one_5, APP).probabilities
    idx = sample_indices(p, 100_000, s)
    freq = np.bincount(idx, minlength=5) / 100_000
    assert np.all(np.abs(freq - 0.2) < 0.006)


def test_batch_sampling_matches_sequential(rank_one_5):
    p = distribution(random_state(5, RandomStream(2)), rank_one_5, BORN).probabilities
    batch = sample_indices(p, 200, RandomStream(8))
    s = RandomStream(8)
    seq = [int(sample_indices(p, 1, s)[0]) for _ in range(200)]
    assert batch.tolist() == seq


def test_sampling_never_returns_zero_probability():
    p = np.array([0.0, 0.5, 0.0, 0.5, 0.0])
    idx = sample_indices(p, 10_000, RandomStream(3))
    assert set(idx.tolist()) <= {1, 3}


def test_rule_parsing_round_trip():
    for r in RULES:
        assert parse_rule(str(r)) == r
    with pytest.raises(ValueError):
        MeasurementRule("generalized", 1.5)
    with pytest.raises(ValueError):
        MeasurementRule("app", 0.3)


def _random_case(seed):
    s = RandomStream(seed)
    d = int(s.integers(1, 8))
    dec = joint_decomposition(random_commuting_observables(d, int(s.integers(1, 3)), s))
    psi = random_state(d, s)
    if dec.N > 1 and s.random() < 0.5:
        # remove a random subset of branches from the state
        drop = s.permutation(dec.N)[: int(s.integers(1, dec.N))]
        v = psi - sum(dec.projectors[i] @ psi for i in drop)
        psi = v / np.linalg.norm(v)
    return dec, psi


def test_distribution_totals_one():
    worst = 0.0
    for seed in range(10_000):
        dec, psi = _random_case(seed)
        for r in (BORN, APP, generalized(seed % 11 / 10)):
            worst = max(worst, abs(distribution(psi, dec, r).probabilities.sum() - 1.0))
    assert worst < 1e-10


@settings(max_examples=300, deadline=None)
@given(seed=st.integers(0, 2**40))
def test_generalized_endpoints_match_born_and_app(seed):
    dec, psi = _random_case(seed)
    born = distribution(psi, dec, BORN).probabilities
    app = distribution(psi, dec, APP).probabilities
    assert np.max(np.abs(distribution(psi, dec, generalized(0.0)).probabilities - born)) <= 1e-12
    assert np.max(np.abs(distribution(psi, dec, generalized(1.0)).probabilities - app)) <= 1e-12


@settings(max_examples=300, deadline=None)
@given(seed=st.integers(0, 2**40))
def test_app_matches_brute_force_and_excludes_off_support(seed):
    dec, psi = _random_case(seed)
    expected = brute_force_app(psi, dec.projectors, TAU)
    assert np.array_equal(distribution(psi, dec, APP).probabilities, expected)
    _, flags = support_count(psi, dec)
    for r in RULES:
        p = distribution(psi, dec, r).probabilities
        if r == BORN:
            assert np.all(p[~flags] <= TAU)
        else:
            assert np.all(p[~flags] == 0.0)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**40))
def test_repeated_measurement_gives_same_branch(seed):
    dec, psi = _random_case(seed)
    s = RandomStream(seed)
    for r in RULES:
        i, post = sample_outcome(psi, dec, r, TAU, s)
        again = distribution(post, dec, r).probabilities
        assert again[i] == pytest.approx(1.0, abs=1e-12)
