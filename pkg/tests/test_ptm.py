import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qitomo import ptm
from qitomo.errors import ValidationError
from qitomo.models import random_channel, random_instrument

seeds = st.integers(0, 2**32 - 1)


def test_pauli_basis_orthonormal():
    B = ptm.pauli_basis(2)
    gram = np.einsum("kij,lji->kl", B, B)
    assert np.allclose(gram, np.eye(4))


def test_identity_and_state_vectors():
    assert np.allclose(ptm.basis_state(0), [1 / np.sqrt(2), 0, 0, 1 / np.sqrt(2)])
    assert np.allclose(ptm.identity_effect(), [np.sqrt(2), 0, 0, 0])
    assert ptm.identity_effect() @ ptm.basis_state(1) == pytest.approx(1.0)


def test_rotation_matches_unitary():
    th = 0.37
    U = np.cos(th / 2) * np.eye(2) - 1j * np.sin(th / 2) * np.array([[0, 1], [1, 0]])
    assert np.allclose(ptm.rotation("x", th), ptm.ptm_from_unitary(U))


def test_rotation_pi_over_two_about_x():
    G = ptm.rotation("x", np.pi / 2)
    assert np.allclose(G @ ptm.basis_state(0), ptm.state_vec(
        0.5 * np.array([[1, 1j], [-1j, 1]])))


def test_depolarizing_ptm():
    assert np.allclose(ptm.depolarizing(0.2), np.diag([1, 0.8, 0.8, 0.8]))


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_choi_round_trip(seed):
    G = random_channel(np.random.default_rng(seed), rank=3)
    assert np.allclose(ptm.ptm_of(ptm.choi_of(G)), G, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_random_channels_are_cptp(seed):
    G = random_channel(np.random.default_rng(seed))
    assert ptm.is_tp(G) and ptm.is_cp(G)
    J = ptm.choi_of(G)
    assert np.allclose(np.trace(J), 2.0)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_project_cptp_is_idempotent_and_cptp(seed):
    rng = np.random.default_rng(seed)
    G = random_channel(rng) + 0.05 * np.vstack([np.zeros(4), rng.standard_normal((3, 4))])
    P = ptm.project_cptp(G)
    assert ptm.is_tp(P) and ptm.is_cp(P)
    assert np.allclose(ptm.project_cptp(P), P, atol=1e-7)


def test_non_cp_map_detected():
    G = np.diag([1.0, 1.0, 1.0, -1.0])  # transpose-like: positive but not CP
    assert ptm.is_tp(G)
    assert not ptm.is_cp(G)
    assert ptm.choi_min_eigenvalue(G) < 0


def test_state_fidelity():
    assert ptm.state_fidelity(ptm.basis_state(0), ptm.basis_state(0)) == pytest.approx(1.0)
    assert ptm.state_fidelity(ptm.basis_state(0), ptm.basis_state(1)) == pytest.approx(0.0, abs=1e-12)
    plus = ptm.state_vec(0.5 * np.ones((2, 2)))
    assert ptm.state_fidelity(plus, ptm.basis_state(0)) == pytest.approx(0.5)


def test_target_instrument():
    Q = ptm.measure_prepare_instrument()
    assert Q.is_tp() and Q.is_cp()
    assert Q[0][0, 0] == pytest.approx(0.5) and Q[0][3, 3] == pytest.approx(0.5)
    out = ptm.instrument_apply(Q, ptm.basis_state(1))
    assert out[0][0] == pytest.approx(0.0, abs=1e-12)
    assert out[1][0] == pytest.approx(1.0)
    assert np.allclose(out[1][1], ptm.basis_state(1))


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_instrument_branch_probabilities_sum_to_one(seed):
    rng = np.random.default_rng(seed)
    Q = random_instrument(rng, m=3)
    rho = ptm.apply(random_channel(rng), ptm.basis_state(0))
    out = ptm.instrument_apply(Q, rho)
    assert sum(p for p, _ in out) == pytest.approx(1.0)


def test_instrument_rejects_mismatched_branches():
    with pytest.raises(ValidationError):
        ptm.QuantumInstrument([np.eye(4), np.eye(3)])
