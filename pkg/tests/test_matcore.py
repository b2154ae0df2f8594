import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from celkit import matcore
from celkit.errors import BranchCutHit, NotHermitian, NotUnitary, ValidationError


def test_as_cmat_rejects_bad_input():
    with pytest.raises(ValidationError):
        matcore.as_cmat(np.ones((2, 3)))
    with pytest.raises(ValidationError):
        matcore.as_cmat(np.array([[np.nan]]))


def test_op_norm_and_trace():
    a = np.diag([3.0, -4.0, 1.0])
    assert matcore.op_norm(a) == pytest.approx(4.0)
    assert matcore.normalized_trace(np.eye(5)) == pytest.approx(1.0)
    stack = np.stack([a, 2 * a])
    assert np.allclose(matcore.op_norm_batch(stack), [4.0, 8.0])
    assert np.allclose(matcore.op_norm_batch(np.array([[[3j]], [[-2.0]]])), [3.0, 2.0])


def test_herm_eig_checks_hermitian():
    with pytest.raises(NotHermitian):
        matcore.herm_eig(np.array([[0, 1], [0, 0]]))
    w, v = matcore.herm_eig(np.diag([2.0, -1.0]))
    assert np.allclose(w, [-1.0, 2.0])


def test_unitary_phases_of_diagonal():
    ph = np.array([0.3, -2.0, np.pi])
    u = np.diag(np.exp(1j * ph))
    got, v = matcore.unitary_eigphases(u)
    assert np.allclose(got, np.sort(ph))
    assert np.allclose((v * np.exp(1j * got)) @ v.conj().T, u)


def test_unitary_phases_rejects_nonunitary():
    with pytest.raises(NotUnitary):
        matcore.unitary_eigphases(2 * np.eye(2))


def test_degenerate_eigenbasis_is_orthonormal(rng):
    q = matcore.random_unitary(6, rng)
    u = (q * np.exp(1j * np.array([0.5, 0.5, 0.5, -1.0, -1.0, 2.0]))) @ q.conj().T
    ph, v = matcore.unitary_eigphases(u)
    assert np.allclose(v.conj().T @ v, np.eye(6), atol=1e-12)
    assert np.allclose((v * np.exp(1j * ph)) @ v.conj().T, u, atol=1e-12)


def test_exp_matches_scipy(rng):
    h = matcore.random_hermitian(5, rng, scale=3.0)
    assert np.allclose(matcore.mat_exp_i(h), scipy.linalg.expm(1j * h), atol=1e-12)
    assert np.allclose(matcore.mat_exp_i_batch(np.stack([h, -h]))[1], scipy.linalg.expm(-1j * h), atol=1e-12)


def test_principal_log_branch_cut():
    with pytest.raises(BranchCutHit):
        matcore.principal_log_unitary(np.diag([-1.0 + 0j, 1.0]))


@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_log_exp_roundtrip(n, seed):
    rng = np.random.default_rng(seed)
    h = matcore.random_hermitian(n, rng, scale=2.5)
    u = matcore.mat_exp_i(h)
    back = matcore.principal_log_unitary(u)
    assert np.allclose(back, h, atol=1e-9)


@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_random_unitary_is_unitary(n, seed):
    u = matcore.random_unitary(n, np.random.default_rng(seed))
    assert matcore.unitary_defect(u) < 1e-12


def test_wrap_phase_half_open():
    assert matcore.wrap_phase(-np.pi) == pytest.approx(np.pi)
    assert matcore.wrap_phase(3 * np.pi / 2) == pytest.approx(-np.pi / 2)
