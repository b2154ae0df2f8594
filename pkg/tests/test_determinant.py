import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from celkit import determinant, examples, matcore
from celkit.determinant import TraceLattice
from celkit.errors import BranchCutHit, EndpointMismatch, LogUndefined
from celkit.pathalg import UnitaryPath, uniform_grid


def scalar_path(f, points=129):
    return UnitaryPath.from_function(lambda t: np.exp(1j * f(np.asarray(t)))[:, None, None],
                                     uniform_grid(points))


def test_unit_loop_has_det_one():
    rep = determinant.dls_determinant(scalar_path(lambda t: 2 * np.pi * t))
    assert rep.value == pytest.approx(1.0)
    assert rep.residue == 0.0


def test_constant_path_zero():
    P = UnitaryPath.constant(np.diag(np.exp(1j * np.array([0.3, -1.0]))), uniform_grid(5))
    assert determinant.dls_determinant(P).value == pytest.approx(0.0, abs=1e-15)


def test_scalar_rotation_number():
    # path from e^{i th} to 1 along the phase: Det = -th / (2 pi)
    th = 1.2
    P = scalar_path(lambda t: th * (1 - t))
    r = determinant.rotation_number(np.exp(1j * th) * np.eye(1), np.eye(1), P)
    assert r.value == pytest.approx(-th / (2 * np.pi))


def test_endpoint_mismatch():
    P = scalar_path(lambda t: t)
    with pytest.raises(EndpointMismatch):
        determinant.rotation_number(np.eye(1), np.eye(1), P)


def test_branch_cut_guard():
    P = UnitaryPath([0.0, 1.0], np.stack([np.eye(1), np.exp(1j * (np.pi - 1e-7)) * np.eye(1)]))
    with pytest.raises(BranchCutHit):
        determinant.dls_determinant(P)


def test_det_winding_matches():
    P = examples.gen_random_path(3, seed=4, closed=True)
    rep = determinant.dls_determinant(P)
    assert rep.scaled == pytest.approx(determinant.det_winding(P), abs=1e-9)


def test_lattice_distance():
    lat = TraceLattice(4)
    assert lat.distance(0.26) == pytest.approx(0.01)
    assert lat.residue(0.5 - 1e-13) == 0.0


def test_cu_membership():
    assert determinant.cu_membership(examples.gen_random_detone(3, seed=1))
    assert not determinant.cu_membership(scalar_path(lambda t: t))


def test_triv_log_undefined():
    u = np.diag([-1.0 + 0j, 1.0])
    with pytest.raises(LogUndefined):
        determinant.triv_log_term(u, np.eye(2), np.eye(2))


@given(st.integers(2, 5), st.integers(0, 2**31 - 1))
def test_triv_identity_random(n, seed):
    rng = np.random.default_rng(seed)
    u = matcore.random_unitary(n, rng)
    w = matcore.random_unitary(n, rng)
    k = matcore.random_hermitian(n, rng, scale=0.5)
    v = w @ u @ w.conj().T @ matcore.mat_exp_i(k)
    conn = examples.geodesic_path(u, v, grid=129)
    assert determinant.check_triv_identity(u, v, w, conn) <= 1e-8


def test_rotation_number_path_independent():
    rng = np.random.default_rng(3)
    u = matcore.random_unitary(3, rng)
    v = u @ matcore.mat_exp_i(matcore.random_hermitian(3, rng, scale=1.0))
    direct = examples.geodesic_path(u, v, grid=129)
    loop = examples.gen_random_path(3, seed=9, grid=257, closed=True)
    detour = UnitaryPath(loop.grid, u[None] @ loop.start.conj().T[None] @ loop.samples).concat(direct)
    r1 = determinant.rotation_number(u, v, direct)
    r2 = determinant.rotation_number(u, v, detour)
    assert r1.agrees_with(r2)
    assert abs(r1.value - r2.value) > 0.1  # the detour winds
