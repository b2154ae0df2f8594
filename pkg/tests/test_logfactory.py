import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from celkit import examples, logfactory, matcore
from celkit.errors import DuplicateEntries, NonIntegerSum, NotDetOne, ValidationError
from celkit.pathalg import UnitaryPath, uniform_grid


def assert_selection_invariants(sel):
    assert abs(sel.a.sum()) <= 1e-12
    assert np.all(np.abs(sel.a) < 1)
    assert sel.a.max() - sel.a.min() < 1


def test_select_k_zero():
    sel = logfactory.branch_select_zero_sum([1 / 3, -1 / 3, 0])
    assert sel.k == 0
    assert np.allclose(sel.a, [1 / 3, -1 / 3, 0])


def test_select_k_positive():
    sel = logfactory.branch_select_zero_sum([0.5, 0.4, 0.1])
    assert sel.k == 1
    assert np.allclose(sel.a, [-0.5, 0.4, 0.1])
    assert sel.shifted_indices == {0}
    assert sel.spread == pytest.approx(0.9)
    assert_selection_invariants(sel)


def test_select_k_minus_one():
    sel = logfactory.branch_select_zero_sum([-0.45, -0.35, -0.2])
    assert sel.k == -1
    assert np.allclose(sel.a, [0.55, -0.35, -0.2])
    assert_selection_invariants(sel)


def test_select_errors():
    with pytest.raises(NonIntegerSum):
        logfactory.branch_select_zero_sum([0.1, 0.2])
    with pytest.raises(DuplicateEntries):
        logfactory.branch_select_zero_sum([0.25, 0.25, 0.5])
    with pytest.raises(ValidationError):
        logfactory.branch_select_zero_sum([-0.5, 0.5])


@st.composite
def integer_sum_phases(draw):
    n = draw(st.integers(2, 8))
    seed = draw(st.integers(0, 2**31 - 1))
    rng = np.random.default_rng(seed)
    b = rng.uniform(-0.5, 0.5, size=n - 1)
    last = -b.sum()
    last -= np.round(last)
    b = np.append(b, last if last > -0.5 else 0.5)
    return b


@given(integer_sum_phases())
def test_selection_invariants_property(b):
    if np.min(np.diff(np.sort(b))) < 1e-9:
        return
    sel = logfactory.branch_select_zero_sum(b)
    assert_selection_invariants(sel)
    for j in range(b.size):
        shift = -1 if sel.k >= 1 else 1
        expected = b[j] + shift if j in sel.shifted_indices else b[j]
        assert sel.a[j] == pytest.approx(expected, abs=1e-9)


def test_constant_diagonal_log():
    u = np.diag(np.exp(2j * np.pi * np.array([1 / 3, -1 / 3, 0])))
    P = UnitaryPath.constant(u, uniform_grid(9))
    h, u1 = logfactory.trace_zero_log_path(P, 1e-6)
    assert np.allclose(np.sort(np.linalg.eigvalsh(h.samples[0])), [-1 / 3, 0, 1 / 3])
    assert h.sup_norm() == pytest.approx(1 / 3)


def test_rejects_det_not_one():
    P = UnitaryPath.constant(np.diag([1j, 1.0]), uniform_grid(5))
    with pytest.raises(NotDetOne):
        logfactory.trace_zero_log_path(P, 1e-3)


def test_near_identity_start():
    u = examples.gen_uniexam(3)[0]
    eps = 1e-5
    res = logfactory.trace_zero_log_path(u, eps)
    w = np.linalg.eigvalsh(res.h.samples[0])
    assert np.abs(w).max() < eps
    assert abs(w.sum()) < 1e-12


@pytest.mark.parametrize("n", [2, 3, 5, 8])
def test_uniexam_log(n):
    u = examples.gen_uniexam(n)[0]
    res = logfactory.trace_zero_log_path(u, 1e-6)
    rep = logfactory.verify_log_certificate(u, res.h, 1e-6, res.u1)
    assert rep.ok, rep.violations[:3]
    # never above the natural exponent (which has spread > 1 near t = 1)
    natural = examples.theta0(n) / (2 * np.pi)
    assert rep.sup_norm <= natural + 1e-6


@given(st.integers(2, 6), st.integers(0, 10_000))
def test_random_detone_log_roundtrip(n, seed):
    P = examples.gen_random_detone(n, seed=seed, grid=129)
    res = logfactory.trace_zero_log_path(P, 1e-6)
    rep = logfactory.verify_log_certificate(P, res.h, 1e-6, res.u1)
    assert rep.ok, rep.violations[:3]
    e = matcore.mat_exp_i_batch(2 * np.pi * res.h.samples)
    assert np.abs(e - res.u1.samples).max() < 1e-10
    assert rep.length_bound < 2 * np.pi


def test_verify_flags_injected_trace():
    P = examples.gen_random_detone(3, seed=5, grid=65)
    res = logfactory.trace_zero_log_path(P, 1e-6)
    hs = res.h.samples.copy()
    hs[17] += 0.01 * np.eye(3)
    rep = logfactory.verify_log_certificate(P, hs, 1e-2)
    assert ("trace", 17) in [(v[0], v[1]) for v in rep.violations]


def test_result_unpacks():
    P = examples.gen_random_detone(2, seed=1, grid=33)
    h, u1 = logfactory.trace_zero_log_path(P, 1e-6)
    assert h.n == 2 and u1.n == 2
