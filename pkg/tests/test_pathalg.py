import numpy as np
import pytest

from celkit import examples, matcore
from celkit.errors import AliasingError, BoundViolated, InvalidGrid, NotUnitary
from celkit.pathalg import (ExpFactorization, HermitianPath, UnitaryPath, eval_factorization,
                            evaluate_at, homotopy_length, lipschitz_check, make_grid, path_length,
                            refine, subdivide_grid, uniform_grid)


def scalar_loop(k=1, points=65):
    return UnitaryPath.from_function(lambda t: np.exp(2j * np.pi * k * np.asarray(t))[:, None, None],
                                     uniform_grid(points))


def test_grid_validation():
    with pytest.raises(InvalidGrid):
        make_grid([0.0, 0.5])
    with pytest.raises(InvalidGrid):
        make_grid([0.0, 0.6, 0.5, 1.0])
    assert make_grid(5).tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]


def test_subdivide_keeps_points():
    g = make_grid([0.0, 0.3, 1.0])
    fine = subdivide_grid(g, 4)
    assert fine.size == 9
    assert np.array_equal(fine[::4], g)


def test_rejects_nonunitary_and_aliasing():
    with pytest.raises(NotUnitary):
        UnitaryPath([0.0, 1.0], np.stack([np.eye(2), 2 * np.eye(2)]))
    with pytest.raises(AliasingError):
        UnitaryPath([0.0, 1.0], np.stack([np.eye(1), -np.eye(1)]))


def test_circle_length_converges():
    # inscribed polygon perimeter 2 m sin(pi/m)
    P = scalar_loop(points=257)
    m = 256
    assert path_length(P) == pytest.approx(2 * m * np.sin(np.pi / m), rel=1e-12)
    assert path_length(refine(P)) > path_length(P)


def test_refine_keeps_samples_and_uses_geodesics():
    P = scalar_loop(points=9)
    Q = UnitaryPath(P.grid, P.samples)
    R = refine(Q, 2)
    assert np.array_equal(R.samples[::2], Q.samples)
    assert np.allclose(R.samples[1, 0, 0], np.exp(2j * np.pi / 16))


def test_evaluate_at_interpolates():
    P = scalar_loop(points=9)
    Q = UnitaryPath(P.grid, P.samples)
    assert np.allclose(evaluate_at(Q, 0.1), np.exp(0.2j * np.pi))
    assert np.allclose(evaluate_at(P, 0.1), np.exp(0.2j * np.pi))


def test_concat_and_reverse():
    P = scalar_loop(points=17)
    R = P.reversed()
    C = P.concat(R)
    assert C.grid.size == 33
    assert C.is_closed()


def test_factorization_endpoints():
    u, h, F = examples.gen_uniexam(4, grid=33)
    assert np.allclose(eval_factorization(F, 0.0).samples, u.samples)
    assert np.allclose(eval_factorization(F, 1.0).samples, np.eye(4))
    assert F.total_norm == pytest.approx(examples.theta0(4))


def test_homotopy_length_matches_norm():
    u, h, F = examples.gen_uniexam(5, grid=17)
    s = uniform_grid(2049)
    L = homotopy_length(F, s, t_index=-1)
    assert L[-1] == pytest.approx(1.75 * np.pi, abs=1e-3)


class _UnderstatedNorm(ExpFactorization):
    @property
    def total_norm(self):
        return 1.0


def test_lipschitz_violation_detected():
    u, h, F = examples.gen_uniexam(3, grid=9)
    with pytest.raises(BoundViolated):
        lipschitz_check(_UnderstatedNorm(F.terms), samples=10)


def test_lipschitz_holds_for_uniexam():
    u, h, F = examples.gen_uniexam(5, grid=33)
    assert lipschitz_check(F, samples=20).worst_ratio <= 1 + 1e-9


def test_hermitian_path_exp():
    g = uniform_grid(5)
    hs = np.stack([np.diag([t, -t]) for t in g]).astype(complex)
    H = HermitianPath(g, hs)
    assert H.sup_norm() == pytest.approx(1.0)
    e = H.exp_i(np.pi)
    assert np.allclose(e[-1], np.diag([-1, -1]))
    assert matcore.unitary_defect_batch(e).max() < 1e-12
