"""Generators for the worked examples: the two-cluster unitary, the
block family with a defect summand, and finite stages of the inductive
system built from identity copies and point evaluations.

All generated paths are diagonal in the standard basis and carry their
analytic form, so refinement is exact.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import matcore
from .errors import InsufficientMultiplicity, InvalidDefect, InvalidParams
from .pathalg import (ExpFactorization, HermitianPath, UnitaryPath, evaluate_at, make_grid,
                      uniform_grid)


def theta0(n):
    """Top phase ``(2 - 1/(n-1)) * pi`` of the two-cluster example."""
    return (2.0 - 1.0 / (n - 1)) * np.pi


@dataclass(frozen=True)
class UniexamParams:
    n: int
    grid: np.ndarray = field(default_factory=uniform_grid)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise InvalidParams("n must be an integer >= 2")
        object.__setattr__(self, "grid", make_grid(self.grid))


@dataclass(frozen=True)
class Ex2Params:
    n: int
    m: int
    k: int = 0
    defect_phases: tuple = None
    grid: np.ndarray = field(default_factory=uniform_grid)

    def __post_init__(self):
        if self.n < 2 or self.m < 1 or self.k < 0:
            raise InvalidParams("need n >= 2, m >= 1, k >= 0")
        phases = default_defect_phases(self.k) if self.defect_phases is None else self.defect_phases
        phases = tuple(float(p) for p in phases)
        if len(phases) != self.k:
            raise InvalidParams(f"expected {self.k} defect phases, got {len(phases)}")
        prod = np.prod(np.exp(1j * np.array(phases))) if phases else 1.0
        if abs(prod - 1.0) > 1e-10:
            raise InvalidDefect(f"defect eigenvalues multiply to {prod:.6g}, not 1")
        object.__setattr__(self, "defect_phases", phases)
        object.__setattr__(self, "grid", make_grid(self.grid))

    @property
    def N(self):
        return self.m * self.n + self.k

    @property
    def theta0(self):
        return theta0(self.n)


def default_defect_phases(k):
    """``2 pi (j - (k-1)/2) / k``: equally spaced, summing to zero."""
    return tuple(2 * np.pi * (j - (k - 1) / 2) / k for j in range(k))


def _diag_path(phase_fn, grid, meta):
    def func(t):
        ph = phase_fn(np.atleast_1d(np.asarray(t, dtype=float)))
        out = np.zeros(ph.shape + (ph.shape[-1],), dtype=complex)
        idx = np.arange(ph.shape[-1])
        out[:, idx, idx] = np.exp(1j * ph)
        return out

    return UnitaryPath.from_function(func, grid, meta=meta)


def uniexam_phases(n, t):
    """Exponents (radians) of the two-cluster unitary at times ``t``: shape (len(t), n)."""
    t = np.atleast_1d(t)
    th = theta0(n)
    ph = np.empty((t.size, n))
    ph[:, 0] = th * t
    ph[:, 1:] = (-th * t / (n - 1))[:, None]
    return ph


def gen_uniexam(params, grid=None):
    """Two-cluster unitary ``u(t) = e^{i th t} e_1 + e^{-i th t/(n-1)} (1 - e_1)``.

    ``params`` is a :class:`UniexamParams` or the integer ``n``.

    Returns
    -------
    u : UnitaryPath
    h : HermitianPath
        Exponent in units of pi, ``u = exp(i pi h)``; traceless.
    F : ExpFactorization
        Single-term factorization with exponent ``pi h``.
    """
    if not isinstance(params, UniexamParams):
        params = UniexamParams(int(params), uniform_grid() if grid is None else grid)
    n, g = params.n, params.grid
    meta = {"generator": "uniexam", "n": n}
    u = _diag_path(lambda t: uniexam_phases(n, t), g, meta)

    def hfunc(t):
        ph = uniexam_phases(n, t) / np.pi
        out = np.zeros(ph.shape + (n,), dtype=complex)
        out[:, np.arange(n), np.arange(n)] = ph
        return out

    h = HermitianPath.from_function(hfunc, g)
    F = ExpFactorization([h.scaled(np.pi)])
    return u, h, F


def ex2_phases(params, t):
    t = np.atleast_1d(t)
    n, m, k = params.n, params.m, params.k
    th = params.theta0
    ph = np.empty((t.size, params.N))
    ph[:, :m] = (th * t)[:, None]
    ph[:, m:m * n] = (-th * t / (n - 1))[:, None]
    if k:
        ph[:, m * n:] = np.array(params.defect_phases)[None, :]
    return ph


def gen_ex2(params=None, **kw):
    """Block path ``e^{i th t} P1 + e^{-i th t/(n-1)} P2 + v0`` in ``M_N``, ``N = mn + k``.

    ``P1`` has rank ``m`` (first coordinates), ``P2`` rank ``(n-1) m``, and the
    constant defect ``v0 = sum lambda_j e_j`` occupies the last ``k``.
    """
    if params is None:
        params = Ex2Params(**kw)
    meta = {"generator": "ex2", "n": params.n, "m": params.m, "k": params.k,
            "defect_phases": list(params.defect_phases)}
    return _diag_path(lambda t: ex2_phases(params, t), params.grid, meta)


def natural_log_ex2(params):
    """The exponent ``t th P1 - t th/(n-1) P2 + log v0`` (radians) of :func:`gen_ex2`."""
    def hfunc(t):
        ph = ex2_phases(params, t)
        out = np.zeros(ph.shape + (ph.shape[-1],), dtype=complex)
        idx = np.arange(ph.shape[-1])
        out[:, idx, idx] = ph
        return out

    return HermitianPath.from_function(hfunc, params.grid)


@dataclass
class InductiveStage:
    """One connecting map ``A_k -> A_{k+1}`` of the inductive system.

    ``multiplicities[j][i]`` is the number of copies of source summand ``j``
    inside target summand ``i``; ``k`` of the copies of every partial map are
    point evaluations at ``t(i, k) = i / (k + 1)``.
    """

    k: int
    source_dims: list
    multiplicities: list

    def __post_init__(self):
        if self.k < 0:
            raise InvalidParams("stage index must be >= 0")
        ms = np.asarray(self.multiplicities, dtype=int)
        if ms.ndim != 2 or ms.shape[0] != len(self.source_dims):
            raise InvalidParams("multiplicities must be a (source, target) matrix")

    @property
    def target_dims(self):
        ms = np.asarray(self.multiplicities, dtype=int)
        return [int(x) for x in np.asarray(self.source_dims, dtype=int) @ ms]

    @property
    def evaluation_points(self):
        return [i / (self.k + 1) for i in range(1, self.k + 1)]

    @property
    def partition(self):
        return [0.0] + self.evaluation_points + [1.0]


def _block_diag_samples(blocks):
    g = blocks[0].shape[0]
    return np.stack([scipy.linalg.block_diag(*[b[i] for b in blocks]) for i in range(g)])


def _block_diag_func(funcs):
    def func(t):
        parts = [f(t) for f in funcs]
        return _block_diag_samples(parts)

    return func


def inductive_step(f, stage, j=0, i=0):
    """Partial map ``diag(f, ..., f, f(t(1,k)), ..., f(t(k,k)))``.

    ``M(j, i, k) - k`` moving copies of ``f`` followed by ``k`` constant
    point evaluations.
    """
    M = int(np.asarray(stage.multiplicities)[j][i])
    k = stage.k
    if M < k:
        raise InsufficientMultiplicity(f"multiplicity {M} < number of point evaluations {k}")
    frozen = [evaluate_at(f, t) for t in stage.evaluation_points]
    g = f.grid.size

    def frozen_func(c):
        return lambda t: np.broadcast_to(c, (np.size(t),) + c.shape).copy()

    parts = [f.samples] * (M - k) + [np.broadcast_to(c, (g,) + c.shape) for c in frozen]
    samples = _block_diag_samples(parts)
    func = None
    if f.func is not None:
        func = _block_diag_func([f.func] * (M - k) + [frozen_func(c) for c in frozen])
    blocks = _image_blocks(f, M, k, stage.evaluation_points)
    meta = {"generator": "inductive_step", "blocks": blocks, "stage": k}
    return UnitaryPath(f.grid, samples, func=func, meta=meta)


def _image_blocks(f, M, k, points):
    src = f.meta.get("blocks")
    if src is None:
        src = [{"kind": "moving", "size": f.n}]
    out = []
    for _ in range(M - k):
        out.extend(dict(b) for b in src)
    for t in points:
        for b in src:
            if b["kind"] == "moving":
                out.append({"kind": "frozen", "size": b["size"], "at": t, "rank_p1": b.get("rank_p1"),
                            "rank_p2": b.get("rank_p2"), "rank_defect": b.get("rank_defect")})
            else:
                out.append(dict(b))
    return out


def default_multiplicity(k):
    """Desk-scale multiplicity ``2k + 3`` used at connecting map ``k``."""
    return 2 * k + 3


def gen_ex2ml_stage(n, d, stages, k=None, multiplicities=None, grid=None):
    """Image of ``w = u_1 + ... + u_m`` after ``stages`` connecting maps.

    Block ``u_j`` is the two-cluster path of :func:`gen_ex2` with ``m = d[j]``
    and ``k[j]`` defect coordinates, so ``r(j) = d[j] n + k[j]``.  The first
    map sends every source summand into a single target summand; later maps
    are single-summand.  ``multiplicities[s]`` overrides the multiplicity of
    map ``s + 1`` (default :func:`default_multiplicity`).

    Returns the image path and the list of :class:`InductiveStage` objects.
    """
    grid = uniform_grid(33) if grid is None else make_grid(grid)
    d = [int(x) for x in d]
    k = [0] * len(d) if k is None else [int(x) for x in k]
    if any(x < 1 for x in d) or len(k) != len(d) or any(not 0 <= x < n for x in k):
        raise InvalidParams("need d(j) >= 1 and 0 <= k(j) < n for every block")
    blocks = []
    for dj, kj in zip(d, k):
        p = Ex2Params(n=n, m=dj, k=kj, grid=grid)
        b = gen_ex2(p)
        b.meta["blocks"] = [{"kind": "moving", "size": p.N, "rank_p1": dj, "rank_p2": (n - 1) * dj,
                             "rank_defect": kj}]
        blocks.append(b)
    history = []
    if stages == 0:
        w = _direct_sum(blocks)
        return w, history
    for s in range(1, stages + 1):
        M = default_multiplicity(s) if multiplicities is None else int(multiplicities[s - 1])
        stage = InductiveStage(k=s, source_dims=[b.n for b in blocks],
                               multiplicities=[[M] for _ in blocks])
        images = [inductive_step(b, stage, j, 0) for j, b in enumerate(blocks)]
        blocks = [_direct_sum(images)]
        history.append(stage)
    return blocks[0], history


def _direct_sum(paths):
    if len(paths) == 1:
        return paths[0]
    samples = _block_diag_samples([p.samples for p in paths])
    func = None
    if all(p.func is not None for p in paths):
        func = _block_diag_func([p.func for p in paths])
    blocks = []
    for p in paths:
        blocks.extend(p.meta.get("blocks", [{"kind": "moving", "size": p.n}]))
    return UnitaryPath(paths[0].grid, samples, func=func, meta={"generator": "direct_sum", "blocks": blocks})


def block_ranks(path):
    """Exact ``(rank P1, rank P2, rank defect/frozen)`` from the block record."""
    p1 = p2 = rest = 0
    for b in path.meta.get("blocks", []):
        if b["kind"] == "moving":
            p1 += b["rank_p1"]
            p2 += b["rank_p2"]
            rest += b["rank_defect"]
        else:
            rest += b["size"]
    return p1, p2, rest


def gen_random_detone(n, seed=0, grid=None, scale=None):
    """Random path ``exp(i A1 phi1(t)) exp(i A2 phi2(t))`` with traceless ``A_i``.

    ``det u(t) = 1`` holds identically.  The ``phi_i`` are smooth and do not
    vanish at ``t = 0``, so ``u(0)`` is a generic det-one unitary.
    """
    rng = np.random.default_rng(seed)
    grid = uniform_grid() if grid is None else make_grid(grid)
    scale = np.pi if scale is None else scale
    a1 = matcore.random_hermitian(n, rng, scale=scale, traceless=True)
    a2 = matcore.random_hermitian(n, rng, scale=scale, traceless=True)
    c = rng.uniform(-1.0, 1.0, size=2)
    amp = rng.uniform(0.3, 1.0, size=2)
    freq = rng.integers(1, 3, size=2)
    ph = rng.uniform(0, 2 * np.pi, size=2)

    def phis(t):
        return [c[i] + amp[i] * np.sin(2 * np.pi * freq[i] * t + ph[i]) for i in range(2)]

    def func(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        p1, p2 = phis(t)
        e1 = matcore.mat_exp_i_batch(a1[None] * p1[:, None, None])
        e2 = matcore.mat_exp_i_batch(a2[None] * p2[:, None, None])
        return e1 @ e2

    meta = {"generator": "random-detone", "n": n, "seed": seed}
    return UnitaryPath.from_function(func, grid, meta=meta)


def gen_random_path(n, seed=0, grid=None, scale=1.0, closed=False):
    """Random smooth unitary path ``V exp(i t A) exp(i sin(pi t) B)``.

    With ``closed=True`` the path is a loop ``V exp(i sin(pi t) B) exp(2 pi i t D)``
    where ``D`` is an integer diagonal in a random basis, so it winds nontrivially.
    """
    rng = np.random.default_rng(seed)
    grid = uniform_grid() if grid is None else make_grid(grid)
    v = matcore.random_unitary(n, rng)
    b = matcore.random_hermitian(n, rng, scale=scale)
    if closed:
        w = matcore.random_unitary(n, rng)
        dvals = rng.integers(-2, 3, size=n)
        d = (w * dvals) @ w.conj().T

        def func(t):
            t = np.atleast_1d(np.asarray(t, dtype=float))
            eb = matcore.mat_exp_i_batch(b[None] * np.sin(np.pi * t)[:, None, None])
            ed = matcore.mat_exp_i_batch(2 * np.pi * d[None] * t[:, None, None])
            return v[None] @ eb @ ed
    else:
        a = matcore.random_hermitian(n, rng, scale=scale)

        def func(t):
            t = np.atleast_1d(np.asarray(t, dtype=float))
            ea = matcore.mat_exp_i_batch(a[None] * t[:, None, None])
            eb = matcore.mat_exp_i_batch(b[None] * np.sin(np.pi * t)[:, None, None])
            return v[None] @ ea @ eb

    return UnitaryPath.from_function(func, grid, meta={"generator": "random", "n": n, "seed": seed})


def geodesic_path(u, v, grid=None):
    """``t -> u exp(i t log(u^* v))``: shortest path from ``u`` to ``v``."""
    grid = uniform_grid() if grid is None else make_grid(grid)
    u = matcore.as_cmat(u)
    h = matcore.principal_log_unitary(u.conj().T @ matcore.as_cmat(v), tol=1e-6)

    def func(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return u[None] @ matcore.mat_exp_i_batch(h[None] * t[:, None, None])

    return UnitaryPath.from_function(func, grid)
