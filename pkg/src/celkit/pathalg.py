"""Grid-sampled unitary paths, homotopies and exponential factorizations.

A :class:`UnitaryPath` is a map ``[0, 1] -> U(n)`` known at the points of a
grid.  Paths built by the generators also carry the analytic map itself
(``func``), so refinement evaluates the exact path instead of interpolating.
"""

import numpy as np

from . import matcore
from .errors import AliasingError, BoundViolated, InvalidGrid, NotHermitian, NotUnitary, ValidationError

DEFAULT_GRID_POINTS = 257
ALIAS_BOUND = 2.0


def uniform_grid(points=DEFAULT_GRID_POINTS):
    if points < 2:
        raise InvalidGrid("a grid needs at least two points")
    return np.linspace(0.0, 1.0, int(points))


def make_grid(points):
    """Validate and return a grid as a float array.

    A grid is strictly increasing with endpoints exactly 0 and 1.  An
    integer is read as a point count for a uniform grid.
    """
    if isinstance(points, (int, np.integer)):
        return uniform_grid(points)
    g = np.asarray(points, dtype=float)
    if g.ndim != 1 or g.size < 2:
        raise InvalidGrid("grid must be a 1-d array with at least two points")
    if g[0] != 0.0 or g[-1] != 1.0:
        raise InvalidGrid(f"grid endpoints must be exactly 0 and 1, got {g[0]!r}, {g[-1]!r}")
    if np.any(np.diff(g) <= 0):
        raise InvalidGrid("grid must be strictly increasing")
    return g


def subdivide_grid(grid, factor):
    factor = int(factor)
    if factor < 2:
        raise ValidationError("refinement factor must be >= 2")
    fine = [grid[:-1, None] + (grid[1:, None] - grid[:-1, None]) * (np.arange(factor) / factor)[None, :]]
    out = np.concatenate([fine[0].ravel(), grid[-1:]])
    out[::factor] = grid
    return out


def _hermitize(a):
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


class UnitaryPath:
    """Sampled unitary path.

    Parameters
    ----------
    grid : array_like
        Strictly increasing points from 0 to 1.
    samples : array_like
        Array of shape ``(len(grid), n, n)``.
    func : callable, optional
        Vectorized analytic form ``t_array -> samples``; used by :func:`refine`.
    tol : float
        Unitarity tolerance.
    """

    def __init__(self, grid, samples, func=None, tol=matcore.DEFAULT_TOL, meta=None, check=True):
        self.grid = make_grid(grid)
        s = np.asarray(samples, dtype=complex)
        if s.ndim != 3 or s.shape[0] != self.grid.size or s.shape[1] != s.shape[2]:
            raise ValidationError(
                f"samples must have shape ({self.grid.size}, n, n), got {s.shape}")
        if not np.all(np.isfinite(s)):
            raise ValidationError("samples contain non-finite entries")
        self.samples = s
        self.n = s.shape[1]
        self.func = func
        self.tol = tol
        self.meta = dict(meta or {})
        if check:
            self._validate()

    def _validate(self):
        defects = matcore.unitary_defect_batch(self.samples)
        bad = int(np.argmax(defects))
        if defects[bad] > self.tol:
            raise NotUnitary(
                f"sample {bad} (t={self.grid[bad]:.6g}) has unitary defect {defects[bad]:.3e}")
        steps = self.step_norms()
        if steps.size and steps.max() >= ALIAS_BOUND:
            i = int(np.argmax(steps))
            raise AliasingError(
                f"||U[{i + 1}] - U[{i}]|| = {steps[i]:.6f} >= 2; path is undersampled")

    @classmethod
    def from_function(cls, func, grid=None, **kw):
        grid = uniform_grid() if grid is None else make_grid(grid)
        return cls(grid, func(grid), func=func, **kw)

    @classmethod
    def constant(cls, u, grid=None):
        u = matcore.as_cmat(u)
        grid = uniform_grid() if grid is None else make_grid(grid)

        def func(t):
            return np.broadcast_to(u, (np.size(t),) + u.shape).copy()

        return cls.from_function(func, grid)

    def __len__(self):
        return self.grid.size

    def __repr__(self):
        return f"UnitaryPath(n={self.n}, points={self.grid.size})"

    @property
    def start(self):
        return self.samples[0]

    @property
    def end(self):
        return self.samples[-1]

    def is_closed(self, atol=1e-8):
        return matcore.op_norm(self.samples[-1] - self.samples[0]) <= atol

    def step_norms(self):
        return matcore.op_norm_batch(np.diff(self.samples, axis=0))

    def max_step(self):
        steps = self.step_norms()
        return float(steps.max()) if steps.size else 0.0

    def sup_distance(self, other):
        """``max_t ||self(t) - other(t)||`` over the shared grid."""
        if not np.array_equal(self.grid, other.grid):
            raise ValidationError("paths live on different grids")
        return float(matcore.op_norm_batch(self.samples - other.samples).max())

    def concat(self, other):
        """Run ``self`` on [0, 1/2] then ``other`` on [1/2, 1]."""
        if matcore.op_norm(self.end - other.start) > 1e-8:
            raise ValidationError("paths do not meet")
        grid = np.concatenate([0.5 * self.grid, 0.5 + 0.5 * other.grid[1:]])
        samples = np.concatenate([self.samples, other.samples[1:]])
        return UnitaryPath(grid, samples, tol=max(self.tol, other.tol))

    def reversed(self):
        return UnitaryPath(1.0 - self.grid[::-1], self.samples[::-1].copy(), tol=self.tol)

    def det(self):
        return np.linalg.det(self.samples)


class HermitianPath:
    """Sampled path of Hermitian matrices (the exponents ``h_j`` of a factorization)."""

    def __init__(self, grid, samples, func=None, tol=matcore.DEFAULT_TOL, check=True):
        self.grid = make_grid(grid)
        s = np.asarray(samples, dtype=complex)
        if s.ndim != 3 or s.shape[0] != self.grid.size or s.shape[1] != s.shape[2]:
            raise ValidationError(f"samples must have shape ({self.grid.size}, n, n), got {s.shape}")
        if check:
            d = matcore.op_norm_batch(s - np.conj(np.swapaxes(s, -1, -2)))
            if d.max() > tol:
                i = int(np.argmax(d))
                raise NotHermitian(f"sample {i} has hermitian defect {d[i]:.3e}")
        self.samples = _hermitize(s)
        self.n = s.shape[1]
        self.func = func
        self._eig = None

    @classmethod
    def from_function(cls, func, grid=None, **kw):
        grid = uniform_grid() if grid is None else make_grid(grid)
        return cls(grid, func(grid), func=func, **kw)

    def __repr__(self):
        return f"HermitianPath(n={self.n}, points={self.grid.size})"

    def norms(self):
        return matcore.op_norm_batch(self.samples)

    def sup_norm(self):
        return float(self.norms().max())

    def traces(self):
        """Normalized trace at every grid point (real part)."""
        return matcore.normalized_trace_batch(self.samples).real

    def eig(self):
        if self._eig is None:
            self._eig = np.linalg.eigh(self.samples)
        return self._eig

    def exp_i(self, scale=1.0):
        """Samples of ``exp(i * scale * h(t))``."""
        w, v = self.eig()
        return (v * np.exp(1j * scale * w)[:, None, :]) @ np.conj(np.swapaxes(v, -1, -2))

    def scaled(self, c):
        func = None if self.func is None else (lambda t, f=self.func: c * f(t))
        return HermitianPath(self.grid, c * self.samples, func=func, check=False)


class ExpFactorization:
    """Ordered product ``u(t) = prod_j exp(i h_j(t))`` of Hermitian paths."""

    def __init__(self, terms):
        terms = list(terms)
        if not terms:
            raise ValidationError("a factorization needs at least one term")
        grid = terms[0].grid
        n = terms[0].n
        for h in terms[1:]:
            if not np.array_equal(h.grid, grid) or h.n != n:
                raise ValidationError("factorization terms must share grid and dimension")
        self.terms = terms
        self.grid = grid
        self.n = n

    @property
    def total_norm(self):
        return float(sum(h.sup_norm() for h in self.terms))

    def samples_at(self, s, t_index=None):
        """Samples of ``u_s(t) = prod_j exp(i h_j(t) (1 - s))``."""
        scale = 1.0 - float(s)
        out = None
        for h in self.terms:
            w, v = h.eig()
            if t_index is not None:
                w, v = w[t_index], v[t_index]
            e = (v * np.exp(1j * scale * w)[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))
            out = e if out is None else out @ e
        return out

    def func_at(self, s):
        if any(h.func is None for h in self.terms):
            return None
        scale = 1.0 - float(s)

        def func(t):
            out = None
            for h in self.terms:
                e = matcore.mat_exp_i_batch(scale * h.func(np.atleast_1d(t)))
                out = e if out is None else out @ e
            return out

        return func


class Homotopy:
    """Samples ``W(t, s)`` on a product grid; ``samples[j, i] = W(t_i, s_j)``."""

    def __init__(self, t_grid, s_grid, samples, tol=matcore.DEFAULT_TOL):
        self.t_grid = make_grid(t_grid)
        self.s_grid = make_grid(s_grid)
        s = np.asarray(samples, dtype=complex)
        if s.shape[:2] != (self.s_grid.size, self.t_grid.size):
            raise ValidationError("samples must be indexed [s, t]")
        self.samples = s
        self.n = s.shape[-1]
        for j in range(self.s_grid.size):
            UnitaryPath(self.t_grid, s[j], tol=tol)
        for i in range(self.t_grid.size):
            UnitaryPath(self.s_grid, s[:, i], tol=tol)

    def s_slice(self, j):
        return UnitaryPath(self.t_grid, self.samples[j], check=False)

    def t_slice(self, i):
        return UnitaryPath(self.s_grid, self.samples[:, i], check=False)

    def s_length(self):
        """Length of ``s -> W(., s)`` in the sup norm over t (chord sum)."""
        d = matcore.op_norm_batch(np.diff(self.samples, axis=0))
        return float(d.max(axis=1).sum())


def eval_factorization(F, s):
    """The path ``t -> prod_j exp(i h_j(t) (1 - s))``."""
    s = float(s)
    if not 0.0 <= s <= 1.0:
        raise ValidationError("s must lie in [0, 1]")
    return UnitaryPath(F.grid, F.samples_at(s), func=F.func_at(s))


def eval_homotopy(F, s_grid):
    s_grid = make_grid(s_grid)
    samples = np.stack([F.samples_at(s) for s in s_grid])
    return Homotopy(F.grid, s_grid, samples)


def path_length(P):
    """Chord-sum length ``sum ||U[i+1] - U[i]||``.

    This is a lower bound for the rectifiable length and never decreases
    under refinement.
    """
    return float(P.step_norms().sum())


def homotopy_length(F, s_grid, t_index=None):
    """Cumulative chord length of ``s -> u_s`` measured in the sup norm over t.

    With ``t_index`` given, only that t (or those t's) enter the sup.
    Returns an array of the same size as ``s_grid`` starting at 0.
    """
    s_grid = make_grid(s_grid)
    prev = F.samples_at(s_grid[0], t_index)
    cum = np.zeros(s_grid.size)
    for j in range(1, s_grid.size):
        cur = F.samples_at(s_grid[j], t_index)
        d = cur - prev
        step = matcore.op_norm_batch(d if d.ndim == 3 else d[None]).max()
        cum[j] = cum[j - 1] + step
        prev = cur
    return cum


class LipschitzReport:
    def __init__(self, worst_ratio, witness, total_norm, checked):
        self.worst_ratio = worst_ratio
        self.witness = witness
        self.total_norm = total_norm
        self.checked = checked

    def __repr__(self):
        return (f"LipschitzReport(worst_ratio={self.worst_ratio:.6g}, "
                f"r={self.total_norm:.6g}, checked={self.checked})")


def lipschitz_check(F, samples=40, seed=0, slack=1e-6):
    """Check ``||u_{s1}(t) - u_{s2}(t)|| <= r |s1 - s2|`` with ``r = F.total_norm``.

    ``samples`` random pairs ``(s1, s2)`` are drawn; each pair is checked at
    every grid point, so ``samples * len(F.grid)`` triples are examined.
    """
    if samples < 2:
        raise ValidationError("need at least two samples")
    rng = np.random.default_rng(seed)
    r = F.total_norm
    worst, witness = 0.0, None
    pairs = rng.uniform(0.0, 1.0, size=(int(samples), 2))
    for s1, s2 in pairs:
        if s1 == s2:
            continue
        d = matcore.op_norm_batch(F.samples_at(s1) - F.samples_at(s2))
        if r == 0.0:
            ratio = np.where(d > 0, np.inf, 0.0)
        else:
            ratio = d / (r * abs(s1 - s2))
        i = int(np.argmax(ratio))
        if ratio[i] > worst or witness is None:
            worst, witness = float(ratio[i]), (float(F.grid[i]), float(s1), float(s2))
    report = LipschitzReport(worst, witness, r, int(samples) * F.grid.size)
    if worst > 1.0 + slack:
        raise BoundViolated(f"Lipschitz ratio {worst:.6g} exceeds 1 at (t, s1, s2)={witness}",
                            witness=witness)
    return report


def refine(P, factor=2):
    """Subdivide every grid interval into ``factor`` pieces.

    Original samples are kept bit-for-bit.  New samples come from ``P.func``
    when available, otherwise from the geodesic ``U_i exp(i theta log(U_i^* U_{i+1}))``.
    """
    fine = subdivide_grid(P.grid, factor)
    factor = int(factor)
    if P.func is not None:
        samples = np.asarray(P.func(fine), dtype=complex).copy()
    else:
        samples = np.empty((fine.size, P.n, P.n), dtype=complex)
        thetas = np.arange(1, factor) / factor
        for i in range(P.grid.size - 1):
            a = P.samples[i]
            h = matcore.principal_log_unitary(a.conj().T @ P.samples[i + 1], tol=max(P.tol, 1e-6))
            w, v = np.linalg.eigh(h)
            for k, th in enumerate(thetas, start=1):
                samples[i * factor + k] = a @ ((v * np.exp(1j * th * w)) @ v.conj().T)
    samples[::factor] = P.samples
    return UnitaryPath(fine, samples, func=P.func, tol=P.tol, meta=P.meta)


def evaluate_at(P, t):
    """Sample of ``P`` at an arbitrary ``t`` in [0, 1].

    Uses ``P.func`` when present; otherwise grid points are returned exactly
    and other points are filled by geodesic interpolation.
    """
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ValidationError("t must lie in [0, 1]")
    if P.func is not None:
        return np.asarray(P.func(np.array([t])), dtype=complex)[0]
    i = int(np.searchsorted(P.grid, t, side="right")) - 1
    i = min(max(i, 0), P.grid.size - 1)
    if P.grid[i] == t or i == P.grid.size - 1:
        return P.samples[i].copy()
    a, b = P.samples[i], P.samples[i + 1]
    theta = (t - P.grid[i]) / (P.grid[i + 1] - P.grid[i])
    h = matcore.principal_log_unitary(a.conj().T @ b, tol=max(P.tol, 1e-6))
    w, v = np.linalg.eigh(h)
    return a @ ((v * np.exp(1j * theta * w)) @ v.conj().T)
