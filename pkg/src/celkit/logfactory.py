"""Trace-zero logarithms of determinant-one unitary paths.

Phases here are measured in full turns: ``u = exp(2 pi i h)``.

Given distinct eigenvalues ``e^{2 pi i b_j}`` with ``b_j`` in (-1/2, 1/2] and
``sum b_j = k`` an integer, there is exactly one integer shift of the
``b_j`` with zero sum and spread below one: lower the ``k`` largest by one
(or raise the ``|k|`` smallest when ``k < 0``).  Along a path with distinct
eigenvalues these windows vary continuously, so applying the rule at every
grid point is the same as continuing the lifts from ``t = 0``.  Where two
branches of the input path cross, the window hands the top lift from one
eigenvector to another; the matrix ``h`` then jumps across that grid
interval, and those intervals are reported as ``swap_intervals``.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import matcore
from .determinant import cu_membership
from .errors import AliasingError, DuplicateEntries, NonIntegerSum, NotDetOne, ValidationError
from .pathalg import HermitianPath, UnitaryPath, refine
from .spectral import branch_decompose

SUM_TOL = 1e-9
DUP_TOL = 1e-12
MAX_INCREMENT = 0.25
TRACE_TOL = 1e-10


@dataclass
class BranchSelection:
    b: np.ndarray
    k: int
    a: np.ndarray
    shifted_indices: frozenset

    @property
    def spread(self):
        return float(self.a.max() - self.a.min())


def branch_select_zero_sum(b, sum_tol=SUM_TOL, dup_tol=DUP_TOL):
    """Shift phases in (-1/2, 1/2] by integers so that they sum to zero.

    Examples
    --------
    >>> branch_select_zero_sum([0.5, 0.4, 0.1]).a
    array([-0.5,  0.4,  0.1])
    """
    b = np.asarray(b, dtype=float).ravel()
    n = b.size
    if n == 0:
        raise ValidationError("empty phase list")
    if np.any(b <= -0.5) or np.any(b > 0.5):
        raise ValidationError("phases must lie in (-1/2, 1/2]")
    s = float(np.sum(b))
    k = int(np.round(s))
    if abs(s - k) > sum_tol:
        raise NonIntegerSum(f"sum of phases {s:.12g} is not an integer")
    if abs(k) > n:
        raise NonIntegerSum(f"|sum| = {abs(k)} exceeds n = {n}")
    sb = np.sort(b)
    if n > 1 and np.min(np.diff(sb)) <= dup_tol:
        raise DuplicateEntries("phases must be distinct")
    order = np.argsort(b, kind="stable")
    a = b.copy()
    if k >= 1:
        idx = order[n - k:]
        a[idx] -= 1.0
    elif k <= -1:
        idx = order[:-k]
        a[idx] += 1.0
    else:
        idx = np.array([], dtype=int)
    # remove the residual rounding of the integer sum without moving any entry by more than it
    a -= (np.sum(a)) / n
    return BranchSelection(b=b, k=k, a=a, shifted_indices=frozenset(int(i) for i in idx))


def turns_from_lifts(lifts_pi):
    """Lifts in units of pi to principal phases in turns, in (-1/2, 1/2]."""
    b = np.angle(np.exp(1j * np.pi * np.asarray(lifts_pi))) / (2 * np.pi)
    return np.where(b <= -0.5, 0.5, b)


@dataclass
class LogResult:
    """Output of :func:`trace_zero_log_path`; unpacks as ``(h, u1)``."""

    h: HermitianPath
    u1: UnitaryPath
    source: UnitaryPath
    perturbation: float
    refined: bool
    swap_intervals: list = field(default_factory=list)
    max_increment: float = 0.0

    def __iter__(self):
        yield self.h
        yield self.u1


def _windows(bs):
    g, n = bs.branches.shape
    a = np.empty((g, n))
    for i in range(g):
        a[i] = branch_select_zero_sum(turns_from_lifts(bs.branches[i])).a
    return a


def _build(P, eps):
    bs, u1 = branch_decompose(P, eps)
    a = _windows(bs)
    sorted_a = np.sort(a, axis=1)
    inc = np.abs(np.diff(sorted_a, axis=0)).max() if P.grid.size > 1 else 0.0
    h = (bs.frames * a[:, None, :]) @ np.conj(np.swapaxes(bs.frames, -1, -2))
    h = 0.5 * (h + np.conj(np.swapaxes(h, -1, -2)))
    return bs, u1, a, h, float(inc)


def trace_zero_log_path(P, eps, det_tol=1e-8, allow_refine=True):
    """Hermitian ``h`` (turns) with ``tr h = 0``, ``||h|| < 1`` and ``exp(2 pi i h)`` within ``eps`` of ``P``.

    Parameters
    ----------
    P : UnitaryPath
        Must satisfy ``det P(t) = 1`` at every grid point.
    eps : float
        Budget for the perturbation that separates repeated eigenvalues.
    allow_refine : bool
        Refine the grid once when a sorted lift moves by a quarter turn or
        more between neighbouring points.

    Returns
    -------
    LogResult
    """
    rep = cu_membership(P, det_tol)
    if not rep.member:
        raise NotDetOne(f"|det - 1| = {rep.max_defect:.3e} at t={P.grid[rep.worst_index]:.6g}")
    if eps <= 0:
        raise ValidationError("eps must be positive")
    refined = False
    bs, u1, a, h, inc = _build(P, eps)
    if inc >= MAX_INCREMENT:
        if not allow_refine:
            raise AliasingError(f"lift increment {inc:.3f} turns; refine the grid")
        P = refine(P, 2)
        refined = True
        bs, u1, a, h, inc = _build(P, eps)
        if inc >= MAX_INCREMENT:
            raise AliasingError(f"lift increment {inc:.3f} turns after refinement")
    hp = HermitianPath(P.grid, h, check=False)
    jumps = matcore.op_norm_batch(np.diff(h, axis=0))
    swaps = [(float(P.grid[i]), float(P.grid[i + 1])) for i in np.nonzero(jumps >= MAX_INCREMENT)[0]]
    return LogResult(h=hp, u1=u1, source=P, perturbation=u1.sup_distance(P),
                     refined=refined, swap_intervals=swaps, max_increment=inc)


@dataclass
class LogCheckReport:
    residual: float
    max_trace: float
    sup_norm: float
    min_spread: float
    max_spread: float
    roundtrip: float
    length_bound: float
    violations: list

    @property
    def ok(self):
        return not self.violations


def verify_log_certificate(P, h, eps, u1=None, trace_tol=TRACE_TOL, roundtrip_tol=1e-10):
    """Recheck a trace-zero logarithm from the raw samples.

    Uses ``scipy.linalg.expm`` and ``eigvalsh`` directly so nothing is
    shared with the constructor.  ``P`` and ``u1`` may be paths or sample
    stacks; ``h`` may be a :class:`HermitianPath` or a stack.

    Returns
    -------
    LogCheckReport
        ``violations`` lists ``(check, grid_index, value)`` tuples;
        ``length_bound`` is ``2 pi sup ||h||``.
    """
    ps = np.asarray(getattr(P, "samples", P), dtype=complex)
    hs = np.asarray(getattr(h, "samples", h), dtype=complex)
    us = None if u1 is None else np.asarray(getattr(u1, "samples", u1), dtype=complex)
    violations = []
    g, n = hs.shape[0], hs.shape[1]
    if ps.shape != hs.shape:
        return LogCheckReport(np.inf, np.inf, np.inf, 0, 0, np.inf, np.inf,
                              [("shape", -1, float(ps.shape[0]))])
    res = np.empty(g)
    rt = np.zeros(g)
    tr = np.empty(g)
    nrm = np.empty(g)
    spread = np.empty(g)
    for i in range(g):
        hi = hs[i]
        herm = np.linalg.norm(hi - hi.conj().T, 2)
        if herm > 1e-10:
            violations.append(("hermitian", i, float(herm)))
        e = scipy.linalg.expm(2j * np.pi * 0.5 * (hi + hi.conj().T))
        res[i] = np.linalg.norm(ps[i] - e, 2)
        if us is not None:
            rt[i] = np.linalg.norm(us[i] - e, 2)
        w = np.linalg.eigvalsh(0.5 * (hi + hi.conj().T))
        tr[i] = abs(np.trace(hi).real) / n
        nrm[i] = np.abs(w).max()
        spread[i] = w.max() - w.min()
    for i in np.nonzero(res >= eps)[0]:
        violations.append(("residual", int(i), float(res[i])))
    for i in np.nonzero(tr > trace_tol)[0]:
        violations.append(("trace", int(i), float(tr[i])))
    for i in np.nonzero(nrm >= 1.0)[0]:
        violations.append(("norm", int(i), float(nrm[i])))
    for i in np.nonzero(spread >= 1.0)[0]:
        violations.append(("spread", int(i), float(spread[i])))
    if n > 1:
        for i in np.nonzero(spread <= 0.0)[0]:
            violations.append(("spread", int(i), float(spread[i])))
    for i in np.nonzero(rt > roundtrip_tol)[0]:
        violations.append(("roundtrip", int(i), float(rt[i])))
    sup = float(nrm.max())
    return LogCheckReport(residual=float(res.max()), max_trace=float(tr.max()), sup_norm=sup,
                          min_spread=float(spread.min()), max_spread=float(spread.max()),
                          roundtrip=float(rt.max()), length_bound=2 * np.pi * sup,
                          violations=violations)
