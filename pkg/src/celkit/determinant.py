"""Trace-winding determinant of unitary paths and rotation numbers.

Convention: ``Det(u) = (1 / 2 pi i) * integral tr(u'(t) u(t)^*) dt`` with
``tr`` the normalized trace on ``M_n``.  The loop ``t -> e^{2 pi i t}`` in
``M_1`` has ``Det = 1`` and values are canonical modulo the lattice
``(1/n) Z``.  The integral is evaluated as a telescoping sum of principal
logarithms ``log(U_i^* U_{i+1})``, which is exact on geodesic segments.
"""

from dataclasses import dataclass

import numpy as np

from . import matcore
from .errors import AliasedPhase, BranchCutHit, EndpointMismatch, LogUndefined

DEFAULT_GAP = 1e-6


@dataclass(frozen=True)
class TraceLattice:
    """The subgroup ``(1/n) Z`` of the reals."""

    n: int

    @property
    def modulus(self):
        return 1.0 / self.n

    def residue(self, x, snap=1e-9):
        """Representative in ``[0, 1/n)``; values within ``snap`` of a lattice point map to 0."""
        y = x * self.n
        if abs(y - np.round(y)) <= snap:
            return 0.0
        return (y - np.floor(y)) / self.n

    def distance(self, x):
        """Distance from ``x`` to the nearest lattice point."""
        y = x * self.n
        return abs(y - np.round(y)) / self.n


@dataclass(frozen=True)
class DetReport:
    value: float
    lattice: TraceLattice
    residue: float

    @property
    def scaled(self):
        """``n * value``; an integer for closed paths."""
        return self.value * self.lattice.n


@dataclass(frozen=True)
class RotationNumber:
    value: float
    lattice: TraceLattice

    def agrees_with(self, other, atol=1e-6):
        return self.lattice.distance(self.value - other.value) <= atol


def segment_phases(P, gap_tol=DEFAULT_GAP):
    """Eigenphases of ``U_i^* U_{i+1}`` for every grid interval, shape ``(g-1, n)``."""
    a = P.samples
    steps = np.conj(np.swapaxes(a[:-1], -1, -2)) @ a[1:]
    ph = np.angle(np.linalg.eigvals(steps))
    worst = np.max(np.abs(ph), axis=1) if ph.size else np.zeros(0)
    bad = np.nonzero(worst > np.pi - gap_tol)[0]
    if bad.size:
        i = int(bad[0])
        raise BranchCutHit(
            f"segment {i} (t={P.grid[i]:.6g}) has an eigenphase at the branch cut; refine the grid",
            index=i)
    return ph


def dls_determinant(P, gap_tol=DEFAULT_GAP):
    """Trace-winding determinant of a sampled path."""
    ph = segment_phases(P, gap_tol)
    # fixed-order reduction so results do not depend on evaluation order
    value = float(np.sum(ph.sum(axis=1)) / (2 * np.pi * P.n))
    lat = TraceLattice(P.n)
    return DetReport(value=value, lattice=lat, residue=float(lat.residue(value)))


def rotation_number(u, v, connecting, atol=1e-8, gap_tol=DEFAULT_GAP):
    """Determinant of a path running from ``u`` to ``v``; canonical mod ``(1/n) Z``."""
    u = matcore.as_cmat(u)
    v = matcore.as_cmat(v)
    du = matcore.op_norm(connecting.start - u)
    dv = matcore.op_norm(connecting.end - v)
    if du > atol or dv > atol:
        raise EndpointMismatch(f"connecting path misses endpoints by {du:.3e} / {dv:.3e}")
    rep = dls_determinant(connecting, gap_tol)
    return RotationNumber(value=rep.value, lattice=rep.lattice)


def det_phases(P):
    """Unwrapped ``arg det P(t)`` along the grid."""
    d = np.linalg.det(P.samples)
    raw = np.angle(d)
    jumps = np.diff(raw)
    wrapped = np.angle(np.exp(1j * jumps))
    big = np.nonzero(np.abs(wrapped) >= np.pi - 1e-12)[0]
    if big.size:
        i = int(big[0])
        raise AliasedPhase(f"det phase jumps by ~pi between grid points {i} and {i + 1}", index=i)
    return raw[0] + np.concatenate([[0.0], np.cumsum(wrapped)])


def det_winding(P):
    """Total change of ``arg det`` divided by ``2 pi``."""
    ph = det_phases(P)
    return float((ph[-1] - ph[0]) / (2 * np.pi))


@dataclass(frozen=True)
class CUReport:
    member: bool
    max_defect: float
    worst_index: int

    def __bool__(self):
        return self.member


def cu_membership(P, tol=1e-8):
    """``|det P(t) - 1| <= tol`` at every grid point."""
    d = np.abs(np.linalg.det(P.samples) - 1.0)
    i = int(np.argmax(d))
    return CUReport(member=bool(d[i] <= tol), max_defect=float(d[i]), worst_index=i)


def triv_log_term(u, v, w, margin=1e-9):
    """``(1 / 2 pi i) tr log(u w^* v^* w)`` with the ``||x - 1|| < 2`` guard."""
    x = u @ w.conj().T @ v.conj().T @ w
    dist = matcore.op_norm(x - np.eye(x.shape[0]))
    if dist >= 2.0 - margin:
        raise LogUndefined(f"||u w* v* w - 1|| = {dist:.6f} is not < 2")
    ph = matcore.eigphases_only(x)
    return float(ph.sum() / (2 * np.pi * x.shape[0]))


def check_triv_identity(u, v, w, connecting, margin=1e-9):
    """Lattice distance of ``R_{u,v} + (1 / 2 pi i) tr log(u w^* v^* w)``.

    For a path from ``u`` to ``v`` the rotation number satisfies
    ``R_{u,v} = (1 / 2 pi i) tr log(u^* w^* v w)`` modulo ``(1/n) Z``, and
    ``tr log(u^* w^* v w) = -tr log(u w^* v^* w)``; hence the plus sign.
    A valid triple returns a residual at rounding level.
    """
    u = matcore.as_cmat(u)
    v = matcore.as_cmat(v)
    w = matcore.as_cmat(w)
    term = triv_log_term(u, v, w, margin)
    r = rotation_number(u, v, connecting)
    return float(r.lattice.distance(r.value + term))
