"""Continuous eigenvalue selections, branch decompositions and spectral measures.

Eigenvalues at neighbouring grid points are paired using eigenvector
overlaps, restricted to pairs whose chord distance is at most the step
``||U_{i+1} - U_i||``.  Such a pairing always exists for unitaries, and the
overlap keeps a branch on its own eigenvector through eigenvalue crossings
where the distance alone cannot tell which branch is which.
"""

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import matcore
from .errors import PerturbationFailed, StartNotInSpectrum, ValidationError
from .pathalg import UnitaryPath, evaluate_at

CLUSTER_TOL = 1e-9
_STEP_SLACK = 1e-10


def chord(a, b):
    """``|e^{ia} - e^{ib}|``."""
    return 2.0 * np.abs(np.sin((np.asarray(a) - np.asarray(b)) / 2.0))


def circ_dist(a, b):
    """Angular distance on the circle, in [0, pi]."""
    return np.abs(np.angle(np.exp(1j * (np.asarray(a) - np.asarray(b)))))


def wrap(x):
    return np.angle(np.exp(1j * np.asarray(x)))


def cluster_phases(phases, tol=CLUSTER_TOL):
    """Group sorted phases in (-pi, pi] into clusters of circular width <= tol.

    Returns a list of index arrays into ``phases``.
    """
    phases = np.asarray(phases)
    order = np.argsort(phases, kind="stable")
    groups = [[order[0]]]
    for a, b in zip(order[:-1], order[1:]):
        if phases[b] - phases[a] <= tol:
            groups[-1].append(b)
        else:
            groups.append([b])
    if len(groups) > 1 and phases[groups[0][0]] + 2 * np.pi - phases[groups[-1][-1]] <= tol:
        groups[0] = groups.pop() + groups[0]
    return [np.array(g) for g in groups]


def _eig(u):
    return matcore._schur_phases(u)


@dataclass
class SpectralSelection:
    grid: np.ndarray
    phases: np.ndarray
    length: float
    step_defects: np.ndarray = field(default=None)

    @property
    def terminal_phase(self):
        return float(self.phases[-1])


def track_selection(P, start_phase, start_vector=None, atol=1e-7, cluster_tol=CLUSTER_TOL):
    """Follow one eigenvalue of ``P`` continuously from ``e^{i start_phase}``.

    Parameters
    ----------
    start_vector : array_like, optional
        Picks the branch inside a degenerate eigenspace of ``P(0)``.

    Returns
    -------
    SpectralSelection
        Lifted phases (radians), chord length, and per-step
        ``||U_{i+1} - U_i|| - chord`` (never negative beyond rounding).
    """
    ph, v = _eig(P.samples[0])
    d = chord(ph, start_phase)
    if d.min() > atol:
        raise StartNotInSpectrum(f"e^(i {start_phase}) is {d.min():.3e} away from sp(P(0))")
    sel = np.abs(chord(ph, ph[np.argmin(d)])) <= max(atol, cluster_tol)
    q = v[:, sel]
    if start_vector is None:
        vec = q[:, 0]
    else:
        vec = q @ (q.conj().T @ np.asarray(start_vector, dtype=complex))
        nv = np.linalg.norm(vec)
        if nv < 1e-8:
            raise StartNotInSpectrum("start_vector has no component in the chosen eigenspace")
        vec = vec / nv
    theta = float(start_phase)
    lifts = [theta]
    steps = P.step_norms()
    chords = []
    for i in range(1, P.grid.size):
        ph, v = _eig(P.samples[i])
        best, best_ov, best_q = None, -1.0, None
        for g in cluster_phases(ph, cluster_tol):
            c = chord(ph[g[0]], theta)
            if c > steps[i - 1] + _STEP_SLACK + cluster_tol:
                continue
            qg = v[:, g]
            ov = float(np.linalg.norm(qg.conj().T @ vec) ** 2)
            if ov > best_ov:
                best, best_ov, best_q = g, ov, qg
        if best is None:
            # rounding left no admissible cluster: fall back to the nearest eigenvalue
            j = int(np.argmin(chord(ph, theta)))
            best, best_q = np.array([j]), v[:, [j]]
        new = best_q @ (best_q.conj().T @ vec)
        nv = np.linalg.norm(new)
        vec = new / nv if nv > 1e-12 else best_q[:, 0]
        step = float(wrap(ph[best[0]] - theta))
        chords.append(float(chord(step, 0.0)))
        theta = theta + step
        lifts.append(theta)
    chords = np.array(chords)
    return SpectralSelection(grid=P.grid.copy(), phases=np.array(lifts),
                             length=float(chords.sum()), step_defects=steps - chords)


@dataclass
class EigenBranchSet:
    """Continuous eigenphase lifts ``h_j`` (units of pi) with an eigenframe per grid point.

    Column ``j`` of ``frames[i]`` spans the rank-one projection ``p_j(t_i)``.
    """

    grid: np.ndarray
    branches: np.ndarray
    frames: np.ndarray
    offsets: np.ndarray

    @property
    def n(self):
        return self.branches.shape[1]

    def projection(self, j, i):
        f = self.frames[i][:, j]
        return np.outer(f, f.conj())

    def projection_sum_defect(self):
        n = self.n
        d = [matcore.op_norm(self.frames[i] @ self.frames[i].conj().T - np.eye(n))
             for i in range(self.grid.size)]
        return float(max(d))

    def unitary_samples(self):
        ph = np.exp(1j * np.pi * self.branches)
        return (self.frames * ph[:, None, :]) @ np.conj(np.swapaxes(self.frames, -1, -2))

    def min_gap(self):
        """Smallest circular distance between distinct branches over the grid (radians)."""
        if self.n < 2:
            return np.inf
        ph = np.sort(wrap(np.pi * self.branches), axis=1)
        gaps = np.diff(ph, axis=1)
        wrapgap = ph[:, 0] + 2 * np.pi - ph[:, -1]
        return float(min(gaps.min(), wrapgap.min()))


def _polar(x):
    a, _, bh = np.linalg.svd(x, full_matrices=False)
    return a @ bh


def track_frames(P, cluster_tol=CLUSTER_TOL):
    """Transport an eigenframe along ``P``.

    Returns lifted phases ``(g, n)`` in radians and frames ``(g, n, n)`` with
    ``P(t_i) = F_i diag(e^{i theta_i}) F_i^*`` and ``F`` varying as little as
    possible between grid points (polar alignment inside degenerate eigenspaces).
    """
    g, n = P.grid.size, P.n
    ph, v = _eig(P.samples[0])
    frames = np.empty((g, n, n), dtype=complex)
    lifts = np.empty((g, n))
    frames[0], lifts[0] = v, ph
    steps = P.step_norms()
    for i in range(1, g):
        ph, v = _eig(P.samples[i])
        groups = cluster_phases(ph, cluster_tol)
        prev = frames[i - 1]
        slot_group = np.concatenate([[gi] * len(grp) for gi, grp in enumerate(groups)]).astype(int)
        ov = np.empty((n, len(groups)))
        far = np.empty((n, len(groups)), dtype=bool)
        for gi, grp in enumerate(groups):
            q = v[:, grp]
            ov[:, gi] = np.linalg.norm(q.conj().T @ prev, axis=0) ** 2
            far[:, gi] = chord(ph[grp[0]], lifts[i - 1]) > steps[i - 1] + _STEP_SLACK + cluster_tol
        cost = -ov[:, slot_group] + 10.0 * far[:, slot_group]
        rows, cols = linear_sum_assignment(cost)
        assign = np.empty(n, dtype=int)
        assign[rows] = slot_group[cols]
        new = np.empty((n, n), dtype=complex)
        for gi, grp in enumerate(groups):
            members = np.nonzero(assign == gi)[0]
            q = v[:, grp]
            new[:, members] = _polar(q @ (q.conj().T @ prev[:, members]))
            lifts[i, members] = lifts[i - 1, members] + wrap(ph[grp[0]] - lifts[i - 1, members])
        frames[i] = new
    return lifts, frames


def _low_discrepancy(n, offset):
    golden = (np.sqrt(5.0) - 1.0) / 2.0
    x = np.mod(offset + golden * np.arange(1, n + 1), 1.0) * 2.0 - 1.0
    x = x - x.mean()
    return x / max(np.abs(x).max(), 1e-300)


def _needs_split(lifts, floor):
    if lifts.shape[1] < 2:
        return False
    ph = np.sort(wrap(lifts), axis=1)
    gaps = np.concatenate([np.diff(ph, axis=1), (ph[:, :1] + 2 * np.pi - ph[:, -1:])], axis=1)
    return bool(gaps.min() < floor)


def branch_decompose(P, eps, initial_lifts=None, retries=8, cluster_tol=CLUSTER_TOL):
    """Split ``P`` into rank-one eigen-branches, perturbing to distinct eigenvalues.

    If some grid point has a repeated eigenvalue, every branch ``j`` is
    rotated by a constant phase ``delta_j`` with ``sum delta_j = 0`` and
    ``max |delta_j| <= eps / 2``; determinants are therefore unchanged and
    ``||P - perturbed|| < eps``.

    Parameters
    ----------
    initial_lifts : array_like, optional
        Radians; when ``P(0)`` has these distinct eigenphases (mod 2 pi) the
        branch lifts start exactly there.

    Returns
    -------
    (EigenBranchSet, UnitaryPath)
    """
    if eps <= 0:
        raise ValidationError("eps must be positive")
    lifts, frames = track_frames(P, cluster_tol)
    n = P.n
    if initial_lifts is not None:
        a = np.asarray(initial_lifts, dtype=float)
        if a.size != n:
            raise ValidationError("initial_lifts must have one entry per eigenvalue")
        used = np.zeros(n, dtype=bool)
        shift = np.zeros(n)
        for j in range(n):
            d = circ_dist(a, lifts[0, j])
            d[used] = np.inf
            k = int(np.argmin(d))
            used[k] = True
            shift[j] = a[k] - lifts[0, j]
        lifts = lifts + np.round(shift / (2 * np.pi)) * 2 * np.pi
    floor = eps * 1e-3 / n
    offsets = np.zeros(n)
    if _needs_split(lifts, floor):
        for attempt in range(retries):
            offsets = 0.5 * eps * 0.999 * _low_discrepancy(n, 0.1 * attempt)
            if not _needs_split(lifts + offsets, floor):
                break
        else:
            raise PerturbationFailed(f"could not separate eigenvalues with offsets below {eps}")
    branches = (lifts + offsets) / np.pi
    bs = EigenBranchSet(grid=P.grid.copy(), branches=branches, frames=frames, offsets=offsets)
    perturbed = UnitaryPath(P.grid, bs.unitary_samples(), tol=max(P.tol, 1e-8), meta=P.meta, check=False)
    return bs, perturbed


@dataclass
class EmpiricalMeasure:
    atoms: list

    @property
    def total(self):
        return sum((m for _, m in self.atoms), Fraction(0))

    def phases(self):
        return np.array([p for p, _ in self.atoms])


def spectral_measure(u, cluster_tol=CLUSTER_TOL, tol=matcore.DEFAULT_TOL):
    """Atoms ``(phase, multiplicity / n)`` of the eigenvalue distribution.

    Masses are exact fractions.
    """
    ph, _ = matcore.unitary_eigphases(u, tol)
    n = ph.size
    atoms = []
    for grp in cluster_phases(ph, cluster_tol):
        center = float(np.angle(np.mean(np.exp(1j * ph[grp]))))
        if center <= -np.pi:
            center = np.pi
        atoms.append((center, Fraction(len(grp), n)))
    atoms.sort(key=lambda a: a[0])
    return EmpiricalMeasure(atoms)


def arc_mass(mu, center, halfwidth, boundary_tol=1e-12):
    """Mass of the closed arc ``{e^{is} : |s - center| <= halfwidth}``."""
    if not 0 < halfwidth < np.pi:
        raise ValidationError("halfwidth must lie in (0, pi)")
    total = Fraction(0)
    for p, m in mu.atoms:
        if circ_dist(p, center) <= halfwidth + boundary_tol:
            total += m
    return total


def boundary_atoms(mu, center, halfwidth, tol):
    """Atoms within ``tol`` of either end of the arc."""
    return [a for a in mu.atoms if abs(circ_dist(a[0], center) - halfwidth) <= tol]


@dataclass
class ConcentrationRow:
    t: float
    mass_I: Fraction
    mass_J: Fraction
    deviation_I: Fraction
    deviation_J: Fraction
    bound: float
    violation: bool


def measure_concentration_report(path, t_values, eps, n=None, reference=None):
    """Masses of the arcs around ``t th`` and ``-t th/(n-1)`` for the block family.

    ``I_t`` has center ``t th``, ``J_t`` center ``-t th/(n-1)``, both with
    halfwidth ``eps/2``; ``th = (2 - 1/(n-1)) pi``.  A row is flagged when the
    ``I_t`` mass deviates from ``1/n`` by more than ``5 eps / 64``.  The ``J_t``
    deviation from ``(n-1)/n`` is reported as well; it also absorbs defect
    eigenvalues near 1 and carries no bound.

    ``reference`` (the unperturbed path) adds the measured perturbation norm
    to the returned dictionary.
    """
    from .examples import theta0

    n = int(path.meta.get("n") if n is None else n)
    th = theta0(n)
    bound = 5.0 * eps / 64.0
    rows = []
    for t in t_values:
        u = evaluate_at(path, float(t))
        mu = spectral_measure(u)
        mi = arc_mass(mu, t * th, eps / 2)
        mj = arc_mass(mu, -t * th / (n - 1), eps / 2)
        di = abs(mi - Fraction(1, n))
        dj = abs(mj - Fraction(n - 1, n))
        rows.append(ConcentrationRow(float(t), mi, mj, di, dj, bound, bool(float(di) > bound)))
    out = {"rows": rows, "eps": eps, "n": n, "bound": bound}
    if reference is not None:
        out["perturbation_norm"] = path.sup_distance(reference)
    return out
