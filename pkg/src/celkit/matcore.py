"""Dense complex matrix kernel.

Hermitian and unitary eigendecompositions, ``exp(iH)``, the principal
logarithm of a unitary, operator norm and normalized trace.  Functions
accept a single ``(n, n)`` array; the ``*_batch`` helpers work on stacks of
shape ``(g, n, n)`` and are what the path modules use internally.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import BranchCutHit, ConvergenceFailure, NotHermitian, NotUnitary, ValidationError

DEFAULT_TOL = 1e-8
EPS = np.finfo(float).eps


@dataclass(frozen=True)
class HermCheckReport:
    hermitian_defect: float
    unitary_defect: float


def as_cmat(a):
    """Return ``a`` as a square complex128 array, rejecting NaN/Inf."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise ValidationError(f"expected a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError("matrix has non-finite entries")
    return m


def op_norm(a):
    """Largest singular value."""
    a = np.asarray(a, dtype=complex)
    return float(np.linalg.norm(a, 2))


def op_norm_batch(a):
    """Operator norm of every matrix in a ``(g, n, n)`` stack."""
    a = np.asarray(a, dtype=complex)
    if a.shape[-1] == 1:
        return np.abs(a[..., 0, 0])
    return np.linalg.norm(a, ord=2, axis=(-2, -1))


def normalized_trace(a):
    a = np.asarray(a)
    return complex(np.trace(a) / a.shape[0])


def normalized_trace_batch(a):
    a = np.asarray(a)
    return np.trace(a, axis1=-2, axis2=-1) / a.shape[-1]


def check_defects(a):
    a = as_cmat(a)
    n = a.shape[0]
    herm = op_norm(a - a.conj().T)
    uni = op_norm(a.conj().T @ a - np.eye(n))
    return HermCheckReport(hermitian_defect=herm, unitary_defect=uni)


def hermitian_defect(a):
    a = np.asarray(a, dtype=complex)
    return op_norm(a - a.conj().T)


def unitary_defect(a):
    a = np.asarray(a, dtype=complex)
    return op_norm(a.conj().T @ a - np.eye(a.shape[0]))


def unitary_defect_batch(a):
    a = np.asarray(a, dtype=complex)
    n = a.shape[-1]
    return op_norm_batch(np.conj(np.swapaxes(a, -1, -2)) @ a - np.eye(n))


def herm_eig(h, tol=DEFAULT_TOL):
    """Eigendecomposition of a Hermitian matrix.

    Returns
    -------
    w : ndarray
        Eigenvalues in ascending order.
    v : ndarray
        Orthonormal eigenvectors as columns, ``h = v @ diag(w) @ v^*``.
    """
    h = as_cmat(h)
    defect = hermitian_defect(h)
    if defect > tol:
        raise NotHermitian(f"hermitian defect {defect:.3e} exceeds tol {tol:.1e}")
    h = 0.5 * (h + h.conj().T)
    try:
        w, v = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    return w, v


def wrap_phase(theta):
    """Map angles into (-pi, pi]."""
    theta = np.asarray(theta, dtype=float)
    out = np.angle(np.exp(1j * theta))
    out = np.where(out <= -np.pi, np.pi, out)
    return out


def _schur_phases(u):
    try:
        t, z = scipy.linalg.schur(u, output="complex")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ConvergenceFailure(str(exc)) from exc
    lam = np.diag(t)
    phases = np.angle(lam)
    phases = np.where(phases <= -np.pi, np.pi, phases)
    order = np.argsort(phases, kind="stable")
    return phases[order], z[:, order]


def unitary_eigphases(u, tol=DEFAULT_TOL):
    """Eigenphases of a unitary in (-pi, pi], ascending, with eigenvectors.

    The complex Schur form of a normal matrix is diagonal, so the Schur
    vectors are an orthonormal eigenbasis even for repeated eigenvalues.
    """
    u = as_cmat(u)
    defect = unitary_defect(u)
    if defect > tol:
        raise NotUnitary(f"unitary defect {defect:.3e} exceeds tol {tol:.1e}")
    return _schur_phases(u)


def eigphases_only(u):
    """Unchecked eigenphases (ascending) of a unitary; cheap path used in loops."""
    lam = np.linalg.eigvals(u)
    phases = np.angle(lam)
    phases = np.where(phases <= -np.pi, np.pi, phases)
    return np.sort(phases)


def mat_exp_i(h, tol=DEFAULT_TOL):
    """``exp(iH)`` for Hermitian ``H`` via its spectral decomposition."""
    w, v = herm_eig(h, tol)
    return (v * np.exp(1j * w)) @ v.conj().T


def mat_exp_i_batch(h):
    """``exp(iH)`` for a stack of Hermitian matrices (no validation)."""
    h = np.asarray(h, dtype=complex)
    h = 0.5 * (h + np.conj(np.swapaxes(h, -1, -2)))
    w, v = np.linalg.eigh(h)
    return (v * np.exp(1j * w)[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def principal_log_unitary(u, gap_tol=1e-9, tol=DEFAULT_TOL):
    """Hermitian ``H`` with spectrum in (-pi, pi) and ``exp(iH) = U``.

    Raises
    ------
    BranchCutHit
        If an eigenphase is within ``gap_tol`` of the cut at -1.
    """
    phases, v = unitary_eigphases(u, tol)
    worst = float(np.max(np.abs(phases)))
    if worst > np.pi - gap_tol:
        raise BranchCutHit(f"eigenphase {worst:.6f} within {gap_tol:.1e} of the branch cut")
    h = (v * phases) @ v.conj().T
    return 0.5 * (h + h.conj().T)


def log_phases(u, gap_tol=1e-9):
    """Eigenphases of ``u`` (unchecked unitary) with the branch-cut guard."""
    phases = eigphases_only(u)
    worst = float(np.max(np.abs(phases)))
    if worst > np.pi - gap_tol:
        raise BranchCutHit(f"eigenphase {worst:.6f} within {gap_tol:.1e} of the branch cut")
    return phases


def random_unitary(n, rng):
    """Haar-distributed unitary (QR of a complex Ginibre matrix)."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_hermitian(n, rng, scale=1.0, traceless=False):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    h = 0.5 * (a + a.conj().T)
    if traceless:
        h = h - np.trace(h).real / n * np.eye(n)
    return scale * h / max(op_norm(h), EPS)
