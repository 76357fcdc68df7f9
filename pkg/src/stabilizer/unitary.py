"""Dense complex matrix core: unitary and skew-Hermitian helpers.

Matrices are plain complex ndarrays.  Structural properties (unitarity,
skew-Hermiticity) are enforced by explicit check functions at module
boundaries rather than by wrapper classes.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NotInW, StabilizerError

# Default numerical guards.  UNITARITY_TOL bounds ||X^dag X - I||_F for
# anything claiming to be unitary; SINGULAR_TOL is the minimum allowed
# distance of an eigenvalue from -1 before (X + I) is treated as singular
# (the feedback contains (X + I)^{-3} and blows up at that boundary).
UNITARITY_TOL = 1e-10
SINGULAR_TOL = 1e-6


def frobenius_norm(a):
    """sqrt(Tr(A^dag A)) = root sum of squared moduli."""
    a = np.asarray(a)
    return float(np.sqrt(np.sum(np.abs(a) ** 2)))


def is_unitary(x, tol=UNITARITY_TOL):
    x = np.asarray(x)
    n = x.shape[0]
    return frobenius_norm(x.conj().T @ x - np.eye(n)) <= tol


def check_unitary(x, tol=UNITARITY_TOL, what="matrix"):
    """Raise unless ||X^dag X - I||_F <= tol.  Returns X as complex ndarray."""
    x = np.asarray(x, dtype=complex)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise StabilizerError(f"{what} must be square, got shape {x.shape}")
    defect = frobenius_norm(x.conj().T @ x - np.eye(x.shape[0]))
    if defect > tol:
        raise StabilizerError(f"{what} is not unitary: ||X'X - I|| = {defect:.3e}")
    return x


def check_skew_hermitian(s, tol=UNITARITY_TOL, what="matrix"):
    """Raise unless ||S^dag + S||_F <= tol.  Returns S as complex ndarray."""
    s = np.asarray(s, dtype=complex)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise StabilizerError(f"{what} must be square, got shape {s.shape}")
    defect = frobenius_norm(s.conj().T + s)
    if defect > tol:
        raise StabilizerError(f"{what} is not skew-Hermitian: ||S' + S|| = {defect:.3e}")
    return s


def unitarize(x):
    """Polar projection onto U(n): the unitary factor of the SVD."""
    u, _, vh = np.linalg.svd(np.asarray(x, dtype=complex))
    return u @ vh


def expm_skew(s, t=1.0, unitarity_tol=UNITARITY_TOL):
    """exp(t*S) for skew-Hermitian S via scaling-and-squaring.

    Truncated-series core on the scaled argument, then repeated squaring.
    The result is re-unitarized by polar projection if its drift exceeds
    unitarity_tol/10, so long products stay on the group.  Works on a
    single (n, n) matrix or a stacked (..., n, n) batch.
    """
    s = np.asarray(s, dtype=complex)
    n = s.shape[-1]
    a = t * s
    if not np.any(a):
        out = np.zeros_like(a)
        out[...] = np.eye(n)
        return out
    norms = np.sqrt(np.sum(np.abs(a) ** 2, axis=(-2, -1)))
    theta = 0.125
    nsq = int(max(0, np.ceil(np.log2(float(np.max(norms)) / theta)))) if np.max(norms) > theta else 0
    a = a / (2.0 ** nsq)
    eye = np.broadcast_to(np.eye(n, dtype=complex), a.shape)
    # Horner evaluation of the degree-10 Taylor polynomial.
    acc = eye + a / 10.0
    for d in range(9, 0, -1):
        acc = eye + (a @ acc) / d
    for _ in range(nsq):
        acc = acc @ acc
    drift = np.sqrt(np.sum(np.abs(np.swapaxes(acc.conj(), -2, -1) @ acc - eye) ** 2, axis=(-2, -1)))
    if np.max(drift) > unitarity_tol / 10.0:
        if acc.ndim == 2:
            acc = unitarize(acc)
        else:
            flat = acc.reshape(-1, n, n)
            acc = np.stack([unitarize(f) for f in flat]).reshape(acc.shape)
    return acc


@dataclass(frozen=True)
class UnitaryEigen:
    """Eigendecomposition of a unitary: X = U^dag diag(exp(i*phases)) U.

    phases lie in (-pi, pi], sorted ascending; ordering and eigenvector
    phases are canonicalized so equal inputs give identical output.
    """

    phases: np.ndarray
    rotation: np.ndarray  # U, with X = U^dag D U

    def reconstruct(self):
        d = np.exp(1j * self.phases)
        return self.rotation.conj().T @ (d[:, None] * self.rotation)


def _canonical_columns(q):
    """Rotate each column's global phase so its first significant entry is
    real positive; return the adjusted matrix and the lexicographic keys."""
    n = q.shape[0]
    qc = q.copy()
    keys = []
    for j in range(n):
        col = qc[:, j]
        idx = np.flatnonzero(np.abs(col) > 1e-12)
        k = idx[0] if len(idx) else 0
        ph = col[k] / abs(col[k]) if abs(col[k]) > 0 else 1.0
        qc[:, j] = col / ph
        vec = np.ascontiguousarray(qc[:, j])
        keys.append(tuple(np.round(vec.view(float), 9)))
    return qc, keys


def eig_unitary(x, tol=UNITARITY_TOL):
    """Eigenphases/eigenvectors of a unitary via the complex Schur form.

    Schur keeps the eigenvector basis orthonormal even for degenerate
    eigenvalues (plain eig does not), so the reconstruction invariant holds
    for spectra like a triply-degenerate phase.
    """
    x = check_unitary(x, tol=tol, what="eig_unitary argument")
    from scipy.linalg import schur

    tmat, q = schur(x, output="complex")
    lam = np.diag(tmat)
    # Unitary input => T is diagonal up to roundoff; normalize moduli to 1.
    lam = lam / np.abs(lam)
    phases = np.angle(lam)
    phases = np.where(phases <= -np.pi, phases + 2 * np.pi, phases)
    qc, keys = _canonical_columns(q)
    order = sorted(range(len(phases)), key=lambda i: (round(phases[i], 12), keys[i]))
    phases = phases[list(order)]
    u = qc[:, list(order)].conj().T
    return UnitaryEigen(phases=phases, rotation=u)


def gap_from_minus_one(x):
    """min_j |1 + lambda_j(X)| for unitary X, computed as the smallest
    singular value of X + I (exact for normal matrices)."""
    x = np.asarray(x, dtype=complex)
    sv = np.linalg.svd(x + np.eye(x.shape[0]), compute_uv=False)
    return float(sv[-1])


def cayley_inverse_term(x, singular_tol=SINGULAR_TOL):
    """(X + I)^{-1}, guarded against eigenvalues at -1.

    Raises NotInW when min_j |1 + lambda_j| <= singular_tol: the state (or
    goal) sits at the boundary where the feedback diverges.
    """
    x = np.asarray(x, dtype=complex)
    n = x.shape[0]
    gap = gap_from_minus_one(x)
    if gap <= singular_tol:
        raise NotInW(f"eigenvalue within {gap:.3e} of -1 (tol {singular_tol:.1e})")
    return np.linalg.inv(x + np.eye(n))


def random_unitary(n, rng):
    """Haar-random unitary from the QR decomposition of a Ginibre matrix."""
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_unitary_with_phases(phases, rng):
    """Random unitary with a prescribed spectrum exp(i*phases)."""
    phases = np.asarray(phases, dtype=float)
    q = random_unitary(len(phases), rng)
    return q @ (np.exp(1j * phases)[:, None] * q.conj().T)
