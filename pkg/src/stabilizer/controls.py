"""Reference controls, the Cayley-type Lyapunov function, and the
trace feedback that makes it decrease."""

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import StabilizerError
from .unitary import SINGULAR_TOL, cayley_inverse_term


@dataclass(frozen=True)
class AmplitudeVector:
    """Sinusoid amplitudes a[k, l]: control k, harmonic l+1 of sin(2 pi t/T)."""

    a: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.a, dtype=float)
        if arr.ndim != 2:
            raise StabilizerError("amplitudes must be a 2-D (m, M) array")
        object.__setattr__(self, "a", arr)

    @property
    def m(self):
        return self.a.shape[0]

    @property
    def M(self):
        return self.a.shape[1]

    def digest(self):
        """Stable short hash of the amplitude payload (for run logs)."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.a).tobytes())
        h.update(str(self.a.shape).encode())
        return h.hexdigest()[:16]

    @classmethod
    def zeros(cls, m, M):
        return cls(np.zeros((m, M)))


def as_gains(f, m):
    """Normalize a scalar or length-m sequence of gains; all must be > 0."""
    arr = np.asarray(f, dtype=float)
    if arr.ndim == 0:
        arr = np.full(m, float(arr))
    if arr.shape != (m,):
        raise StabilizerError(f"gains must be scalar or length {m}")
    if np.any(arr <= 0):
        raise StabilizerError("feedback gains must be positive")
    return arr


@dataclass(frozen=True)
class ControlSnapshot:
    """Controls at one instant: u_total = u_ref + u_fb componentwise."""

    t: float
    u_ref: np.ndarray
    u_fb: np.ndarray

    @property
    def u_total(self):
        return self.u_ref + self.u_fb


def reference_control(amps, T, t):
    """ubar_k(t) = sum_l a[k, l-1] sin(l w t) with w = 2 pi / T.

    t may be a scalar (returns shape (m,)) or an array (returns (m,) + t.shape).
    """
    if T <= 0:
        raise StabilizerError("period T must be positive")
    a = amps.a if isinstance(amps, AmplitudeVector) else np.asarray(amps, dtype=float)
    w = 2 * np.pi / T
    ell = np.arange(1, a.shape[1] + 1)
    return a @ np.sin(np.multiply.outer(ell * w, t))


def cayley_transform(x, singular_tol=SINGULAR_TOL):
    """The Hermitian image i(X - I)(X + I)^{-1} of a unitary X with no
    eigenvalue at -1.  Scalar picture: exp(i theta) maps to -tan(theta/2)."""
    x = np.asarray(x, dtype=complex)
    p = cayley_inverse_term(x, singular_tol=singular_tol)
    return 1j * (x - np.eye(x.shape[0])) @ p


def lyapunov(x, singular_tol=SINGULAR_TOL):
    """Squared Frobenius norm of the Cayley image; equals
    sum_j tan^2(theta_j / 2) over the eigenphases of X."""
    ups = cayley_transform(x, singular_tol=singular_tol)
    return float(np.sum(np.abs(ups) ** 2))


def feedback_matrix(x, singular_tol=SINGULAR_TOL):
    """Z = X (X - I) (X + I)^{-3}: the skew-Hermitian kernel of the descent
    feedback.  (X + I)^{-3} is formed as the cube of the inverse, which is
    better conditioned near the -1 boundary than inverting (X + I)^3."""
    x = np.asarray(x, dtype=complex)
    n = x.shape[0]
    p = cayley_inverse_term(x, singular_tol=singular_tol)
    return x @ (x - np.eye(n)) @ p @ p @ p


def feedback_controls(x_tilde, s_tilde, gains, singular_tol=SINGULAR_TOL):
    """u~_k = f_k Tr(Z(X~) S~_k): one real number per control direction.

    s_tilde is the stacked (m, n, n) array of conjugated generators
    X_bar^dag S_k X_bar at the current time.  The trace of a product of two
    skew-Hermitian matrices is real; the imaginary residue is asserted tiny
    and dropped.
    """
    s_tilde = np.asarray(s_tilde, dtype=complex)
    gains = as_gains(gains, s_tilde.shape[0])
    z = feedback_matrix(x_tilde, singular_tol=singular_tol)
    tr = np.einsum("ij,kji->k", z, s_tilde)
    if np.max(np.abs(tr.imag)) > 1e-9:
        raise StabilizerError(f"feedback trace has imaginary residue {np.max(np.abs(tr.imag)):.2e}")
    return gains * tr.real


def sample_amplitudes(rng, m, M, a_max):
    """Draw an (m, M) amplitude vector with i.i.d. entries uniform on
    [-a_max/2, a_max/2].  Deterministic given the generator state, which it
    advances."""
    if a_max <= 0:
        raise StabilizerError("a_max must be positive")
    return AmplitudeVector(rng.uniform(-a_max / 2.0, a_max / 2.0, size=(m, M)))
