"""Lie-algebraic analysis: bracket-closure rank and reference-control
admissibility via the iterated-bracket matrices at t = 0."""

from dataclasses import dataclass, field

import numpy as np

from .errors import StabilizerError
from .unitary import check_skew_hermitian

RANK_TOL = 1e-9  # relative singular-value threshold for real-span ranks


@dataclass(frozen=True)
class SystemDef:
    """A driftless right-invariant system dX/dt = sum_k u_k S_k X on U(n)."""

    generators: tuple

    def __post_init__(self):
        gens = tuple(
            check_skew_hermitian(g, what=f"generator {k}") for k, g in enumerate(self.generators)
        )
        if not gens:
            raise StabilizerError("need at least one generator")
        n = gens[0].shape[0]
        if any(g.shape != (n, n) for g in gens):
            raise StabilizerError("generators must share one dimension")
        object.__setattr__(self, "generators", gens)

    @property
    def n(self):
        return self.generators[0].shape[0]

    @property
    def m(self):
        return len(self.generators)


def _real_vectorize(mats):
    a = np.stack([np.asarray(m_) for m_ in mats]).reshape(len(mats), -1)
    return np.hstack([a.real, a.imag])


def real_span_rank(mats, rank_tol=RANK_TOL):
    """Real-linear rank of a list of complex matrices (SVD with a relative
    threshold on the stacked real/imaginary vectorization)."""
    mats = list(mats)
    if not mats:
        return 0
    sv = np.linalg.svd(_real_vectorize(mats), compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rank_tol * sv[0]))


@dataclass(frozen=True)
class BracketClosureReport:
    """Result of the bracket-closure rank computation.

    rank: real dimension of the closure found.
    basis: independent elements, in discovery order.
    max_depth_used: number of nested bracket applications at which the rank
        saturated (0 = the generators alone; [a, b] has depth 1).
    """

    rank: int
    basis: list = field(repr=False)
    max_depth_used: int


def lie_closure(sys: SystemDef, max_depth=6, rank_tol=RANK_TOL):
    """Rank of the Lie algebra generated by the system's control directions.

    Breadth-first over left-normed bracket words [[...[g,h],...],k]; a
    candidate is kept only if it increases the real span (checked by
    Gram--Schmidt with a relative threshold, re-orthogonalized once).  By the
    Jacobi identity the left-normed words span every bracket word, so pruning
    loses nothing.  Stops early at rank n^2.
    """
    if max_depth < 1:
        raise StabilizerError("max_depth must be >= 1")
    n = sys.n
    full = n * n
    q = np.zeros((0, 2 * n * n))
    basis = []
    depth_of = []

    def try_add(mat, depth):
        nonlocal q
        v = np.concatenate([mat.real.ravel(), mat.imag.ravel()])
        nv = np.linalg.norm(v)
        if nv < 1e-14:
            return False
        r = v - q.T @ (q @ v)
        r = r - q.T @ (q @ r)
        if np.linalg.norm(r) > rank_tol * nv:
            q = np.vstack([q, r / np.linalg.norm(r)])
            basis.append(mat)
            depth_of.append(depth)
            return True
        return False

    frontier = []
    for g in sys.generators:
        if try_add(g, 0):
            frontier.append(g)
    depth = 0
    while depth < max_depth and len(basis) < full and frontier:
        depth += 1
        new = []
        for b in frontier:
            for g in sys.generators:
                c = b @ g - g @ b
                if try_add(c, depth):
                    new.append(c)
            if len(basis) >= full:
                break
        frontier = new
    rank = real_span_rank(basis, rank_tol) if basis else 0
    return BracketClosureReport(rank=rank, basis=basis, max_depth_used=max(depth_of) if depth_of else 0)


@dataclass(frozen=True)
class TaylorMatrixSeries:
    """Matrix-valued Taylor polynomial at t = 0: sum_p coefficients[p] t^p."""

    order: int
    coefficients: np.ndarray  # (order+1, n, n)

    def __post_init__(self):
        if self.coefficients.shape[0] != self.order + 1:
            raise StabilizerError("coefficient count must be order + 1")

    def at_zero(self):
        return self.coefficients[0]


def taylor_A(sys: SystemDef, amps, T, order):
    """Taylor coefficients at t = 0 of A(t) = sum_k ubar_k(t) S_k with
    ubar_k(t) = sum_l a_{k,l} sin(l w t), w = 2 pi / T.

    The p-th derivative of sin(l w t) at 0 cycles {0, 1, 0, -1} times
    (l w)^p, so every even-order coefficient vanishes identically.
    """
    if order < 0:
        raise StabilizerError("order must be >= 0")
    a = np.asarray(amps, dtype=float)
    if a.shape[0] != sys.m:
        raise StabilizerError(f"amps rows ({a.shape[0]}) must match control count ({sys.m})")
    M = a.shape[1]
    w = 2 * np.pi / T
    ell = np.arange(1, M + 1)
    gens = np.stack(sys.generators)
    cyc = (0.0, 1.0, 0.0, -1.0)
    coeffs = np.zeros((order + 1, sys.n, sys.n), dtype=complex)
    fact = 1.0
    for p in range(order + 1):
        if p > 0:
            fact *= p
        c = cyc[p % 4]
        if c != 0.0:
            u_p = a @ ((ell * w) ** p) * (c / fact)  # (m,)
            coeffs[p] = np.tensordot(u_p, gens, axes=1)
    return TaylorMatrixSeries(order=order, coefficients=coeffs)


def bracket_series_at_zero(sys: SystemDef, amps, T, J):
    """The matrices C_k^j(0), k = 1..m, j = 0..J, of the recursion

        C_k^0(t) = S_k,    C_k^{j+1}(t) = dC_k^j/dt + [C_k^j(t), A(t)].

    Each level is carried as a Taylor polynomial truncated at order J - j:
    the derivative shifts coefficients, the bracket is a Cauchy product
    against the series of A.  Returns a list of m lists of J+1 matrices;
    every output is skew-Hermitian (asserted).
    """
    if J < 0:
        raise StabilizerError("J must be >= 0")
    A = taylor_A(sys, amps, T, J).coefficients
    out = []
    for k in range(sys.m):
        cur = np.zeros((J + 1, sys.n, sys.n), dtype=complex)
        cur[0] = sys.generators[k]
        per_k = [cur[0].copy()]
        for j in range(J):
            keep = J - j - 1
            nxt = np.zeros((keep + 1, sys.n, sys.n), dtype=complex)
            for p in range(keep + 1):
                nxt[p] = (p + 1) * cur[p + 1]
                for qq in range(p + 1):
                    nxt[p] += cur[qq] @ A[p - qq] - A[p - qq] @ cur[qq]
            per_k.append(nxt[0].copy())
            cur = nxt
        for j, c in enumerate(per_k):
            check_skew_hermitian(c, tol=1e-9, what=f"C[{k}][{j}](0)")
        out.append(per_k)
    return out


def admissibility_rank(sys: SystemDef, amps, T, J=None):
    """Real-span rank of {C_k^j(0)}; the amplitude choice is admissible when
    this reaches n^2.  J defaults to 2M (the deepest derivative order the M
    harmonics can make informative)."""
    a = np.asarray(amps, dtype=float)
    if J is None:
        J = 2 * a.shape[1]
    series = bracket_series_at_zero(sys, a, T, J)
    flat = [c for per_k in series for c in per_k]
    return real_span_rank(flat)
