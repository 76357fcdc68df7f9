"""Compiled inner loop for the closed-loop geometric integrator.

One period of the co-evolved pair (reference, plant) under the exponential
midpoint scheme with a single predictor pass for the state-dependent
feedback.  Everything here mirrors the plain-numpy path in simulate.py; the
two are equivalence-tested.  Set STABILIZER_NO_NUMBA=1 to skip compilation.
"""

import numpy as np

try:  # pragma: no cover - exercised through the public API
    import os

    if os.environ.get("STABILIZER_NO_NUMBA"):
        raise ImportError("numba disabled by STABILIZER_NO_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


@njit(cache=True)
def _matmul(a, b, out):
    n = a.shape[0]
    for i in range(n):
        for j in range(n):
            s = 0j
            for k in range(n):
                s += a[i, k] * b[k, j]
            out[i, j] = s


@njit(cache=True)
def _matmul_hn(a, b, out):
    # out = a^dag @ b
    n = a.shape[0]
    for i in range(n):
        for j in range(n):
            s = 0j
            for k in range(n):
                s += np.conj(a[k, i]) * b[k, j]
            out[i, j] = s


@njit(cache=True)
def _matmul_nh(a, b, out):
    # out = a @ b^dag
    n = a.shape[0]
    for i in range(n):
        for j in range(n):
            s = 0j
            for k in range(n):
                s += a[i, k] * np.conj(b[j, k])
            out[i, j] = s


@njit(cache=True)
def _copy(a, out):
    n = a.shape[0]
    for i in range(n):
        for j in range(n):
            out[i, j] = a[i, j]


@njit(cache=True)
def _fro(a):
    n = a.shape[0]
    s = 0.0
    for i in range(n):
        for j in range(n):
            s += a[i, j].real ** 2 + a[i, j].imag ** 2
    return np.sqrt(s)


@njit(cache=True)
def _expm_small(a, out, w1, w2, w3):
    """exp(a) for skew-Hermitian a: scaling-squaring, degree-10 Taylor core."""
    n = a.shape[0]
    nrm = _fro(a)
    nsq = 0
    while nrm > 0.125:
        nrm *= 0.5
        nsq += 1
    sc = 0.5 ** nsq
    for i in range(n):
        for j in range(n):
            w1[i, j] = a[i, j] * sc
    for i in range(n):
        for j in range(n):
            w2[i, j] = (1.0 if i == j else 0.0) + w1[i, j] / 10.0
    for d in range(9, 0, -1):
        _matmul(w1, w2, w3)
        for i in range(n):
            for j in range(n):
                w2[i, j] = (1.0 if i == j else 0.0) + w3[i, j] / d
    _copy(w2, out)
    for _ in range(nsq):
        _matmul(out, out, w3)
        _copy(w3, out)


@njit(cache=True)
def _inverse(a, out):
    """Gauss-Jordan inverse with partial pivoting; returns the smallest
    pivot modulus (0.0 signals exact singularity)."""
    n = a.shape[0]
    aug = np.empty((n, 2 * n), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            aug[i, j] = a[i, j]
            aug[i, n + j] = 1.0 if i == j else 0.0
    minpiv = 1e300
    for col in range(n):
        p = col
        best = abs(aug[col, col])
        for r in range(col + 1, n):
            v = abs(aug[r, col])
            if v > best:
                best = v
                p = r
        if p != col:
            for j in range(2 * n):
                t = aug[col, j]
                aug[col, j] = aug[p, j]
                aug[p, j] = t
        piv = aug[col, col]
        ap = abs(piv)
        if ap < minpiv:
            minpiv = ap
        if ap == 0.0:
            return 0.0
        inv = 1.0 / piv
        for j in range(col, 2 * n):
            aug[col, j] *= inv
        for r in range(n):
            if r != col:
                fac = aug[r, col]
                if fac != 0j:
                    for j in range(col, 2 * n):
                        aug[r, j] -= fac * aug[col, j]
    for i in range(n):
        for j in range(n):
            out[i, j] = aug[i, n + j]
    return minpiv


@njit(cache=True)
def _uref(amps, w, t, out):
    m, M = amps.shape
    for k in range(m):
        s = 0.0
        for l in range(1, M + 1):
            s += amps[k, l - 1] * np.sin(l * w * t)
        out[k] = s


@njit(cache=True)
def _lin_comb(u, gens, out):
    m = gens.shape[0]
    n = gens.shape[1]
    for i in range(n):
        for j in range(n):
            s = 0j
            for k in range(m):
                s += u[k] * gens[k, i, j]
            out[i, j] = s


@njit(cache=True)
def _feedback(x, xbar, gens, gains, ufb, xt, pinv, z, w1, w2):
    """Fills ufb with f_k Re Tr(Xbar Z Xbar^dag S_k); returns (V, 1/||P||_F).

    V is evaluated for free as ||(X~ - I) P||_F^2, the squared norm of the
    Cayley image.  1/||P||_F lower-bounds the spectral gap from -1.
    """
    n = x.shape[0]
    m = gens.shape[0]
    _matmul_hn(xbar, x, xt)
    for i in range(n):
        for j in range(n):
            w1[i, j] = xt[i, j] + (1.0 if i == j else 0.0)
    _inverse(w1, pinv)
    for i in range(n):
        for j in range(n):
            w1[i, j] = xt[i, j] - (1.0 if i == j else 0.0)
    _matmul(w1, pinv, w2)  # (X~ - I) P
    v = 0.0
    for i in range(n):
        for j in range(n):
            v += w2[i, j].real ** 2 + w2[i, j].imag ** 2
    _matmul(xt, w2, z)
    _matmul(z, pinv, w1)
    _matmul(w1, pinv, z)  # Z = X~ (X~ - I) P^3
    _matmul(xbar, z, w1)
    _matmul_nh(w1, xbar, w2)  # Xbar Z Xbar^dag
    for k in range(m):
        tr = 0j
        for i in range(n):
            for j in range(n):
                tr += w2[i, j] * gens[k, j, i]
        ufb[k] = gains[k] * tr.real
    pn = _fro(pinv)
    return v, 1.0 / pn


@njit(cache=True)
def advance_period(x0, xbar0, amps, gens, gains, T, nsteps, gap_floor,
                   dense_stride, dense_unorm, dense_lyap, record_u, u_out):
    """Advance the pair over [0, T] with X_bar(0) = xbar0.

    Returns (X_T, Xbar_T, V_T, max_V_increase, min_gap_proxy, status) with
    status 0 = ok, 1 = gap proxy fell below gap_floor (possible -1 crossing;
    caller re-checks exactly and raises).

    Substep recipe (one predictor pass, then the midpoint exponential):
      u_left  = uref(t) + fb(X, Xbar)
      X_half  = exp(h/2 sum u_left S) X;   Xbar_half = exp(h/2 A(t)) Xbar
      u_mid   = uref(t + h/2) + fb(X_half, Xbar_half)
      X      <- exp(h sum u_mid S) X;      Xbar     <- exp(h A(t + h/2)) Xbar
    The reference full step uses the midpoint of each substep, which makes
    the one-period reference product telescope to the identity exactly (up
    to rounding) because uref(T - s) = -uref(s).
    """
    n = x0.shape[0]
    m = gens.shape[0]
    h = T / nsteps
    w = 2 * np.pi / T
    x = x0.copy()
    xbar = xbar0.copy()
    xt = np.empty((n, n), dtype=np.complex128)
    pinv = np.empty((n, n), dtype=np.complex128)
    z = np.empty((n, n), dtype=np.complex128)
    w1 = np.empty((n, n), dtype=np.complex128)
    w2 = np.empty((n, n), dtype=np.complex128)
    w3 = np.empty((n, n), dtype=np.complex128)
    a = np.empty((n, n), dtype=np.complex128)
    e = np.empty((n, n), dtype=np.complex128)
    xh = np.empty((n, n), dtype=np.complex128)
    xbh = np.empty((n, n), dtype=np.complex128)
    ul = np.empty(m)
    um = np.empty(m)
    ufb = np.empty(m)
    utot = np.empty(m)
    v_prev, gap = _feedback(x, xbar, gens, gains, ufb, xt, pinv, z, w1, w2)
    min_gap = gap
    max_inc = -1e300
    v = v_prev
    nd = 0
    for i in range(nsteps):
        tl = i * h
        tm = tl + 0.5 * h
        # predictor: controls at the left endpoint
        v, gap = _feedback(x, xbar, gens, gains, ufb, xt, pinv, z, w1, w2)
        if gap < min_gap:
            min_gap = gap
        if gap < gap_floor:
            return x, xbar, v, max_inc, min_gap, 1
        _uref(amps, w, tl, ul)
        for k in range(m):
            utot[k] = ul[k] + ufb[k]
        _lin_comb(utot, gens, a)
        for ii in range(n):
            for jj in range(n):
                a[ii, jj] *= 0.5 * h
        _expm_small(a, e, w1, w2, w3)
        _matmul(e, x, xh)
        _lin_comb(ul, gens, a)
        for ii in range(n):
            for jj in range(n):
                a[ii, jj] *= 0.5 * h
        _expm_small(a, e, w1, w2, w3)
        _matmul(e, xbar, xbh)
        # corrector: controls at the half-step state, applied over the step
        v, gap = _feedback(xh, xbh, gens, gains, ufb, xt, pinv, z, w1, w2)
        if gap < min_gap:
            min_gap = gap
        if gap < gap_floor:
            return x, xbar, v, max_inc, min_gap, 1
        _uref(amps, w, tm, um)
        unorm2 = 0.0
        for k in range(m):
            utot[k] = um[k] + ufb[k]
            unorm2 += utot[k] * utot[k]
        if record_u != 0:
            for k in range(m):
                u_out[i, k] = utot[k]
        _lin_comb(utot, gens, a)
        for ii in range(n):
            for jj in range(n):
                a[ii, jj] *= h
        _expm_small(a, e, w1, w2, w3)
        _matmul(e, x, w3)
        _copy(w3, x)
        _lin_comb(um, gens, a)
        for ii in range(n):
            for jj in range(n):
                a[ii, jj] *= h
        _expm_small(a, e, w1, w2, w3)
        _matmul(e, xbar, w3)
        _copy(w3, xbar)
        v, gap = _feedback(x, xbar, gens, gains, ufb, xt, pinv, z, w1, w2)
        if gap < min_gap:
            min_gap = gap
        if v - v_prev > max_inc:
            max_inc = v - v_prev
        v_prev = v
        if dense_stride > 0 and (i + 1) % dense_stride == 0:
            dense_unorm[nd] = np.sqrt(unorm2)
            dense_lyap[nd] = v
            nd += 1
    return x, xbar, v, max_inc, min_gap, 0
