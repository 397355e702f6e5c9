"""Per-mode inner loops.

Each kernel exists twice: a numba ``@njit`` version and a vectorised numpy
version with identical semantics.  The active implementation is picked at
import time; set ``TPPAR_NO_NUMBA=1`` to force the numpy path (or when numba
is not importable).  Both implementations stay importable as
``numba_impl`` / ``numpy_impl`` so tests and the benchmark can compare them.

Array conventions (``M`` = number of frequency modes):

* ``horner(coeffs, z)``: ``coeffs`` (M, d+1) highest power first, ``z`` (M, P).
* ``classify_roots(roots, tol)``: roots (M, 2m) -> plus (M, m), minus (M, m),
  status (M,) with 0 = ok, 1 = root within ``tol*(1+|root|)`` of the real
  axis, 2 = split other than m/m.
* ``vieta(roots)``: (M, m) -> monic coefficients (M, m+1), highest first.
* ``exp_sum(weights, nodes, x)``: sum_j weights[:, a, j] exp(i x nodes[:, j]),
  shape (M, A, P).
* ``polymod(p, q)``: ascending coefficients, ``q`` monic of degree m;
  remainder (M, m), ascending.
"""

import os
import types

import numpy as np

__all__ = ["horner", "classify_roots", "vieta", "exp_sum", "polymod",
           "USING_NUMBA", "numpy_impl", "numba_impl"]


# ---------------------------------------------------------------- numpy path

def _np_horner(coeffs, z):
    out = np.zeros(z.shape, dtype=np.complex128)
    out += coeffs[:, :1]
    for c in range(1, coeffs.shape[1]):
        out *= z
        out += coeffs[:, c:c + 1]
    return out


def _np_classify_roots(roots, tol):
    two_m = roots.shape[1]
    m = two_m // 2
    im = roots.imag
    bad = np.abs(im) < tol * (1.0 + np.abs(roots))
    n_plus = np.sum(im > 0, axis=1)
    status = np.zeros(roots.shape[0], dtype=np.int64)
    status[n_plus != m] = 2
    status[np.any(bad, axis=1)] = 1
    # plus roots first, each side ordered by real part
    key = np.where(im > 0, 0.0, 1.0)
    order = np.lexsort((roots.real, key), axis=1)
    srt = np.take_along_axis(roots, order, axis=1)
    plus = srt[:, :m].copy()
    minus = srt[:, m:].copy()
    return plus, minus, status


def _np_vieta(roots):
    n_modes, m = roots.shape
    c = np.zeros((n_modes, m + 1), dtype=np.complex128)
    c[:, 0] = 1.0
    for j in range(m):
        r = roots[:, j:j + 1]
        # multiply current polynomial (degree j) by (z - r)
        c[:, 1:j + 2] = c[:, 1:j + 2] - r * c[:, 0:j + 1]
    return c


def _np_exp_sum(weights, nodes, x):
    phase = np.exp(1j * x[None, None, :] * nodes[:, :, None])  # (M, J, P)
    return np.einsum("maj,mjp->map", weights, phase)


def _np_polymod(p, q):
    m = q.shape[1] - 1
    r = np.array(p, dtype=np.complex128, copy=True)
    if r.shape[1] <= m:
        out = np.zeros((p.shape[0], m), dtype=np.complex128)
        out[:, :r.shape[1]] = r
        return out
    for top in range(r.shape[1] - 1, m - 1, -1):
        lead = r[:, top:top + 1]
        r[:, top - m:top + 1] -= lead * q
    return r[:, :m].copy()


numpy_impl = types.SimpleNamespace(
    horner=_np_horner,
    classify_roots=_np_classify_roots,
    vieta=_np_vieta,
    exp_sum=_np_exp_sum,
    polymod=_np_polymod,
)


# ---------------------------------------------------------------- numba path

def _build_numba():
    from numba import njit

    @njit(cache=True)
    def horner(coeffs, z):
        n_modes, n_pts = z.shape
        d1 = coeffs.shape[1]
        out = np.empty((n_modes, n_pts), dtype=np.complex128)
        for i in range(n_modes):
            for p in range(n_pts):
                acc = coeffs[i, 0] + 0j
                zz = z[i, p]
                for c in range(1, d1):
                    acc = acc * zz + coeffs[i, c]
                out[i, p] = acc
        return out

    @njit(cache=True)
    def classify_roots(roots, tol):
        n_modes, two_m = roots.shape
        m = two_m // 2
        plus = np.zeros((n_modes, m), dtype=np.complex128)
        minus = np.zeros((n_modes, m), dtype=np.complex128)
        status = np.zeros(n_modes, dtype=np.int64)
        for i in range(n_modes):
            ip = 0
            im_ = 0
            for j in range(two_m):
                r = roots[i, j]
                if abs(r.imag) < tol * (1.0 + abs(r)):
                    status[i] = 1
                if r.imag > 0:
                    if ip < m:
                        plus[i, ip] = r
                    ip += 1
                else:
                    if im_ < m:
                        minus[i, im_] = r
                    im_ += 1
            if status[i] == 0 and ip != m:
                status[i] = 2
            if ip == m:
                # insertion sort by real part, matches the numpy ordering
                for side in (plus, minus):
                    for a in range(1, m):
                        v = side[i, a]
                        b = a - 1
                        while b >= 0 and side[i, b].real > v.real:
                            side[i, b + 1] = side[i, b]
                            b -= 1
                        side[i, b + 1] = v
        return plus, minus, status

    @njit(cache=True)
    def vieta(roots):
        n_modes, m = roots.shape
        c = np.zeros((n_modes, m + 1), dtype=np.complex128)
        for i in range(n_modes):
            c[i, 0] = 1.0
            for j in range(m):
                r = roots[i, j]
                for a in range(j + 1, 0, -1):
                    c[i, a] = c[i, a] - r * c[i, a - 1]
        return c

    @njit(cache=True)
    def exp_sum(weights, nodes, x):
        n_modes, n_a, n_j = weights.shape
        n_pts = x.shape[0]
        out = np.zeros((n_modes, n_a, n_pts), dtype=np.complex128)
        for i in range(n_modes):
            for j in range(n_j):
                zr = nodes[i, j].real
                zi = nodes[i, j].imag
                for p in range(n_pts):
                    # exp(i x z) split into modulus and phase
                    mod = np.exp(-x[p] * zi)
                    e = complex(mod * np.cos(x[p] * zr), mod * np.sin(x[p] * zr))
                    for a in range(n_a):
                        out[i, a, p] += weights[i, a, j] * e
        return out

    @njit(cache=True)
    def polymod(p, q):
        n_modes, dp1 = p.shape
        m = q.shape[1] - 1
        out = np.zeros((n_modes, m), dtype=np.complex128)
        r = np.empty(dp1, dtype=np.complex128)
        for i in range(n_modes):
            for a in range(dp1):
                r[a] = p[i, a]
            for top in range(dp1 - 1, m - 1, -1):
                lead = r[top]
                for s in range(m + 1):
                    r[top - m + s] -= lead * q[i, s]
            for a in range(min(m, dp1)):
                out[i, a] = r[a]
        return out

    return types.SimpleNamespace(
        horner=horner,
        classify_roots=classify_roots,
        vieta=vieta,
        exp_sum=exp_sum,
        polymod=polymod,
    )


try:
    numba_impl = _build_numba()
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba_impl = None

USING_NUMBA = numba_impl is not None and os.environ.get("TPPAR_NO_NUMBA", "0") in ("", "0")
_impl = numba_impl if USING_NUMBA else numpy_impl


def horner(coeffs, z):
    coeffs = np.ascontiguousarray(coeffs, dtype=np.complex128)
    z = np.ascontiguousarray(np.broadcast_to(z, (coeffs.shape[0],) + np.shape(z)[-1:]),
                             dtype=np.complex128)
    return _impl.horner(coeffs, z)


def classify_roots(roots, tol):
    return _impl.classify_roots(np.ascontiguousarray(roots, dtype=np.complex128), float(tol))


def vieta(roots):
    return _impl.vieta(np.ascontiguousarray(roots, dtype=np.complex128))


def exp_sum(weights, nodes, x):
    return _impl.exp_sum(np.ascontiguousarray(weights, dtype=np.complex128),
                         np.ascontiguousarray(nodes, dtype=np.complex128),
                         np.ascontiguousarray(x, dtype=np.float64))


def polymod(p, q):
    return _impl.polymod(np.ascontiguousarray(p, dtype=np.complex128),
                         np.ascontiguousarray(q, dtype=np.complex128))
