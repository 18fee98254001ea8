"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The backend is chosen once at import time: numba is used when it imports
cleanly and the environment variable ``SPIKERING_NO_NUMBA`` is unset/empty.
``GPE_THREADS`` caps the numba thread pool.  Reductions that feed reported
numbers always go through ``numpy`` pairwise summation so results do not
depend on the backend or thread count.
"""
from __future__ import annotations

import os

import numpy as np

_disabled = bool(os.environ.get("SPIKERING_NO_NUMBA", ""))

if not _disabled:
    try:
        import numba
        from numba import njit

        _threads = os.environ.get("GPE_THREADS", "")
        if _threads:
            numba.set_num_threads(max(1, int(_threads)))
        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - exercised via env flag instead
        HAVE_NUMBA = False
else:
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# Profile evaluation: cubic Hermite on knots, exponential tail model beyond.
# value(r) = C * r^((1-d)/2) * exp(-r) for r >= tail_start.
# ---------------------------------------------------------------------------

def _hermite_tail_eval_numpy(r, knots, vals, ders, tail_start, tail_c, halfdm1):
    r = np.asarray(r, dtype=np.float64)
    val = np.empty_like(r)
    der = np.empty_like(r)
    in_tail = r >= tail_start
    core = ~in_tail

    if np.any(core):
        rc = r[core]
        idx = np.clip(np.searchsorted(knots, rc, side="right") - 1, 0, len(knots) - 2)
        h = knots[idx + 1] - knots[idx]
        t = (rc - knots[idx]) / h
        y0 = vals[idx]
        y1 = vals[idx + 1]
        d0 = ders[idx] * h
        d1 = ders[idx + 1] * h
        t2 = t * t
        t3 = t2 * t
        h00 = 2 * t3 - 3 * t2 + 1
        h10 = t3 - 2 * t2 + t
        h01 = -2 * t3 + 3 * t2
        h11 = t3 - t2
        val[core] = h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1
        dh00 = 6 * t2 - 6 * t
        dh10 = 3 * t2 - 4 * t + 1
        dh01 = -dh00
        dh11 = 3 * t2 - 2 * t
        der[core] = (dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1) / h

    if np.any(in_tail):
        rt = r[in_tail]
        pw = np.power(rt, -halfdm1) if halfdm1 != 0.0 else np.ones_like(rt)
        v = tail_c * pw * np.exp(-rt)
        val[in_tail] = v
        der[in_tail] = -v * (1.0 + halfdm1 / rt)
    return val, der


if HAVE_NUMBA:

    @njit(cache=True)
    def _hermite_tail_eval_numba(r, knots, vals, ders, tail_start, tail_c, halfdm1):
        n = r.shape[0]
        val = np.empty(n, dtype=np.float64)
        der = np.empty(n, dtype=np.float64)
        nk = knots.shape[0]
        for i in range(n):
            ri = r[i]
            if ri >= tail_start:
                if halfdm1 != 0.0:
                    pw = ri ** (-halfdm1)
                else:
                    pw = 1.0
                v = tail_c * pw * np.exp(-ri)
                val[i] = v
                der[i] = -v * (1.0 + halfdm1 / ri)
            else:
                lo = 0
                hi = nk - 1
                while hi - lo > 1:
                    mid = (lo + hi) // 2
                    if knots[mid] <= ri:
                        lo = mid
                    else:
                        hi = mid
                h = knots[lo + 1] - knots[lo]
                t = (ri - knots[lo]) / h
                y0 = vals[lo]
                y1 = vals[lo + 1]
                d0 = ders[lo] * h
                d1 = ders[lo + 1] * h
                t2 = t * t
                t3 = t2 * t
                val[i] = ((2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * d0
                          + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * d1)
                der[i] = ((6 * t2 - 6 * t) * (y0 - y1) + (3 * t2 - 4 * t + 1) * d0
                          + (3 * t2 - 2 * t) * d1) / h
        return val, der


def hermite_tail_eval(r, knots, vals, ders, tail_start, tail_c, halfdm1):
    """Evaluate (value, derivative) of a tabulated radial profile."""
    r = np.ascontiguousarray(np.atleast_1d(np.asarray(r, dtype=np.float64)))
    shape = r.shape
    if HAVE_NUMBA:
        v, d = _hermite_tail_eval_numba(r.ravel(), knots, vals, ders,
                                        tail_start, tail_c, halfdm1)
        return v.reshape(shape), d.reshape(shape)
    return _hermite_tail_eval_numpy(r.ravel(), knots, vals, ders,
                                    tail_start, tail_c, halfdm1)


# ---------------------------------------------------------------------------
# Edge-form stencil: out = D^T (c (D u)) with zero ghosts at array ends.
# c arrays hold one weight per edge (shape grows by one along its axis);
# symmetry faces carry zero edge weight, Dirichlet faces the boundary weight.
# ---------------------------------------------------------------------------

def _apply_edge_form_numpy(u, c0, c1, c2):
    out = np.zeros_like(u)
    g = np.empty_like(c0)
    g[0] = u[0]
    g[1:-1] = u[1:] - u[:-1]
    g[-1] = -u[-1]
    g *= c0
    out += g[:-1] - g[1:]

    g = np.empty_like(c1)
    g[:, 0] = u[:, 0]
    g[:, 1:-1] = u[:, 1:] - u[:, :-1]
    g[:, -1] = -u[:, -1]
    g *= c1
    out += g[:, :-1] - g[:, 1:]

    g = np.empty_like(c2)
    g[:, :, 0] = u[:, :, 0]
    g[:, :, 1:-1] = u[:, :, 1:] - u[:, :, :-1]
    g[:, :, -1] = -u[:, :, -1]
    g *= c2
    out += g[:, :, :-1] - g[:, :, 1:]
    return out


if HAVE_NUMBA:

    @njit(cache=True, parallel=True)
    def _apply_edge_form_numba(u, c0, c1, c2):
        n0, n1, n2 = u.shape
        out = np.zeros_like(u)
        for i in numba.prange(n0):
            for j in range(n1):
                for k in range(n2):
                    x = u[i, j, k]
                    acc = 0.0
                    lo = x if i == 0 else x - u[i - 1, j, k]
                    hi = (-x) if i == n0 - 1 else u[i + 1, j, k] - x
                    acc += c0[i, j, k] * lo - c0[i + 1, j, k] * hi
                    lo = x if j == 0 else x - u[i, j - 1, k]
                    hi = (-x) if j == n1 - 1 else u[i, j + 1, k] - x
                    acc += c1[i, j, k] * lo - c1[i, j + 1, k] * hi
                    lo = x if k == 0 else x - u[i, j, k - 1]
                    hi = (-x) if k == n2 - 1 else u[i, j, k + 1] - x
                    acc += c2[i, j, k] * lo - c2[i, j, k + 1] * hi
                    out[i, j, k] = acc
        return out


def apply_edge_form(u, c0, c1, c2):
    """Apply the symmetric edge-weighted stiffness operator to ``u``."""
    if HAVE_NUMBA:
        return _apply_edge_form_numba(u, c0, c1, c2)
    return _apply_edge_form_numpy(u, c0, c1, c2)


# ---------------------------------------------------------------------------
# Pointwise symmetric 3x3 block multiply for triples of fields.
# ---------------------------------------------------------------------------

def _apply_sym3_numpy(m, x1, x2, x3):
    m11, m22, m33, m12, m13, m23 = m
    y1 = m11 * x1 + m12 * x2 + m13 * x3
    y2 = m12 * x1 + m22 * x2 + m23 * x3
    y3 = m13 * x1 + m23 * x2 + m33 * x3
    return y1, y2, y3


if HAVE_NUMBA:

    @njit(cache=True, parallel=True)
    def _apply_sym3_numba(m11, m22, m33, m12, m13, m23, x1, x2, x3):
        y1 = np.empty_like(x1)
        y2 = np.empty_like(x2)
        y3 = np.empty_like(x3)
        n = x1.size
        a1 = x1.ravel()
        a2 = x2.ravel()
        a3 = x3.ravel()
        b11 = m11.ravel()
        b22 = m22.ravel()
        b33 = m33.ravel()
        b12 = m12.ravel()
        b13 = m13.ravel()
        b23 = m23.ravel()
        o1 = y1.ravel()
        o2 = y2.ravel()
        o3 = y3.ravel()
        for i in numba.prange(n):
            o1[i] = b11[i] * a1[i] + b12[i] * a2[i] + b13[i] * a3[i]
            o2[i] = b12[i] * a1[i] + b22[i] * a2[i] + b23[i] * a3[i]
            o3[i] = b13[i] * a1[i] + b23[i] * a2[i] + b33[i] * a3[i]
        return y1, y2, y3


def apply_sym3(m, x1, x2, x3):
    """Multiply (x1,x2,x3) by a pointwise symmetric 3x3 matrix field."""
    if HAVE_NUMBA:
        return _apply_sym3_numba(*m, x1, x2, x3)
    return _apply_sym3_numpy(m, x1, x2, x3)


def dot(a, b):
    """Deterministic (pairwise) inner product of two arrays."""
    return float(np.sum(a * b))
