"""Inner loops with two interchangeable backends.

The numba backend compiles the loops with ``@njit``; the numpy backend is
plain numpy / Python and is selected when numba is missing or when the
environment variable ``FUNSS_DISABLE_NUMBA`` is set to a truthy value.
Both backends run the alias and gather loops in the same floating-point
order, so alias tables and drawn indices agree bit for bit.  The numba
projection kernel reorders its sums for vectorization and agrees with the
numpy one to rounding.

Dense linear algebra (Gram products, eigensolvers) stays on BLAS/LAPACK
and is not duplicated here.
"""
from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

_TRUTHY = {"1", "true", "yes", "on"}


def _numba_requested() -> bool:
    return os.environ.get("FUNSS_DISABLE_NUMBA", "").strip().lower() not in _TRUTHY


# ---------------------------------------------------------------------------
# numpy / Python reference path


def _alias_build_np(p):
    n = p.shape[0]
    ps = (p * n).tolist()
    prob = [1.0] * n
    alias = list(range(n))
    small = [i for i in range(n) if ps[i] < 1.0]
    large = [i for i in range(n) if not ps[i] < 1.0]
    while small and large:
        l = small.pop()
        g = large.pop()
        prob[l] = ps[l]
        alias[l] = g
        ps[g] = (ps[l] + ps[g]) - 1.0
        if ps[g] < 1.0:
            small.append(g)
        else:
            large.append(g)
    # Leftovers carry mass ~1 up to rounding; a zero-mass leftover must
    # still never be returned.
    top = int(np.argmax(p))
    for i in small + large:
        if p[i] == 0.0:
            prob[i] = 0.0
            alias[i] = top
    return np.asarray(prob, dtype=np.float64), np.asarray(alias, dtype=np.int64)


def _alias_lookup_np(prob, alias, u_slot, u_coin):
    n = prob.shape[0]
    j = np.minimum((u_slot * n).astype(np.int64), n - 1)
    return np.where(u_coin < prob[j], j, alias[j])


def _project_np(xw, basis):
    return xw @ basis


def _gather_scaled_np(xw, idx, scale):
    return xw[idx] * scale[:, None]


NUMPY = SimpleNamespace(
    name="numpy",
    alias_build=_alias_build_np,
    alias_lookup=_alias_lookup_np,
    project=_project_np,
    gather_scaled=_gather_scaled_np,
)


# ---------------------------------------------------------------------------
# numba path

NUMBA = None
try:
    import numba as _nb
except ImportError:  # pragma: no cover - numba is an optional accelerator
    _nb = None

if _nb is not None:

    @_nb.njit(cache=True)
    def _alias_build_nb(p):
        n = p.shape[0]
        ps = p * n
        prob = np.ones(n)
        alias = np.arange(n)
        small = np.empty(n, dtype=np.int64)
        large = np.empty(n, dtype=np.int64)
        ns = 0
        nl = 0
        for i in range(n):
            if ps[i] < 1.0:
                small[ns] = i
                ns += 1
            else:
                large[nl] = i
                nl += 1
        while ns > 0 and nl > 0:
            ns -= 1
            l = small[ns]
            nl -= 1
            g = large[nl]
            prob[l] = ps[l]
            alias[l] = g
            ps[g] = (ps[l] + ps[g]) - 1.0
            if ps[g] < 1.0:
                small[ns] = g
                ns += 1
            else:
                large[nl] = g
                nl += 1
        top = np.argmax(p)
        for k in range(ns):
            i = small[k]
            if p[i] == 0.0:
                prob[i] = 0.0
                alias[i] = top
        for k in range(nl):
            i = large[k]
            if p[i] == 0.0:
                prob[i] = 0.0
                alias[i] = top
        return prob, alias

    @_nb.njit(cache=True)
    def _alias_lookup_nb(prob, alias, u_slot, u_coin):
        n = prob.shape[0]
        m = u_slot.shape[0]
        out = np.empty(m, dtype=np.int64)
        for c in range(m):
            j = np.int64(u_slot[c] * n)
            if j > n - 1:
                j = n - 1
            if u_coin[c] < prob[j]:
                out[c] = j
            else:
                out[c] = alias[j]
        return out

    @_nb.njit(cache=True, fastmath=True)
    def _project_rows_nb(xw, bt):
        # two rows per sweep share each basis load; rows stay in cache
        # across the rank loop, so the data is streamed from memory once
        n_rows, n_pts = xw.shape
        rank = bt.shape[0]
        coef = np.empty((n_rows, rank))
        last = n_rows - n_rows % 2
        for n in range(0, last, 2):
            a = xw[n]
            b = xw[n + 1]
            for r in range(rank):
                w = bt[r]
                ca = 0.0
                cb = 0.0
                for i in range(n_pts):
                    ca += a[i] * w[i]
                    cb += b[i] * w[i]
                coef[n, r] = ca
                coef[n + 1, r] = cb
        if last < n_rows:
            a = xw[last]
            for r in range(rank):
                w = bt[r]
                ca = 0.0
                for i in range(n_pts):
                    ca += a[i] * w[i]
                coef[last, r] = ca
        return coef

    def _project_nb(xw, basis):
        return _project_rows_nb(xw, np.ascontiguousarray(basis.T))

    @_nb.njit(cache=True)
    def _gather_scaled_nb(xw, idx, scale):
        m = idx.shape[0]
        n_pts = xw.shape[1]
        out = np.empty((m, n_pts))
        for c in range(m):
            row = idx[c]
            s = scale[c]
            for i in range(n_pts):
                out[c, i] = xw[row, i] * s
        return out

    NUMBA = SimpleNamespace(
        name="numba",
        alias_build=_alias_build_nb,
        alias_lookup=_alias_lookup_nb,
        project=_project_nb,
        gather_scaled=_gather_scaled_nb,
    )


ACTIVE = NUMBA if (NUMBA is not None and _numba_requested()) else NUMPY
BACKEND = ACTIVE.name


def alias_build(p):
    """Vose alias table ``(prob, alias)`` for a normalized probability vector."""
    return ACTIVE.alias_build(np.ascontiguousarray(p, dtype=np.float64))


def alias_lookup(prob, alias, u_slot, u_coin):
    """Map paired uniforms on [0, 1) to alias-table draws."""
    return ACTIVE.alias_lookup(prob, alias, u_slot, u_coin)


def project(xw, basis):
    """Coefficients ``xw @ basis`` of every row on an orthonormal basis (N x R)."""
    return ACTIVE.project(
        np.ascontiguousarray(xw, dtype=np.float64),
        np.ascontiguousarray(basis, dtype=np.float64),
    )


def gather_scaled(xw, idx, scale):
    """Rows ``xw[idx[c]] * scale[c]`` stacked into a new matrix."""
    return ACTIVE.gather_scaled(
        np.ascontiguousarray(xw, dtype=np.float64),
        np.ascontiguousarray(idx, dtype=np.int64),
        np.ascontiguousarray(scale, dtype=np.float64),
    )
