"""Compiled tree growth and depth queries over packed node arrays.

A tree is stored in preorder: ``attr[k] == -1`` marks a leaf, otherwise
``split[k]`` is the threshold and ``left[k]``/``right[k]`` the children.
Every random decision consumes the next uniform from the tree's row ``u``;
the draw order matches :func:`isodepth.forest.build_tree`.
"""

import numpy as np
from numba import njit

MAX_REDRAWS = 64


@njit(cache=True, nogil=True)
def _floyd_subsample(n, psi, u, cursor, out):
    mark = np.zeros(n, np.bool_)
    for j in range(n - psi, n):
        t = int(u[cursor] * (j + 1))
        cursor += 1
        if t > j:
            t = j
        if mark[t]:
            t = j
        mark[t] = True
    c = 0
    for i in range(n):
        if mark[i]:
            out[c] = i
            c += 1
    return cursor


@njit(cache=True, nogil=True)
def _grow(X, points, u, cursor, attr, split, left, right):
    n = points.size
    d = X.shape[1]
    K = attr.size
    buf = np.empty(n, np.int64)
    st_start = np.empty(K + 1, np.int64)
    st_end = np.empty(K + 1, np.int64)
    st_parent = np.empty(K + 1, np.int64)
    st_side = np.empty(K + 1, np.int64)
    cand = np.empty(d, np.int64)
    c_lo = np.empty(d)
    c_hi = np.empty(d)

    top = 0
    st_start[0] = 0
    st_end[0] = n
    st_parent[0] = -1
    st_side[0] = 0
    top = 1
    nn = 0
    while top > 0:
        top -= 1
        start = st_start[top]
        end = st_end[top]
        parent = st_parent[top]
        side = st_side[top]
        node = nn
        nn += 1
        if parent >= 0:
            if side == 0:
                left[parent] = node
            else:
                right[parent] = node
        attr[node] = -1
        split[node] = np.nan
        left[node] = -1
        right[node] = -1
        if end - start <= 1:
            continue

        nc = 0
        for j in range(d):
            lo = X[points[start], j]
            hi = lo
            for p in range(start + 1, end):
                v = X[points[p], j]
                if v < lo:
                    lo = v
                elif v > hi:
                    hi = v
            if hi > lo:
                cand[nc] = j
                c_lo[nc] = lo
                c_hi[nc] = hi
                nc += 1
        if nc == 0:
            continue

        if cursor < u.size:
            ua = u[cursor]
            cursor += 1
        else:
            ua = 0.5
        c = int(ua * nc)
        if c >= nc:
            c = nc - 1
        j = cand[c]
        lo = c_lo[c]
        hi = c_hi[c]

        s = lo
        ok = False
        for _ in range(MAX_REDRAWS + 1):
            if cursor >= u.size:
                break
            s = lo + u[cursor] * (hi - lo)
            cursor += 1
            if s < hi:
                ok = True
                break
        if not ok:
            s = 0.5 * (lo + hi)
            if s >= hi:
                s = lo

        nl = 0
        for p in range(start, end):
            if X[points[p], j] <= s:
                buf[nl] = points[p]
                nl += 1
        m = nl
        for p in range(start, end):
            if X[points[p], j] > s:
                buf[m] = points[p]
                m += 1
        for p in range(end - start):
            points[start + p] = buf[p]

        attr[node] = j
        split[node] = s
        mid = start + nl
        st_start[top] = mid
        st_end[top] = end
        st_parent[top] = node
        st_side[top] = 1
        top += 1
        st_start[top] = start
        st_end[top] = mid
        st_parent[top] = node
        st_side[top] = 0
        top += 1
    return cursor


@njit(cache=True, nogil=True)
def grow_chunk(X, psi, U, attr, split, left, right, subs):
    """Grow one tree per row of ``U``; ``psi < n`` triggers subsampling."""
    n = X.shape[0]
    T = U.shape[0]
    for t in range(T):
        u = U[t]
        cursor = 0
        if psi < n:
            cursor = _floyd_subsample(n, psi, u, cursor, subs[t])
        else:
            for i in range(n):
                subs[t, i] = i
        points = subs[t].astype(np.int64)
        _grow(X, points, u, cursor, attr[t], split[t], left[t], right[t])


@njit(cache=True, nogil=True)
def depths(Q, attr, split, left, right, out):
    T = attr.shape[0]
    q = Q.shape[0]
    for t in range(T):
        a = attr[t]
        s = split[t]
        lf = left[t]
        rt = right[t]
        for i in range(q):
            k = 0
            h = 0
            while a[k] >= 0:
                if Q[i, a[k]] <= s[k]:
                    k = lf[k]
                else:
                    k = rt[k]
                h += 1
            out[t, i] = h
