# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sparse kernels: AMD ordering, up-looking LDL^T, triangular solves.

Mirrors ``_kernels_py`` routine for routine; see that module for the
argument conventions.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

ctypedef cnp.int64_t idx_t


cdef inline idx_t _flip(idx_t i) nogil:
    return -i - 2


cdef idx_t _wclear(idx_t mark, idx_t lemax, idx_t[::1] w, idx_t n) nogil:
    cdef idx_t k
    if mark < 2 or mark + lemax < 0:
        for k in range(n):
            if w[k] != 0:
                w[k] = 1
        mark = 2
    return mark


cdef idx_t _tdfs(idx_t j, idx_t k, idx_t[::1] head, idx_t[::1] next_,
                 idx_t[::1] post, idx_t[::1] stack) nogil:
    cdef idx_t top = 0, p, i
    stack[0] = j
    while top >= 0:
        p = stack[top]
        i = head[p]
        if i == -1:
            top -= 1
            post[k] = p
            k += 1
        else:
            head[p] = next_[i]
            top += 1
            stack[top] = i
    return k


def amd_order(idx_t n, Cp_in, Ci_in):
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    cdef idx_t cnz = Cp_in[n]
    cdef idx_t dense = max(16, <idx_t>(10 * sqrt(<double>n)))
    dense = min(n - 2, dense)
    cdef idx_t nzmax = cnz + cnz // 5 + 2 * n
    cdef idx_t[::1] Cp = np.zeros(n + 2, dtype=np.int64)
    cdef idx_t[::1] Ci = np.zeros(max(nzmax, 1), dtype=np.int64)
    Cp_np = np.asarray(Cp)
    Cp_np[: n + 1] = Cp_in
    np.asarray(Ci)[:cnz] = Ci_in[:cnz]
    cdef idx_t[::1] P = np.zeros(n + 1, dtype=np.int64)
    cdef idx_t[::1] length = np.zeros(n + 1, dtype=np.int64)
    cdef idx_t[::1] nv = np.zeros(n + 1, dtype=np.int64)
    cdef idx_t[::1] next_ = np.zeros(n + 1, dtype=np.int64)
    cdef idx_t[::1] head = np.zeros(n + 1, dtype=np.int64)
    cdef idx_t[::1] elen = np.zeros(n + 1, dtype=np.int64)
    cdef idx_t[::1] degree = np.zeros(n + 1, dtype=np.int64)
    cdef idx_t[::1] w = np.zeros(n + 1, dtype=np.int64)
    cdef idx_t[::1] hhead = np.zeros(n + 1, dtype=np.int64)
    cdef idx_t[::1] last = P
    cdef idx_t i, j, k, d, nel = 0, mindeg = 0, lemax = 0, mark
    cdef idx_t elenk, nvk, p, q, k1, k3, e, pj, ln, nvi, nvj, dk, pk1, pk2, pk
    cdef idx_t eln, wnvi, p1, p2, p3, p4, pn, h, dext, jlast
    cdef bint ok

    with nogil:
        for k in range(n):
            length[k] = Cp[k + 1] - Cp[k]
        length[n] = 0
        for i in range(n + 1):
            head[i] = -1
            last[i] = -1
            next_[i] = -1
            hhead[i] = -1
            nv[i] = 1
            w[i] = 1
            elen[i] = 0
            degree[i] = length[i]
        mark = _wclear(0, 0, w, n)
        elen[n] = -2
        Cp[n] = -1
        w[n] = 0
        for i in range(n):
            d = degree[i]
            if d == 0:
                elen[i] = -2
                nel += 1
                Cp[i] = -1
                w[i] = 0
            elif d > dense:
                nv[i] = 0
                elen[i] = -1
                nel += 1
                Cp[i] = _flip(n)
                nv[n] += 1
            else:
                if head[d] != -1:
                    last[head[d]] = i
                next_[i] = head[d]
                head[d] = i

        while nel < n:
            k = -1
            while mindeg < n:
                k = head[mindeg]
                if k != -1:
                    break
                mindeg += 1
            if next_[k] != -1:
                last[next_[k]] = -1
            head[mindeg] = next_[k]
            elenk = elen[k]
            nvk = nv[k]
            nel += nvk

            if elenk > 0 and cnz + mindeg >= nzmax:
                for j in range(n):
                    p = Cp[j]
                    if p >= 0:
                        Cp[j] = Ci[p]
                        Ci[p] = _flip(j)
                q = 0
                p = 0
                while p < cnz:
                    j = _flip(Ci[p])
                    p += 1
                    if j >= 0:
                        Ci[q] = Cp[j]
                        Cp[j] = q
                        q += 1
                        for k3 in range(length[j] - 1):
                            Ci[q] = Ci[p]
                            q += 1
                            p += 1
                cnz = q

            dk = 0
            nv[k] = -nvk
            p = Cp[k]
            pk1 = p if elenk == 0 else cnz
            pk2 = pk1
            for k1 in range(1, elenk + 2):
                if k1 > elenk:
                    e = k
                    pj = p
                    ln = length[k] - elenk
                else:
                    e = Ci[p]
                    p += 1
                    pj = Cp[e]
                    ln = length[e]
                for k3 in range(ln):
                    i = Ci[pj]
                    pj += 1
                    nvi = nv[i]
                    if nvi <= 0:
                        continue
                    dk += nvi
                    nv[i] = -nvi
                    Ci[pk2] = i
                    pk2 += 1
                    if next_[i] != -1:
                        last[next_[i]] = last[i]
                    if last[i] != -1:
                        next_[last[i]] = next_[i]
                    else:
                        head[degree[i]] = next_[i]
                if e != k:
                    Cp[e] = _flip(k)
                    w[e] = 0
            if elenk != 0:
                cnz = pk2
            degree[k] = dk
            Cp[k] = pk1
            length[k] = pk2 - pk1
            elen[k] = -2

            mark = _wclear(mark, lemax, w, n)
            for pk in range(pk1, pk2):
                i = Ci[pk]
                eln = elen[i]
                if eln <= 0:
                    continue
                nvi = -nv[i]
                wnvi = mark - nvi
                for p in range(Cp[i], Cp[i] + eln):
                    e = Ci[p]
                    if w[e] >= mark:
                        w[e] -= nvi
                    elif w[e] != 0:
                        w[e] = degree[e] + wnvi

            for pk in range(pk1, pk2):
                i = Ci[pk]
                p1 = Cp[i]
                p2 = p1 + elen[i] - 1
                pn = p1
                h = 0
                d = 0
                for p in range(p1, p2 + 1):
                    e = Ci[p]
                    if w[e] != 0:
                        dext = w[e] - mark
                        if dext > 0:
                            d += dext
                            Ci[pn] = e
                            pn += 1
                            h += e
                        else:
                            Cp[e] = _flip(k)
                            w[e] = 0
                elen[i] = pn - p1 + 1
                p3 = pn
                p4 = p1 + length[i]
                for p in range(p2 + 1, p4):
                    j = Ci[p]
                    nvj = nv[j]
                    if nvj <= 0:
                        continue
                    d += nvj
                    Ci[pn] = j
                    pn += 1
                    h += j
                if d == 0:
                    Cp[i] = _flip(k)
                    nvi = -nv[i]
                    dk -= nvi
                    nvk += nvi
                    nel += nvi
                    nv[i] = 0
                    elen[i] = -1
                else:
                    degree[i] = min(degree[i], d)
                    Ci[pn] = Ci[p3]
                    Ci[p3] = Ci[p1]
                    Ci[p1] = k
                    length[i] = pn - p1 + 1
                    if h < 0:
                        h = -h
                    h = h % n
                    next_[i] = hhead[h]
                    hhead[h] = i
                    last[i] = h
            degree[k] = dk
            lemax = max(lemax, dk)
            mark = _wclear(mark + lemax, lemax, w, n)

            for pk in range(pk1, pk2):
                i = Ci[pk]
                if nv[i] >= 0:
                    continue
                h = last[i]
                i = hhead[h]
                hhead[h] = -1
                while i != -1 and next_[i] != -1:
                    ln = length[i]
                    eln = elen[i]
                    for p in range(Cp[i] + 1, Cp[i] + ln):
                        w[Ci[p]] = mark
                    jlast = i
                    j = next_[i]
                    while j != -1:
                        ok = length[j] == ln and elen[j] == eln
                        p = Cp[j] + 1
                        while ok and p <= Cp[j] + ln - 1:
                            if w[Ci[p]] != mark:
                                ok = False
                            p += 1
                        if ok:
                            Cp[j] = _flip(i)
                            nv[i] += nv[j]
                            nv[j] = 0
                            elen[j] = -1
                            j = next_[j]
                            next_[jlast] = j
                        else:
                            jlast = j
                            j = next_[j]
                    i = next_[i]
                    mark += 1

            p = pk1
            for pk in range(pk1, pk2):
                i = Ci[pk]
                nvi = -nv[i]
                if nvi <= 0:
                    continue
                nv[i] = nvi
                d = degree[i] + dk - nvi
                d = min(d, n - nel - nvi)
                if head[d] != -1:
                    last[head[d]] = i
                next_[i] = head[d]
                last[i] = -1
                head[d] = i
                mindeg = min(mindeg, d)
                degree[i] = d
                Ci[p] = i
                p += 1
            nv[k] = nvk
            length[k] = p - pk1
            if length[k] == 0:
                Cp[k] = -1
                w[k] = 0
            if elenk != 0:
                cnz = p

        for i in range(n):
            Cp[i] = _flip(Cp[i])
        for j in range(n + 1):
            head[j] = -1
        for j in range(n, -1, -1):
            if nv[j] > 0:
                continue
            next_[j] = head[Cp[j]]
            head[Cp[j]] = j
        for e in range(n, -1, -1):
            if nv[e] <= 0:
                continue
            if Cp[e] != -1:
                next_[e] = head[Cp[e]]
                head[Cp[e]] = e
        k = 0
        for i in range(n + 1):
            if Cp[i] == -1:
                k = _tdfs(i, k, head, next_, P, w)

    perm = np.asarray(P)
    return perm[perm != n].copy()


def ldl_symbolic(idx_t n, const idx_t[::1] Ap, const idx_t[::1] Ai,
                 const idx_t[::1] P, const idx_t[::1] Pinv):
    parent_np = np.full(n, -1, dtype=np.int64)
    lnz_np = np.zeros(n, dtype=np.int64)
    cdef idx_t[::1] parent = parent_np
    cdef idx_t[::1] lnz = lnz_np
    cdef idx_t[::1] flag = np.zeros(n, dtype=np.int64)
    cdef idx_t k, kk, p, i
    with nogil:
        for k in range(n):
            flag[k] = k
            kk = P[k]
            for p in range(Ap[kk], Ap[kk + 1]):
                i = Pinv[Ai[p]]
                if i < k:
                    while flag[i] != k:
                        if parent[i] == -1:
                            parent[i] = k
                        lnz[i] += 1
                        flag[i] = k
                        i = parent[i]
    Lp = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(lnz_np, out=Lp[1:])
    return Lp, parent_np


def ldl_numeric(idx_t n, const idx_t[::1] Ap, const idx_t[::1] Ai,
                const double[::1] Ax, const idx_t[::1] Lp,
                const idx_t[::1] parent, const idx_t[::1] P,
                const idx_t[::1] Pinv, idx_t[::1] Li, double[::1] Lx,
                double[::1] D):
    cdef double[::1] Y = np.zeros(n, dtype=np.float64)
    cdef idx_t[::1] flag = np.zeros(n, dtype=np.int64)
    cdef idx_t[::1] lnz = np.zeros(n, dtype=np.int64)
    cdef idx_t[::1] pattern = np.zeros(n, dtype=np.int64)
    cdef idx_t k, kk, p, p2, i, top, ln
    cdef idx_t status = n
    cdef double yi, lki, dk
    with nogil:
        for k in range(n):
            Y[k] = 0.0
            top = n
            flag[k] = k
            lnz[k] = 0
            kk = P[k]
            for p in range(Ap[kk], Ap[kk + 1]):
                i = Pinv[Ai[p]]
                if i <= k:
                    Y[i] += Ax[p]
                    ln = 0
                    while flag[i] != k:
                        pattern[ln] = i
                        ln += 1
                        flag[i] = k
                        i = parent[i]
                    while ln > 0:
                        top -= 1
                        ln -= 1
                        pattern[top] = pattern[ln]
            dk = Y[k]
            Y[k] = 0.0
            while top < n:
                i = pattern[top]
                yi = Y[i]
                Y[i] = 0.0
                p2 = Lp[i] + lnz[i]
                for p in range(Lp[i], p2):
                    Y[Li[p]] -= Lx[p] * yi
                lki = yi / D[i]
                dk -= lki * yi
                Li[p2] = k
                Lx[p2] = lki
                lnz[i] += 1
                top += 1
            D[k] = dk
            if dk == 0.0:
                status = k
                break
    return status


def ldl_solve_inplace(idx_t n, const idx_t[::1] Lp, const idx_t[::1] Li,
                      const double[::1] Lx, const double[::1] D,
                      double[::1] x):
    cdef idx_t j, p
    cdef double xj, s
    with nogil:
        for j in range(n):
            xj = x[j]
            for p in range(Lp[j], Lp[j + 1]):
                x[Li[p]] -= Lx[p] * xj
        for j in range(n):
            x[j] /= D[j]
        for j in range(n - 1, -1, -1):
            s = x[j]
            for p in range(Lp[j], Lp[j + 1]):
                s -= Lx[p] * x[Li[p]]
            x[j] = s
