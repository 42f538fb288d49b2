"""Pure-Python sparse kernels.

Reference implementation of the routines in ``_kernels.pyx``. Selected at
import time when the compiled module is unavailable (or when
``SLL_PURE_PYTHON=1``), and used by the tests as an independent check of the
compiled path. Every routine works on plain CSC index arrays of a square
matrix whose pattern is structurally symmetric.
"""
import numpy as np


def _flip(i):
    return -i - 2


def _wclear(mark, lemax, w, n):
    if mark < 2 or mark + lemax < 0:
        for k in range(n):
            if w[k] != 0:
                w[k] = 1
        mark = 2
    return mark


def _tdfs(j, k, head, next_, post, stack):
    top = 0
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


def amd_order(n, Cp_in, Ci_in):
    """Approximate minimum degree ordering of a symmetric pattern.

    Parameters
    ----------
    n : int
        Matrix dimension.
    Cp_in, Ci_in : ndarray of int64
        CSC pattern of the symmetric matrix *without* diagonal entries
        (both triangles present).

    Returns
    -------
    ndarray
        Permutation ``p`` such that ``A[p][:, p]`` has small Cholesky fill.
    """
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    cnz = int(Cp_in[n])
    dense = max(16, int(10 * np.sqrt(n)))
    dense = min(n - 2, dense)
    nzmax = cnz + cnz // 5 + 2 * n
    Cp = [int(v) for v in Cp_in] + [0]
    Ci = [int(v) for v in Ci_in[:cnz]] + [0] * (nzmax - cnz)
    P = [0] * (n + 1)
    length = [0] * (n + 1)
    nv = [0] * (n + 1)
    next_ = [0] * (n + 1)
    head = [0] * (n + 1)
    elen = [0] * (n + 1)
    degree = [0] * (n + 1)
    w = [0] * (n + 1)
    hhead = [0] * (n + 1)
    last = P

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
    nel = 0
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

    mindeg = 0
    lemax = 0
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

        # garbage collection
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
                    for _ in range(length[j] - 1):
                        Ci[q] = Ci[p]
                        q += 1
                        p += 1
            cnz = q

        # construct new element
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
            for _ in range(ln):
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

        # set differences |Le \ Lk|
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

        # degree update
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
                h = abs(h) % n
                next_[i] = hhead[h]
                hhead[h] = i
                last[i] = h
        degree[k] = dk
        lemax = max(lemax, dk)
        mark = _wclear(mark + lemax, lemax, w, n)

        # supernode detection
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

        # finalize new element
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

    # postorder the assembly tree
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
    perm = np.array([v for v in P if v != n], dtype=np.int64)
    return perm


def ldl_symbolic(n, Ap, Ai, P, Pinv):
    """Elimination tree and column counts of L for ``A[P][:, P]``.

    Returns ``(Lp, parent)``.
    """
    Ap = Ap.tolist()
    Ai = Ai.tolist()
    P = P.tolist()
    Pinv = Pinv.tolist()
    par = [-1] * n
    fl = [0] * n
    cnt = [0] * n
    for k in range(n):
        fl[k] = k
        kk = P[k]
        for p in range(Ap[kk], Ap[kk + 1]):
            i = Pinv[Ai[p]]
            if i < k:
                while fl[i] != k:
                    if par[i] == -1:
                        par[i] = k
                    cnt[i] += 1
                    fl[i] = k
                    i = par[i]
    Lp = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(cnt, out=Lp[1:])
    return Lp, np.array(par, dtype=np.int64)


def ldl_numeric(n, Ap, Ai, Ax, Lp, parent, P, Pinv, Li, Lx, D):
    """Up-looking LDL^T numeric factorization with static pivots.

    Fills ``Li``, ``Lx`` and ``D`` in place. Returns the index of the first
    exactly-zero pivot, or ``n`` on success.
    """
    Ap_ = Ap.tolist()
    Ai_ = Ai.tolist()
    Ax_ = Ax.tolist()
    Lp_ = Lp.tolist()
    par = parent.tolist()
    P_ = P.tolist()
    Pinv_ = Pinv.tolist()
    Y = [0.0] * n
    flag = [0] * n
    lnz = [0] * n
    pattern = [0] * n
    Li_ = [0] * len(Li)
    Lx_ = [0.0] * len(Lx)
    D_ = [0.0] * n
    status = n
    for k in range(n):
        Y[k] = 0.0
        top = n
        flag[k] = k
        lnz[k] = 0
        kk = P_[k]
        for p in range(Ap_[kk], Ap_[kk + 1]):
            i = Pinv_[Ai_[p]]
            if i <= k:
                Y[i] += Ax_[p]
                ln = 0
                while flag[i] != k:
                    pattern[ln] = i
                    ln += 1
                    flag[i] = k
                    i = par[i]
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
            p2 = Lp_[i] + lnz[i]
            for p in range(Lp_[i], p2):
                Y[Li_[p]] -= Lx_[p] * yi
            lki = yi / D_[i]
            dk -= lki * yi
            Li_[p2] = k
            Lx_[p2] = lki
            lnz[i] += 1
            top += 1
        D_[k] = dk
        if dk == 0.0:
            status = k
            break
    Li[:] = Li_
    Lx[:] = Lx_
    D[:] = D_
    return status


def ldl_solve_inplace(n, Lp, Li, Lx, D, x):
    """Solve ``L D L^T y = x`` in place (permutation handled by caller)."""
    Lp_ = Lp.tolist()
    Li_ = Li.tolist()
    Lx_ = Lx.tolist()
    xs = x.tolist()
    for j in range(n):
        xj = xs[j]
        for p in range(Lp_[j], Lp_[j + 1]):
            xs[Li_[p]] -= Lx_[p] * xj
    for j in range(n):
        xs[j] /= D[j]
    for j in range(n - 1, -1, -1):
        s = xs[j]
        for p in range(Lp_[j], Lp_[j + 1]):
            s -= Lx_[p] * xs[Li_[p]]
        xs[j] = s
    x[:] = xs
