"""Symmetric generalized eigensolvers.

Two paths compute the eigenvalues of ``A x = lam M x`` nearest a shift:

* :func:`solve_dense_sym_generalized`, a dense reference via the Cholesky
  reduction ``L^{-1} A L^{-T}``;
* :func:`solve_shift_invert_lanczos`, Lanczos on ``(A - sigma M)^{-1} M``
  in the M inner product with full reorthogonalization.

:func:`solve_saddle_point_eig` runs the same Lanczos iteration on the
divergence-constrained (or penalized) pencil through a factorization of
the shifted block matrix ``[[A - sigma M, B^T], [B, -C]]``.

Single-vector Lanczos sees only one direction per eigenspace, so the
iteration is run in passes: converged Ritz vectors are locked, a fresh
random start is deflated against them, and passes continue until one
finds nothing new among the wanted eigenvalues.
"""
from dataclasses import dataclass, field
import os

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .ldl import SingularFactorError, SparseLDL

DEFAULT_TOL = 1e-9
MULTIPLICITY_RTOL = 1e-6
ZERO_RTOL = 1e-8
DENSE_FALLBACK_MAX = 3000
MAX_SHIFT_RETRIES = 3


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Mass matrix failed Cholesky; ``index`` is the 0-based failing pivot."""

    def __init__(self, index):
        super().__init__(f"matrix is not positive definite: Cholesky pivot {index} is not positive")
        self.index = index


class FactorizationError(ArithmeticError):
    pass


@dataclass
class EigResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = None
    residual_norms: np.ndarray = None
    iterations: int = 0
    method: str = "dense"
    converged: bool = True
    flags: list = field(default_factory=list)
    sigma: float = None
    info: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.eigenvalues)


def default_seed():
    return int(os.environ.get("SLL_SEED", "42"))


def group_multiplicities(values, rtol=MULTIPLICITY_RTOL, atol=0.0):
    """Group ascending values whose consecutive relative gap is within ``rtol``.

    Returns a list of ``(mean value, count)``.
    """
    groups = []
    for v in np.asarray(values, dtype=float):
        if groups:
            ref = groups[-1][-1]
            if abs(v - ref) <= rtol * max(abs(v), abs(ref)) + atol:
                groups[-1].append(v)
                continue
        groups.append([v])
    return [(float(np.mean(g)), len(g)) for g in groups]


def count_zero_modes(values, rtol=ZERO_RTOL):
    """Number of values with ``|v| <= rtol * v_nz``, v_nz the first clearly nonzero magnitude."""
    mags = np.sort(np.abs(np.asarray(values, dtype=float)))
    if len(mags) == 0 or mags[-1] == 0.0:
        return len(mags)
    first_nonzero = mags[mags > rtol * mags[-1]][0]
    return int((mags <= rtol * first_nonzero).sum())


def _dense(X):
    return X.toarray() if sp.issparse(X) else np.asarray(X, dtype=float)


def _residuals(A, M, vals, X):
    R = A @ X - (M @ X) * vals[None, :]
    mnorm = np.sqrt(np.einsum("ij,ij->j", X, M @ X))
    return np.linalg.norm(R, axis=0), mnorm


# ------------------------------------------------------------------ dense

def solve_dense_sym_generalized(A, M, k, vectors=True):
    """First ``k`` eigenpairs of the pencil (A, M) with M symmetric positive definite."""
    Ad, Md = _dense(A), _dense(M)
    n = Ad.shape[0]
    flags = []
    if k > n:
        flags.append("truncated")
        k = n
    if k <= 0:
        return EigResult(np.zeros(0), np.zeros((n, 0)), np.zeros(0), 0, "dense", True, flags)
    L, info = sla.lapack.dpotrf(Md, lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefiniteError(info - 1)
    if info < 0:
        raise ValueError("invalid argument to dpotrf")
    Y = sla.solve_triangular(L, Ad, lower=True)
    C = sla.solve_triangular(L, Y.T, lower=True)
    C = 0.5 * (C + C.T)
    w, Z = sla.eigh(C, subset_by_index=[0, k - 1])
    X = sla.solve_triangular(L, Z, lower=True, trans="T")
    res, mnorm = _residuals(Ad, Md, w, X)
    return EigResult(w, X if vectors else None, res / mnorm, 0, "dense", True, flags)


def nullspace_basis(B, rtol=1e-10):
    """Orthonormal basis of ker B from a pivoted QR of B^T."""
    Bd = _dense(B)
    Q, R, _ = sla.qr(Bd.T, mode="full", pivoting=True)
    d = np.abs(np.diag(R)) if R.size else np.zeros(0)
    rank = int((d > rtol * (d[0] if len(d) else 1.0)).sum())
    return Q[:, rank:]


def solve_nullspace_dense(A, B, M, k, penalty_block=None):
    """Dense oracle for the constrained pencil: restrict to ker B, then solve.

    With ``penalty_block`` C the pencil is ``A + B^T C^{-1} B`` instead.
    """
    Ad, Md = _dense(A), _dense(M)
    if penalty_block is not None:
        Bd = _dense(B)
        Ad = Ad + Bd.T @ np.linalg.solve(_dense(penalty_block), Bd)
        return solve_dense_sym_generalized(Ad, Md, k)
    Z = nullspace_basis(B)
    res = solve_dense_sym_generalized(Z.T @ Ad @ Z, Z.T @ Md @ Z, k)
    res.eigenvectors = Z @ res.eigenvectors
    return res


# ------------------------------------------------------------------ factorizations

class _DenseBunchKaufman:
    """Symmetric indefinite dense factorization (LAPACK sytrf via scipy.linalg.ldl)."""

    def __init__(self, K):
        Kd = _dense(K)
        self.lu, self.d, self.perm = sla.ldl(Kd, lower=True)
        ev = np.linalg.eigvalsh(self.d)
        scale = np.abs(ev).max() if len(ev) else 1.0
        if np.any(np.abs(ev) <= 1e-14 * scale):
            raise SingularFactorError(int(np.argmin(np.abs(ev))), float(ev[np.argmin(np.abs(ev))]))
        self._inertia = (int((ev > 0).sum()), int((ev < 0).sum()), 0)
        self.n = Kd.shape[0]
        self.pivot_ratio = float(scale / np.abs(ev).min())

    def solve(self, b):
        y = sla.solve_triangular(self.lu[self.perm], b[self.perm], lower=True, unit_diagonal=True)
        z = sla.solve(self.d, y, assume_a="sym")
        x = np.empty_like(b)
        x[self.perm] = sla.solve_triangular(self.lu[self.perm], z, lower=True, unit_diagonal=True, trans="T")
        return x

    def inertia(self):
        return self._inertia


class _SparseLU:
    """Last-resort sparse LU (no inertia available)."""

    def __init__(self, K):
        self.f = spla.splu(sp.csc_matrix(K))
        self.n = K.shape[0]
        self.pivot_ratio = float("nan")

    def solve(self, b):
        return self.f.solve(b)

    def inertia(self):
        return None


def factor_symmetric(K, allow_fallback=True):
    """LDL^T with AMD; on breakdown fall back to Bunch-Kaufman (small) or LU (large)."""
    try:
        return SparseLDL(K)
    except SingularFactorError:
        if not allow_fallback:
            raise
    if K.shape[0] <= DENSE_FALLBACK_MAX:
        return _DenseBunchKaufman(K)
    try:
        return _SparseLU(K)
    except RuntimeError as exc:
        raise SingularFactorError(-1, 0.0) from exc


def count_below(A, M, sigma):
    """Number of eigenvalues of (A, M) below sigma (Sylvester inertia of A - sigma M)."""
    F = SparseLDL(sp.csr_matrix(A) - sigma * sp.csr_matrix(M))
    return F.inertia()[1]


# ------------------------------------------------------------------ operators

class _StandardOp:
    def __init__(self, A, M, sigma):
        self.n = A.shape[0]
        self.F = SparseLDL(sp.csr_matrix(A) - sigma * sp.csr_matrix(M))
        self.M = M

    def __call__(self, v):
        return self.F.solve(self.M @ v)


class _SaddleOp:
    """v -> velocity part of K^{-1} [M v; 0] with K = [[A - sigma M, B^T], [B, -C]].

    For a hard constraint (C = 0) the factorized matrix carries a small
    regularization ``-delta I`` in the pressure block so that it is
    quasi-definite; iterative refinement against the exact K restores the
    unregularized solve.
    """

    def __init__(self, A, B, M, sigma, C=None):
        A = sp.csr_matrix(A)
        B = sp.csr_matrix(B)
        self.nu, self.np_ = A.shape[0], B.shape[0]
        self.n = self.nu
        self.M = M
        S = A - sigma * sp.csr_matrix(M)
        if C is None:
            a = np.abs(S.diagonal()).max()
            b = np.abs(B.data).max() if B.nnz else 1.0
            delta = 1e-6 * b * b / a
            C_exact = sp.csr_matrix((self.np_, self.np_))
            C_fact = delta * sp.identity(self.np_, format="csr")
        else:
            C_exact = C_fact = sp.csr_matrix(C)
        self.K = sp.bmat([[S, B.T], [B, -C_exact]], format="csr")
        Kf = sp.bmat([[S, B.T], [B, -C_fact]], format="csr")
        self.exact_factor = C is not None
        self.F = factor_symmetric(Kf)
        # the regularized factor's pivot spread says nothing about K itself
        self.pivot_ratio = getattr(self.F, "pivot_ratio", float("nan")) if self.exact_factor else float("nan")
        self.last_pressure = None

    def solve_full(self, rhs):
        x = self.F.solve(rhs)
        if not self.exact_factor:
            nr = np.linalg.norm(rhs)
            prev = np.inf
            for _ in range(10):
                r = rhs - self.K @ x
                rn = np.linalg.norm(r)
                if rn <= 1e-14 * nr or rn > 0.5 * prev:
                    break
                prev = rn
                x += self.F.solve(r)
        return x

    def __call__(self, v):
        rhs = np.concatenate([self.M @ v, np.zeros(self.np_)])
        x = self.solve_full(rhs)
        self.last_pressure = x[self.nu:]
        return x[: self.nu]


def _make_op(factory, sigma):
    """Build an operator, nudging a singular shift at most MAX_SHIFT_RETRIES times."""
    s = float(sigma)
    for attempt in range(MAX_SHIFT_RETRIES + 1):
        try:
            return factory(s), s
        except SingularFactorError:
            if attempt == MAX_SHIFT_RETRIES:
                raise FactorizationError(f"shifted matrix singular at sigma={s!r} after {MAX_SHIFT_RETRIES} retries")
            s = s * (1.0 + 1e-3) + 1e-8
    raise AssertionError("unreachable")


# ------------------------------------------------------------------ Lanczos core

def _morth(w, Q, MQ):
    """Orthogonalize w against the M-orthonormal columns Q (twice, classical GS)."""
    if Q.shape[1] == 0:
        return w
    for _ in range(2):
        w = w - Q @ (MQ.T @ w)
    return w


def _lanczos_pass(op, M, n, start, locked, Mlocked, need, thresh, tol, maxdim):
    """One Lanczos run on the operator deflated against ``locked``.

    Returns Ritz values, Ritz vectors of the converged pairs, and the number
    of steps taken.
    """
    cap = min(maxdim, max(2 * need + 30, 64))
    V = np.zeros((n, cap))
    MV = np.zeros((n, cap))
    alpha = np.zeros(maxdim)
    beta = np.zeros(maxdim)
    v = _morth(start, locked, Mlocked)
    nrm = np.sqrt(v @ (M @ v))
    if nrm == 0:
        return np.zeros(0), np.zeros((n, 0)), 0
    v /= nrm
    m = 0
    check_every = 5
    conv_vals, conv_vecs = np.zeros(0), np.zeros((n, 0))
    theta_scale = 0.0
    while m < maxdim:
        if m == cap:
            cap = min(maxdim, 2 * cap)
            V = np.hstack([V, np.zeros((n, cap - V.shape[1]))])
            MV = np.hstack([MV, np.zeros((n, cap - MV.shape[1]))])
        V[:, m] = v
        MV[:, m] = M @ v
        w = op(v)
        alpha[m] = MV[:, m] @ w
        w = w - alpha[m] * v
        if m > 0:
            w = w - beta[m - 1] * V[:, m - 1]
        w = _morth(w, locked, Mlocked)
        w = _morth(w, V[:, : m + 1], MV[:, : m + 1])
        b = np.sqrt(max(w @ (M @ w), 0.0))
        beta[m] = b
        m += 1
        theta_scale = max(theta_scale, abs(alpha[m - 1]) + b)
        invariant = b <= 1e-13 * theta_scale
        if invariant or m == maxdim or (m >= need and m % check_every == 0):
            th, S = sla.eigh_tridiagonal(alpha[:m], beta[: m - 1]) if m > 1 else (alpha[:1], np.ones((1, 1)))
            order = np.argsort(-np.abs(th))
            th, S = th[order], S[:, order]
            est = np.abs(b * S[-1, :])
            ok = est <= tol * np.maximum(np.abs(th), 1e-300)
            # leading run of converged values, largest |theta| first
            lead = len(ok) if ok.all() else int(np.argmin(ok))
            wanted = max(need, int((np.abs(th) >= thresh).sum()) + 1 if thresh > 0 else need)
            if invariant or lead >= min(wanted, m) or m == maxdim:
                keep = ok if invariant or m == maxdim else np.arange(len(th)) < lead
                conv_vals = th[keep]
                conv_vecs = V[:, :m] @ S[:, keep]
                break
        v = w / b
    return conv_vals, conv_vecs, m


def _lanczos(op, M, n, k, tol, seed, max_passes=None, maxiter=None, filter_zero=False):
    """Locked multi-pass Lanczos; returns Ritz values/vectors (largest |theta| first)."""
    rng = np.random.default_rng(seed)
    locked = np.zeros((n, 0))
    Mlocked = np.zeros((n, 0))
    thetas = np.zeros(0)
    iters = 0
    max_passes = max_passes or (8 + k // 4)
    maxiter = maxiter or max(300, 6 * k + 100)
    ltol = min(tol, 1e-10) * 1e-2
    converged = True
    for p in range(max_passes):
        avail = n - locked.shape[1]
        if avail <= 0:
            break
        top = np.sort(np.abs(thetas))[::-1]
        thresh = top[k - 1] * (1 - 1e-10) if len(top) >= k else 0.0
        need = max(k - len(thetas), 1)
        maxdim = min(avail, maxiter)
        start = op(rng.standard_normal(n))  # purify into the operator's range
        vals, vecs, m = _lanczos_pass(op, M, n, start, locked, Mlocked, need, thresh, ltol, maxdim)
        iters += m
        if filter_zero and len(vals):
            scale = np.abs(vals).max()
            good = np.abs(vals) > 1e-9 * max(scale, np.abs(thetas).max() if len(thetas) else 0.0)
            vals, vecs = vals[good], vecs[:, good]
        if len(vals) == 0:
            if len(thetas) < k and m < avail:
                converged = False
            break
        # re-orthonormalize new vectors against locked and among themselves
        new_vecs = _morth(vecs, locked, Mlocked)
        G = new_vecs.T @ (M @ new_vecs)
        ev, U = np.linalg.eigh(0.5 * (G + G.T))
        good = ev > 1e-20 * ev.max()
        new_vecs = new_vecs @ (U[:, good] / np.sqrt(ev[good]))
        new_vals = np.array([x @ (M @ op(x)) for x in new_vecs.T])
        gain = (len(thetas) < k) or np.any(np.abs(new_vals) >= thresh)
        locked = np.hstack([locked, new_vecs])
        Mlocked = np.hstack([Mlocked, M @ new_vecs])
        thetas = np.concatenate([thetas, new_vals])
        if not gain:
            break
        if iters >= maxiter * 6:
            converged = len(thetas) >= k
            break
    else:
        converged = len(thetas) >= k
    return thetas, locked, iters, converged


def _finish(A, M, sigma, k, thetas, X, iters, converged, method, rayleigh_op=None, extra=None):
    """Rayleigh-Ritz on the locked basis, pick k nearest sigma, compute residuals."""
    n = M.shape[0]
    if X.shape[1] == 0:
        return EigResult(np.zeros(0), np.zeros((n, 0)), np.zeros(0), iters, method, False, ["no_convergence"], sigma)
    if rayleigh_op is None:
        H = X.T @ (A @ X)
        G = X.T @ (M @ X)
        w, Y = sla.eigh(0.5 * (H + H.T), 0.5 * (G + G.T))
    else:
        H = X.T @ (M @ np.column_stack([rayleigh_op(x) for x in X.T]))
        G = X.T @ (M @ X)
        th, Y = sla.eigh(0.5 * (H + H.T), 0.5 * (G + G.T))
        keep = np.abs(th) > 1e-12 * np.abs(th).max()
        th, Y = th[keep], Y[:, keep]
        w = sigma + 1.0 / th
    order = np.argsort(np.abs(w - sigma), kind="stable")[:k]
    w, Y = w[order], Y[:, order]
    asc = np.argsort(w, kind="stable")
    w, Xk = w[asc], X @ Y[:, asc]
    flags = [] if converged and len(w) >= k else ["partial"]
    if extra is not None:
        res = extra(w, Xk)
    else:
        res, mn = _residuals(A, M, w, Xk)
        res = res / mn
    return EigResult(w, Xk, res, iters, method, converged and len(w) >= k, flags, sigma)


def solve_shift_invert_lanczos(A, M, sigma=0.0, k=6, tol=DEFAULT_TOL, seed=None, vectors=True):
    """The ``k`` eigenpairs of ``A x = lam M x`` nearest ``sigma``."""
    A = sp.csr_matrix(A)
    M = sp.csr_matrix(M)
    n = A.shape[0]
    if k <= 0:
        return EigResult(np.zeros(0), np.zeros((n, 0)), np.zeros(0), 0, "lanczos", True, [], sigma)
    flags = []
    if k > n:
        k = n
        flags.append("truncated")
    op, s = _make_op(lambda s: _StandardOp(A, M, s), sigma)
    seed = default_seed() if seed is None else seed
    thetas, X, iters, conv = _lanczos(op, M, n, k, tol, seed)
    res = _finish(A, M, s, k, thetas, X, iters, conv, "lanczos")
    res.flags += flags
    res.info["pivot_ratio"] = op.F.pivot_ratio
    if not vectors:
        res.eigenvectors = None
    return res


def solve_saddle_point_eig(stiffness, constraint, mass_velocity, sigma=0.0, k=6, tol=DEFAULT_TOL,
                           seed=None, penalty_block=None, vectors=True):
    """Eigenvalues of ``A u + B^T p = lam M u, B u = C p`` nearest sigma.

    ``penalty_block`` C defaults to 0 (hard divergence constraint). With
    ``constraint=None`` the problem reduces to the plain pencil.
    """
    if constraint is None:
        return solve_shift_invert_lanczos(stiffness, mass_velocity, sigma, k, tol, seed, vectors)
    A = sp.csr_matrix(stiffness)
    M = sp.csr_matrix(mass_velocity)
    B = sp.csr_matrix(constraint)
    n = A.shape[0]
    if k <= 0:
        return EigResult(np.zeros(0), np.zeros((n, 0)), np.zeros(0), 0, "lanczos", True, [], sigma)
    op, s = _make_op(lambda s: _SaddleOp(A, B, M, s, penalty_block), sigma)
    seed = default_seed() if seed is None else seed
    thetas, X, iters, conv = _lanczos(op, M, n, k, tol, seed, filter_zero=True)

    def saddle_residuals(w, Xk):
        out = np.zeros(len(w))
        for i in range(len(w)):
            x = Xk[:, i]
            y = op(x)
            th = 1.0 / (w[i] - s)
            r = A @ x - w[i] * (M @ x) + B.T @ (op.last_pressure / th)
            out[i] = np.linalg.norm(r) / np.sqrt(x @ (M @ x))
        return out

    res = _finish(A, M, s, k, thetas, X, iters, conv, "lanczos", rayleigh_op=op, extra=saddle_residuals)
    res.info["pivot_ratio"] = op.pivot_ratio
    if not vectors:
        res.eigenvectors = None
    return res
