"""Sparse LDL^T factorization with approximate-minimum-degree ordering.

``SparseLDL`` factors a symmetric matrix as ``P A P^T = L D L^T`` with unit
lower-triangular ``L`` and diagonal ``D`` (static 1x1 pivots). That covers
the SPD shifted pencils and the quasi-definite saddle-point matrices this
package produces. A pivot that is zero or negligible relative to the matrix
scale raises :class:`SingularFactorError`; callers decide whether to shift
or fall back to a pivoting dense factorization.
"""
import numpy as np
import scipy.sparse as sp

from . import kernels


class SingularFactorError(ArithmeticError):
    """Raised when a static pivot vanishes during LDL^T factorization."""

    def __init__(self, index, value):
        super().__init__(f"zero/negligible pivot {value:.3e} at elimination step {index}")
        self.index = index
        self.value = value


def _pattern_without_diagonal(A):
    C = A.tocsc().copy()
    C.setdiag(0)
    C.eliminate_zeros()
    C = (C + C.T).tocsc()
    C.sort_indices()
    return C.indptr.astype(np.int64), C.indices.astype(np.int64)


def amd(A, backend=None):
    """Fill-reducing ordering of the symmetric pattern of ``A``."""
    mod = kernels.get_backend(backend) if backend else kernels
    n = A.shape[0]
    Cp, Ci = _pattern_without_diagonal(A)
    return np.asarray(mod.amd_order(n, Cp, Ci), dtype=np.int64)


class SparseLDL:
    """LDL^T factorization of a sparse symmetric matrix.

    Parameters
    ----------
    A : sparse matrix
        Symmetric matrix; both triangles must be stored.
    ordering : {"amd", "natural"} or ndarray
        Fill-reducing permutation to apply.
    pivot_tol : float
        Relative threshold below which a pivot is treated as zero.
    backend : {"compiled", "python"}, optional
        Force a kernel implementation (default: the one selected at import).
    """

    def __init__(self, A, ordering="amd", pivot_tol=1e-13, backend=None):
        self._mod = kernels.get_backend(backend) if backend else kernels
        A = sp.csc_matrix(A, dtype=np.float64)
        A.sum_duplicates()
        A.sort_indices()
        n = A.shape[0]
        if A.shape[1] != n:
            raise ValueError("matrix must be square")
        self.n = n
        if isinstance(ordering, str):
            if ordering == "amd":
                perm = amd(A, backend=backend)
            elif ordering == "natural":
                perm = np.arange(n, dtype=np.int64)
            else:
                raise ValueError(f"unknown ordering {ordering!r}")
        else:
            perm = np.asarray(ordering, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(n)):
            raise ValueError("ordering is not a permutation")
        self.perm = perm
        self.pinv = np.empty(n, dtype=np.int64)
        self.pinv[perm] = np.arange(n, dtype=np.int64)

        Ap = A.indptr.astype(np.int64)
        Ai = A.indices.astype(np.int64)
        Ax = np.ascontiguousarray(A.data, dtype=np.float64)
        self.Lp, self.parent = self._mod.ldl_symbolic(n, Ap, Ai, perm, self.pinv)
        self.Lp = np.asarray(self.Lp, dtype=np.int64)
        nnz = int(self.Lp[-1])
        self.Li = np.zeros(max(nnz, 1), dtype=np.int64)
        self.Lx = np.zeros(max(nnz, 1), dtype=np.float64)
        self.D = np.zeros(n, dtype=np.float64)
        status = self._mod.ldl_numeric(
            n, Ap, Ai, Ax, self.Lp, np.asarray(self.parent, dtype=np.int64),
            perm, self.pinv, self.Li, self.Lx, self.D)
        if status != n:
            raise SingularFactorError(int(status), 0.0)
        scale = np.abs(A.data).max() if A.nnz else 1.0
        small = ~np.isfinite(self.D) | (np.abs(self.D) <= pivot_tol * scale)
        if small.any():
            k = int(np.argmax(small))
            raise SingularFactorError(k, float(self.D[k]))
        self.pivot_ratio = float(np.abs(self.D).max() / np.abs(self.D).min()) if n else 1.0

    @property
    def nnz(self):
        """Number of stored off-diagonal entries of ``L``."""
        return int(self.Lp[-1])

    def inertia(self):
        """(positive, negative, zero) pivot counts; equals the matrix inertia."""
        return (int((self.D > 0).sum()), int((self.D < 0).sum()), int((self.D == 0).sum()))

    def solve(self, b):
        """Solve ``A x = b`` for a vector or a (n, m) block of right-hand sides."""
        b = np.asarray(b, dtype=np.float64)
        if b.ndim == 2:
            return np.column_stack([self.solve(b[:, j]) for j in range(b.shape[1])])
        x = np.ascontiguousarray(b[self.perm])
        self._mod.ldl_solve_inplace(self.n, self.Lp, self.Li, self.Lx, self.D, x)
        out = np.empty_like(x)
        out[self.perm] = x
        return out

    def L(self):
        """The unit lower factor as a CSC matrix (diagonal included)."""
        Lstrict = sp.csc_matrix((self.Lx[: self.nnz], self.Li[: self.nnz], self.Lp),
                                shape=(self.n, self.n))
        return (Lstrict + sp.identity(self.n, format="csc")).tocsc()
