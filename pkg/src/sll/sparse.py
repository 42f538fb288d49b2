"""Symmetric sparse matrix helpers and the ``%%SymSparse`` text dump.

Matrices are held as full (both triangles) scipy CSR arrays so they can be
multiplied directly; the dump stores the lower triangle only.
"""
import numpy as np
import scipy.sparse as sp

HEADER = "%%SymSparse"


def symmetrize_exact(A):
    """Return CSR with entries ``(A + A^T) / 2``; exact for already symmetric input."""
    A = sp.csr_matrix(A)
    return ((A + A.T) * 0.5).tocsr()


def is_symmetric(A, tol=0.0):
    A = sp.csr_matrix(A)
    D = (A - A.T).tocoo()
    if D.nnz == 0:
        return True
    return bool(np.abs(D.data).max() <= tol * max(np.abs(A.data).max(), 1e-300))


def coo_to_csr(rows, cols, vals, shape):
    """Sum duplicate entries in the order given (deterministic)."""
    A = sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def write_symsparse(A, path):
    """Write the lower triangle as ``row col value`` lines (0-based)."""
    L = sp.tril(sp.csr_matrix(A)).tocoo()
    order = np.lexsort((L.col, L.row))
    with open(path, "w") as fh:
        fh.write(f"{HEADER} {A.shape[0]} {L.nnz}\n")
        for i, j, v in zip(L.row[order], L.col[order], L.data[order]):
            fh.write(f"{i} {j} {float(v)!r}\n")


def read_symsparse(path):
    """Read a ``%%SymSparse`` dump back into a full symmetric CSR matrix."""
    with open(path) as fh:
        head = fh.readline().split()
        if not head or head[0] != HEADER:
            raise ValueError(f"{path}: missing {HEADER} header")
        n, nnz = int(head[1]), int(head[2])
        data = np.loadtxt(fh, ndmin=2) if nnz else np.zeros((0, 3))
    if len(data) != nnz:
        raise ValueError(f"{path}: expected {nnz} entries, found {len(data)}")
    r, c, v = data[:, 0].astype(np.int64), data[:, 1].astype(np.int64), data[:, 2]
    L = sp.coo_matrix((v, (r, c)), shape=(n, n)).tocsr()
    off = sp.tril(L, k=-1)
    return (L + off.T).tocsr()
