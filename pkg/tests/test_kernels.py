import os
import subprocess
import sys

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from sll import kernels
from sll.ldl import SingularFactorError, SparseLDL, amd


def laplacian_2d(m):
    T = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(m, m))
    I = sp.identity(m)
    return (sp.kron(T, I) + sp.kron(I, T)).tocsr()


def random_sym(rng, n, density, shift):
    R = sp.random(n, n, density=density, random_state=np.random.RandomState(rng.integers(1 << 30)))
    return (R + R.T + shift * sp.identity(n)).tocsr()


def test_amd_returns_permutation(backend):
    A = laplacian_2d(12)
    p = amd(A, backend=backend)
    assert sorted(p.tolist()) == list(range(A.shape[0]))


def test_amd_reduces_fill_against_natural(backend):
    A = laplacian_2d(20)
    natural = SparseLDL(A, "natural", backend=backend)
    ordered = SparseLDL(A, "amd", backend=backend)
    assert ordered.nnz < natural.nnz


def test_ldl_solves_spd(backend, rng):
    A = laplacian_2d(15)
    b = rng.standard_normal(A.shape[0])
    F = SparseLDL(A, backend=backend)
    x = F.solve(b)
    assert np.linalg.norm(A @ x - b) <= 1e-12 * np.linalg.norm(b)
    assert F.inertia() == (A.shape[0], 0, 0)


def test_ldl_reconstructs_matrix(backend):
    A = laplacian_2d(6)
    F = SparseLDL(A, backend=backend)
    L = F.L().toarray()
    P = A.toarray()[np.ix_(F.perm, F.perm)]
    assert np.allclose(L @ np.diag(F.D) @ L.T, P, atol=1e-13)


def test_inertia_of_indefinite_matrix(backend):
    A = laplacian_2d(8) - 3.1 * sp.identity(64)
    w = np.linalg.eigvalsh(A.toarray())
    F = SparseLDL(A, backend=backend)
    assert F.inertia()[:2] == (int((w > 0).sum()), int((w < 0).sum()))


def test_singular_pivot_raises(backend):
    A = sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(SingularFactorError):
        SparseLDL(A, "natural", backend=backend)


def test_backends_agree_bitwise(rng):
    if "compiled" not in kernels.BACKEND and kernels.BACKEND != "compiled":
        pytest.skip("compiled backend unavailable")
    A = random_sym(rng, 80, 0.05, 10.0)
    Fc = SparseLDL(A, backend="compiled")
    Fp = SparseLDL(A, backend="python")
    assert np.array_equal(Fc.perm, Fp.perm)
    assert np.array_equal(Fc.D, Fp.D)


def test_block_solve(backend, rng):
    A = laplacian_2d(7)
    B = rng.standard_normal((49, 3))
    X = SparseLDL(A, backend=backend).solve(B)
    assert np.allclose(A @ X, B, atol=1e-12)


def test_env_var_forces_fallback():
    env = dict(os.environ, SLL_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from sll import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 40), seed=st.integers(0, 10_000), shift=st.floats(-2.0, 6.0))
def test_ldl_random_symmetric(n, seed, shift):
    rng = np.random.default_rng(seed)
    A = random_sym(rng, n, 0.2, shift)
    w = np.linalg.eigvalsh(A.toarray())
    if np.min(np.abs(w)) < 1e-6:
        return
    try:
        F = SparseLDL(A)
    except SingularFactorError:
        return  # a zero pivot without pivoting is legitimate for indefinite input
    b = rng.standard_normal(n)
    x = F.solve(b)
    cond = np.abs(w).max() / np.abs(w).min()
    assert np.linalg.norm(A @ x - b) <= 1e-10 * cond * np.linalg.norm(b) * max(F.pivot_ratio, 1.0) ** 0.5
    assert F.inertia()[:2] == (int((w > 0).sum()), int((w < 0).sum()))
