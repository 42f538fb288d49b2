"""Time the compiled and pure-Python sparse kernels on P2 Laplace matrices.

Usage::

    python benchmarks/bench_kernels.py [--levels 0 1 2] [--repeat 3]
"""
import argparse
import time

import numpy as np

from sll import kernels
from sll.assembly import assemble_scalar_laplace
from sll.ldl import SparseLDL, amd
from sll.lab import mesh_at
from sll.mesh import DomainSpec


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = ["python"]
    try:
        kernels.get_backend("compiled")
        backends.insert(0, "compiled")
    except ImportError:
        print("compiled backend not built; timing the fallback only")
    print(f"{'level':>5} {'n':>7} {'backend':>9} {'amd [s]':>9} {'ldl [s]':>9} {'nnz(L)':>9} {'resid':>9}")
    for level in args.levels:
        mesh = mesh_at(DomainSpec.unit_square(), level, 0.25)
        A, M, _ = assemble_scalar_laplace(mesh, 1.0, "dirichlet").reduced()
        K = (A + M).tocsr()
        b = np.ones(K.shape[0])
        base = {}
        for name in backends:
            t_amd, perm = best_of(lambda: amd(K, backend=name), args.repeat)
            t_ldl, F = best_of(lambda: SparseLDL(K, perm, backend=name), args.repeat)
            x = F.solve(b)
            res = np.linalg.norm(K @ x - b) / np.linalg.norm(b)
            base[name] = t_amd + t_ldl
            print(f"{level:>5} {K.shape[0]:>7} {name:>9} {t_amd:>9.4f} {t_ldl:>9.4f} {F.nnz:>9} {res:>9.1e}")
        if len(base) == 2:
            print(f"{'':>5} {'':>7} {'speedup':>9} {base['python'] / base['compiled']:>9.1f}x")


if __name__ == "__main__":
    main()
