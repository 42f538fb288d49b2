"""Acceptance suite: one test per numbered criterion.

Each test prints a single ``criterion N ... PASS|FAIL`` line (visible with
``pytest -v`` or ``-s``) and fails with the offending report rows.
"""
import time

import pytest

from sll import suite

pytestmark = pytest.mark.slow

TITLES = {
    1: "element matrices and dense vs Lanczos",
    2: "analytic square and disk Laplace spectra",
    3: "monotonicity in lambda on fixed meshes",
    4: "penalty limit to Stokes and lower limit to vector Laplace",
    5: "Dirichlet sandwich theta <= tau <= varsigma",
    6: "Morley buckling equals Taylor-Hood Stokes",
    7: "strict chain Theta < Xi < Gamma < Lambda",
    8: "heat trace of the analytic square spectrum",
    9: "heat trace of the FEM Lame spectrum",
    10: "heat-trace coefficient identities",
    11: "kernel dimensions",
}
BUDGET = {1: 30, 2: 120, 4: 300, 6: 180, 8: 30, 9: 600}


def _run(i, capsys):
    t0 = time.perf_counter()
    rep = suite.run_criterion(i)
    wall = time.perf_counter() - t0
    within = wall <= BUDGET.get(i, float("inf"))
    ok = rep.verdict and within
    with capsys.disabled():
        print(f"\ncriterion {i:2d} {TITLES[i]}: {'PASS' if ok else 'FAIL'} "
              f"({len(rep.rows)} rows, {len(rep.failures())} failed, {wall:.1f}s)")
    lines = [f"{r.experiment} [{r.inputs}] computed={r.computed!r} reference={r.reference!r} "
             f"error={r.error:.3g} tol={r.tolerance:.3g}" for r in rep.failures()]
    assert rep.rows, "criterion produced no rows"
    assert not lines, "\n".join(lines)
    assert within, f"runtime {wall:.1f}s exceeds {BUDGET[i]}s"


@pytest.mark.parametrize("i", sorted(TITLES))
def test_criterion(i, capsys):
    _run(i, capsys)


def test_fast_suite_under_a_minute(capsys):
    t0 = time.perf_counter()
    rep = suite.run_suite(fast=True)
    wall = time.perf_counter() - t0
    with capsys.disabled():
        print(f"\nfast suite: {'PASS' if rep.verdict and wall < 60 else 'FAIL'} ({len(rep.rows)} rows, {wall:.1f}s)")
    assert rep.verdict
    assert wall < 60
