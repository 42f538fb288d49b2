import math

import numpy as np
import pytest

from sll import lab
from sll.lab import ProblemSpec, compute_spectrum, dense_spectrum, extrapolate_mesh
from sll.mesh import DomainSpec

SQ = DomainSpec.unit_square()
DK = DomainSpec.unit_disk()

# frozen level values computed by this lab (seed 42), checked against the dense path
FROZEN = [
    ("scalar_dirichlet", SQ, 0.0, 1, [19.743405275915404, 49.40117281687653, 49.40117281687662, 79.31319664718431]),
    ("scalar_neumann", DK, 0.0, 0, [0.0, 3.390063865408318, 3.390063865408331, 9.332255192351038]),
    ("lame_dirichlet", SQ, 1.0, 0, [37.613893965291055, 37.61389396529113, 51.86056052231996, 80.96246869641557]),
    ("lame_traction", DK, 0.0, 0, [0.0, 0.0, 0.0, 5.458369231076686]),
    ("stokes_dirichlet", SQ, 0.0, 0, [52.9048928779378, 98.88641831085722, 98.88641831085793, 143.7445631878945]),
    ("buckling_dirichlet", DK, 0.0, 1, [14.678753421594706, 26.088816605478506, 26.088816605478854, 40.00825731289765]),
    ("clamped_plate", SQ, 0.0, 1, [32.17219086089652, 61.17410822603933, 61.174108226039365, 89.8653999299099]),
]


@pytest.mark.parametrize("op,dom,lam,level,values", FROZEN, ids=[f[0] for f in FROZEN])
def test_frozen_spectra(op, dom, lam, level, values):
    r = compute_spectrum(ProblemSpec(op, dom, 1.0, lam, level, len(values)))
    assert np.allclose(r.eigenvalues, values, rtol=1e-9, atol=1e-9)
    d = dense_spectrum(ProblemSpec(op, dom, 1.0, lam, level, len(values)))
    assert np.allclose(d.eigenvalues, values, rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("op,expected", [("lame_traction", 3), ("stokes_cauchy", 3), ("scalar_neumann", 1),
                                         ("lame_dirichlet", 0), ("stokes_dirichlet", 0), ("scalar_dirichlet", 0),
                                         ("buckling_dirichlet", 0), ("clamped_plate", 0)])
def test_kernel_counts(op, expected):
    r = compute_spectrum(ProblemSpec(op, DK, 1.0, 0.5, 0, 6))
    assert r.zero_modes == expected
    assert np.all(r.eigenvalues[:expected] == 0.0)


def test_multiplicity_groups_on_disk():
    r = compute_spectrum(ProblemSpec("scalar_dirichlet", DK, 1.0, 0.0, 1, 6))
    assert [c for _, c in r.multiplicity_groups] == [1, 2, 2, 1]


def test_aliases_and_validation():
    assert ProblemSpec("DL", SQ).operator == "lame_dirichlet"
    assert ProblemSpec("xi", SQ).operator == "scalar_dirichlet"
    with pytest.raises(ValueError):
        ProblemSpec("elastic", SQ)
    with pytest.raises(ValueError):
        ProblemSpec("DL", SQ, 1.0, -2.5)
    with pytest.raises(ValueError):
        ProblemSpec("DL", SQ, -1.0)
    with pytest.raises(ValueError):
        ProblemSpec("DL", SQ, projected_div="maybe")
    assert ProblemSpec("DL", SQ, level=2).h == 0.0625


def test_projected_div_auto_switch():
    assert not ProblemSpec("DL", SQ, 1.0, 100.0).uses_projected_div()
    assert ProblemSpec("DL", SQ, 1.0, 101.0).uses_projected_div()
    assert not ProblemSpec("Xi", SQ, 1.0, 1e4).uses_projected_div()


def test_extrapolation_recovers_power_law():
    exact = np.array([1.0, 2.0])
    res = [exact + np.array([3.0, -1.0]) * h ** 2 for h in (0.4, 0.2, 0.1)]
    out = extrapolate_mesh(res)
    assert np.allclose(out["values"], exact, atol=1e-12)
    assert np.allclose(out["order"], 2.0)
    assert out["flags"] == ["ok", "ok"]


def test_extrapolation_flags():
    res = [np.array([1.0, 5.0]), np.array([1.0, 4.0]), np.array([1.0, 4.5])]
    out = extrapolate_mesh(res)
    assert out["flags"] == ["degenerate", "non_monotone"]
    assert np.array_equal(out["values"], [1.0, 4.5])
    with pytest.raises(ValueError):
        extrapolate_mesh(res[:2])


def test_sweep_is_monotone_and_validates():
    table = lab.lambda_sweep(SQ, 1.0, [-1.5, -0.5, 0.0, 2.0, 50.0], 6, level=0)
    rows = lab.check_monotone(table, 6)
    assert len(rows) == 2 * 4 * 6 and all(r[-1] for r in rows)
    with pytest.raises(ValueError):
        lab.lambda_sweep(SQ, 1.0, [1.0, 0.0], 3, level=0)
    with pytest.raises(ValueError):
        lab.lambda_sweep(SQ, 1.0, [-2.5, 0.0], 3, level=0)


def test_worker_count_does_not_change_results():
    specs = [ProblemSpec("DL", SQ, 1.0, lam, 0, 5) for lam in (0.0, 1.0, 5.0)]
    a = lab.run_spectra(specs, workers=1)
    b = lab.run_spectra(specs, workers=2)
    for x, y in zip(a, b):
        assert np.array_equal(x.eigenvalues, y.eigenvalues)


def test_penalty_converges_to_taylor_hood():
    st = compute_spectrum(ProblemSpec("stokes_dirichlet", SQ, 1.0, 0.0, 0, 3)).eigenvalues
    pen = lab.stokes_via_penalty(SQ, 1.0, 1e3, 3, level=0)
    assert np.all(pen["raw"][0] <= pen["raw"][1])  # tau increases with lambda
    assert np.allclose(pen["estimate"], st, rtol=1e-5)
    with pytest.raises(ValueError):
        lab.stokes_via_penalty(SQ, 1.0, 1.0, 3)


def test_identity_needs_simply_connected_domain():
    with pytest.raises(ValueError):
        lab.verify_buckling_stokes_identity(DomainSpec.annulus(0.5), 1.0, 2, levels=(0, 1, 2))


def test_dense_limit():
    with pytest.raises(ValueError):
        dense_spectrum(ProblemSpec("DL", SQ, 1.0, 0.0, 3, 2))


def test_truncated_flag():
    r = dense_spectrum(ProblemSpec("Xi", SQ, 1.0, 0.0, 0, 500))
    assert "truncated" in r.flags
