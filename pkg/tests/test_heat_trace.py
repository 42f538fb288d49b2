import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sll import heat_trace as ht, oracles
from sll.mesh import DomainSpec

GEOM = {"volume": 1.3, "boundary_volume": 4.1, "scalar_curvature_integral": 0.7, "mean_curvature_integral": 2.3}


@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("bc", ["dirichlet", "traction"])
def test_lame_at_minus_mu_is_vector_laplace(n, bc):
    a = ht.theoretical_coefficients("lame", bc, -1.7, 1.7, n, GEOM).coefficients
    b = ht.theoretical_coefficients("laplace_vec", bc, 0.0, 1.7, n, GEOM).coefficients
    for p in b:
        assert abs(a[p] - b[p]) <= 1e-12 * max(1.0, abs(b[p]))


@pytest.mark.parametrize("n", [2, 3])
def test_lame_large_lambda_tends_to_stokes(n):
    a = ht.theoretical_coefficients("lame", "dirichlet", 1e8, 1.0, n, GEOM).coefficients
    b = ht.theoretical_coefficients("stokes", "dirichlet", 0.0, 1.0, n, GEOM).coefficients
    for p in sorted(b)[:2]:
        assert abs(a[p] - b[p]) / abs(b[p]) < 1e-3


def test_two_dimensional_lame_leading_value():
    m = ht.theoretical_coefficients("lame", "dirichlet", 1.0, 1.0, 2, ht.geometry_of(DomainSpec.unit_square()))
    assert abs(m.coefficients[-1.0] - (1 / (4 * math.pi) + 1 / (12 * math.pi))) < 1e-15
    assert m.coefficients[-0.5] < 0


def test_disk_buckling_constants():
    m = ht.theoretical_coefficients("buckling_2d", "dirichlet", 0.0, 1.0, 2, ht.geometry_of(DomainSpec.unit_disk()))
    assert abs(m.coefficients[-0.5] + math.sqrt(math.pi) / 4) < 1e-12
    assert abs(m.coefficients[0.0] + 5.0 / 3.0) < 1e-12
    assert abs(m.coefficients[-1.0] - 0.25) < 1e-15


def test_boundary_sign_flips():
    d = ht.theoretical_coefficients("stokes", "dirichlet", 0, 1.0, 2, GEOM).coefficients[-0.5]
    c = ht.theoretical_coefficients("stokes", "cauchy", 0, 1.0, 2, GEOM).coefficients[-0.5]
    assert d == -c < 0


def test_square_corner_constant():
    m = ht.theoretical_coefficients("laplace_scalar", "dirichlet", 0, 1.0, 2, ht.geometry_of(DomainSpec.unit_square()))
    assert abs(m.coefficients[0.0] - 0.25) < 1e-15


@pytest.mark.parametrize("args", [
    ("elastic", "dirichlet", 0, 1, 2), ("lame", "dirichlet", 0, -1, 2), ("lame", "dirichlet", -3, 1, 2),
    ("buckling_2d", "dirichlet", 0, 1, 3), ("lame", "robin", 0, 1, 2), ("lame", "dirichlet", 0, 1, 1),
])
def test_invalid(args):
    with pytest.raises(ValueError):
        ht.theoretical_coefficients(*args, GEOM)


def test_analytic_square_fit():
    spec = oracles.square_laplace_spectrum("dirichlet", 1.0, 10000)
    model = ht.theoretical_coefficients("laplace_scalar", "dirichlet", 0, 1.0, 2, ht.geometry_of(DomainSpec.unit_square()))
    win = ht.auto_window(spec, model)
    curve = ht.partition_function(spec, win["t_grid"], leading=model.coefficients[-1.0])
    assert np.all(curve.tail_bound < 1e-3 * curve.Z + 1e-300)
    fit = ht.fit_asymptotics(curve)
    err = ht.compare(fit, model)
    assert err[-1.0] < 1e-2 and err[-0.5] < 3e-2
    # the exact three-term model reproduces Z well inside the window
    t = 0.01
    assert abs(model.evaluate(t) - ht.partition_function(spec, [t]).Z[0]) < 1e-6


def test_ill_conditioned_fit():
    curve = ht.partition_function([1.0, 2.0, 3.0], [1.0, 1.0 + 1e-12, 1.0 + 2e-12])
    with pytest.raises(ht.IllConditionedFit):
        ht.fit_asymptotics(curve)


def test_partition_validation():
    with pytest.raises(ValueError):
        ht.partition_function([], [1.0])
    with pytest.raises(ValueError):
        ht.partition_function([1.0], [0.0])


@settings(max_examples=30, deadline=None)
@given(vals=st.lists(st.floats(0.0, 1e3), min_size=1, max_size=50),
       t=st.lists(st.floats(1e-3, 10.0), min_size=3, max_size=20, unique=True))
def test_partition_decreasing_and_log_convex(vals, t):
    lam = np.array(vals) + 0.5
    curve = ht.partition_function(lam, np.sort(t))
    assert np.all(np.diff(curve.Z) <= 0)
    if np.ptp(lam) > 0 and np.min(np.diff(np.sort(t))) > 1e-6 and curve.Z[-1] > 1e-200:
        assert curve.log_convexity_defect() > -1e-6 * max(1.0, np.ptp(lam) ** 2)


def test_writers(tmp_path):
    spec = oracles.square_laplace_spectrum("dirichlet", 1.0, 2000)
    model = ht.theoretical_coefficients("laplace_scalar", "dirichlet", 0, 1.0, 2, ht.geometry_of(DomainSpec.unit_square()))
    win = ht.auto_window(spec, model)
    curve = ht.partition_function(spec, win["t_grid"])
    fit = ht.fit_asymptotics(curve)
    ht.write_zt(tmp_path / "Zt.dat", curve)
    data = np.loadtxt(tmp_path / "Zt.dat")
    assert np.array_equal(data[:, 0], curve.t) and np.array_equal(data[:, 1], curve.Z)
    ht.write_fit_csv(tmp_path / "fit.csv", fit, model)
    lines = (tmp_path / "fit.csv").read_text().splitlines()
    assert lines[0] == "power,fitted,theoretical,rel_error" and len(lines) == 4
