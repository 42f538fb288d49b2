import math

import numpy as np
import pytest

from sll import assembly
from sll.mesh import generate_mesh, refine_uniform
from sll.sparse import is_symmetric


@pytest.fixture(scope="module")
def sq_mesh():
    from sll.mesh import DomainSpec
    return generate_mesh(DomainSpec.unit_square(), 0.25)


@pytest.fixture(scope="module")
def disk_mesh():
    from sll.mesh import DomainSpec
    return generate_mesh(DomainSpec.unit_disk(), 0.3)


def energy(sysm, u):
    return float(u @ (sysm.stiffness @ u))


def test_scalar_matrices_symmetric_and_mass_is_area(sq_mesh):
    for el in ("P1", "P2"):
        s = assembly.assemble_scalar_laplace(sq_mesh, 2.0, "neumann", el)
        assert is_symmetric(s.stiffness, 1e-14) and is_symmetric(s.mass, 1e-14)
        one = np.ones(s.ndof)
        assert abs(one @ (s.mass @ one) - 1.0) < 1e-13
        assert np.abs(s.stiffness @ one).max() < 1e-12


def test_scalar_energy_of_quadratic_is_exact(sq_mesh):
    # P2 interpolates x^2 exactly: mu * int |grad x^2|^2 = mu * 4/3
    s = assembly.assemble_scalar_laplace(sq_mesh, 1.5, "neumann", "P2")
    u = s.interpolate(lambda x, y: x * x)
    assert abs(energy(s, u) - 1.5 * 4.0 / 3.0) < 1e-12


def test_p2_mass_on_disk_is_curved_area(disk_mesh):
    s = assembly.assemble_scalar_laplace(disk_mesh, 1.0, "neumann")
    one = np.ones(s.ndof)
    assert abs(one @ (s.mass @ one) - math.pi) < 2e-4


def test_lame_minus_mu_equals_vector_laplace_dirichlet(sq_mesh):
    a = assembly.assemble_lame(sq_mesh, -1.0, 1.0, "dirichlet")
    b = assembly.assemble_laplace_vector(sq_mesh, 1.0, "dirichlet")
    Aa, Ma, _ = a.reduced()
    Ab, Mb, _ = b.reduced()
    assert abs(Aa - Ab).max() < 1e-12
    assert abs(Ma - Mb).max() == 0.0


@pytest.mark.parametrize("lam", [-0.5, 0.0, 1.0, 50.0])
def test_rigid_motions_have_zero_traction_energy(disk_mesh, lam):
    s = assembly.assemble_lame(disk_mesh, lam, 1.0, "traction")
    for f in (lambda x, y: (1.0 + 0 * x, 0 * y), lambda x, y: (0 * x, 1.0 + 0 * y), lambda x, y: (-y, x)):
        u = s.interpolate(f)
        assert np.abs(s.stiffness @ u).max() < 1e-11


@pytest.mark.parametrize("lam", [-1.0, 0.0, 3.0])
def test_trace_free_strain_energy(sq_mesh, lam):
    # u = (x, -y): Def u = diag(1, -1), div u = 0, energy 2 mu * 2 * area
    s = assembly.assemble_lame(sq_mesh, lam, 0.7, "traction")
    u = s.interpolate(lambda x, y: (x, -y))
    assert abs(energy(s, u) - 4 * 0.7) < 1e-12


def test_dilation_energy(sq_mesh):
    s = assembly.assemble_lame(sq_mesh, 2.0, 1.0, "traction")
    u = s.interpolate(lambda x, y: (x, y))
    assert abs(energy(s, u) - (4 * 1.0 + 4 * 2.0)) < 1e-12


def test_taylor_hood_divergence_block(sq_mesh):
    s = assembly.assemble_stokes_taylor_hood(sq_mesh, 1.0)
    rot = s.interpolate(lambda x, y: (-y, x))
    assert np.abs(s.constraint @ rot).max() < 1e-14
    _, _, B = s.reduced()
    assert np.abs(B.T @ np.ones(B.shape[0])).max() < 1e-13
    # Mp integrates pressures: 1^T Mp 1 = area
    one = np.ones(s.pressure_mass.shape[0])
    assert abs(one @ (s.pressure_mass @ one) - 1.0) < 1e-13


def test_projected_div_system(sq_mesh):
    s = assembly.assemble_lame(sq_mesh, 500.0, 1.0, "dirichlet", projected_div=True)
    assert s.penalty == 500.0
    assert s.constraint.shape == (sq_mesh.nv, s.ndof)
    np.linalg.cholesky(s.pressure_mass.toarray())
    with pytest.raises(ValueError):
        assembly.assemble_lame(sq_mesh, -0.5, 1.0, projected_div=True)


def test_morley_energies(sq_mesh):
    out = assembly.assemble_biharmonic_morley(sq_mesh)
    dm = out["dof_map"]
    u = assembly.morley_interpolate(sq_mesh, dm, lambda x, y: x * x, lambda x, y: (2 * x, 0 * y))
    assert abs(u @ (out["bending"] @ u) - 4.0) < 1e-12
    assert abs(u @ (out["geometric"] @ u) - 4.0 / 3.0) < 1e-12
    aff = assembly.morley_interpolate(sq_mesh, dm, lambda x, y: 1 + 2 * x - y,
                                      lambda x, y: (2.0 + 0 * x, -1.0 + 0 * y))
    assert abs(aff @ (out["bending"] @ aff)) < 1e-12
    n = out["bending"].shape[0]
    assert n == sq_mesh.nv + len(sq_mesh.edges()[0])
    for key in ("bending", "geometric", "mass"):
        assert is_symmetric(out[key], 1e-13)


@pytest.mark.parametrize("lam", [-1.5, -1.0, -0.5, 0.0, 10.0])
def test_garding_dirichlet(sq_mesh, lam):
    s = assembly.assemble_lame(sq_mesh, lam, 1.0, "dirichlet")
    assert assembly.garding_check(s)


def test_worker_count_does_not_change_matrices():
    from sll.mesh import DomainSpec
    m = refine_uniform(generate_mesh(DomainSpec.unit_disk(), 0.3))
    a = assembly.assemble_lame(m, 1.0, 1.0, workers=1)
    b = assembly.assemble_lame(m, 1.0, 1.0, workers=2)
    assert (a.stiffness != b.stiffness).nnz == 0
    assert (a.mass != b.mass).nnz == 0


@pytest.mark.parametrize("call", [
    lambda m: assembly.assemble_scalar_laplace(m, -1.0),
    lambda m: assembly.assemble_scalar_laplace(m, 1.0, "robin"),
    lambda m: assembly.assemble_scalar_laplace(m, 1.0, element="P3"),
    lambda m: assembly.assemble_lame(m, -2.5, 1.0),
    lambda m: assembly.assemble_lame(m, 1.0, 1.0, "slip"),
    lambda m: assembly.assemble_stokes_taylor_hood(m, 1.0, "traction"),
])
def test_invalid_arguments(sq_mesh, call):
    with pytest.raises(ValueError):
        call(sq_mesh)
