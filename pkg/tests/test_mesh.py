import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sll.mesh import DomainSpec, generate_mesh, mesh_quantities, read_mesh, refine_uniform, write_mesh

L_SHAPE = [(0, 0), (1, 0), (1, 0.5), (0.5, 0.5), (0.5, 1), (0, 1)]


def test_square_half_counts(square):
    m = generate_mesh(square, 0.5)
    assert (m.nv, m.nt, len(m.boundary_edges)) == (9, 8, 8)
    r = refine_uniform(m)
    assert (r.nv, r.nt, len(r.boundary_edges)) == (25, 32, 16)
    r.validate()


def test_boundary_edges_keep_domain_on_left(square, disk):
    for dom in (square, disk, DomainSpec.annulus(0.4), DomainSpec.polygon(L_SHAPE)):
        m = generate_mesh(dom, 0.3)
        a = m.vertices[m.boundary_edges[:, 0]]
        b = m.vertices[m.boundary_edges[:, 1]]
        # the triangle on each boundary edge must lie to the left
        centroid = {}
        for t in m.triangles:
            for i in range(3):
                centroid[(t[i], t[(i + 1) % 3])] = m.vertices[t].mean(axis=0)
        for (i, j), p, q in zip(m.boundary_edges.tolist(), a, b):
            c = centroid[(i, j)]
            assert (q - p)[0] * (c - p)[1] - (q - p)[1] * (c - p)[0] > 0


def test_disk_boundary_on_circle(disk):
    m = refine_uniform(generate_mesh(disk, 0.25))
    r = np.linalg.norm(m.vertices[m.boundary_vertices()], axis=1)
    assert np.abs(r - 1.0).max() < 1e-14
    mids = np.array(list(m.curved_midpoints.values()))
    assert np.abs(np.linalg.norm(mids, axis=1) - 1.0).max() < 1e-14


def test_disk_quality_and_perimeter(disk):
    m = generate_mesh(disk, 0.1)
    assert m.h_max <= 1.5 * 0.1
    q = mesh_quantities(m)
    assert abs(q["perimeter"] - 2 * math.pi) < 2e-6
    assert q["area"] < math.pi and abs(q["area"] - math.pi) < 1e-2
    # straight-edge perimeter falls short of the circle
    assert mesh_quantities(m, use_curved=False)["perimeter"] < q["perimeter"]


def test_annulus_topology():
    dom = DomainSpec.annulus(0.5)
    m = generate_mesh(dom, 0.25)
    assert m.euler_characteristic() == 0 == dom.euler_characteristic
    assert set(m.boundary_tags.tolist()) == {0, 1}
    inner = m.boundary_edges[m.boundary_tags == 1].ravel()
    assert np.allclose(np.linalg.norm(m.vertices[inner], axis=1), 0.5)
    assert not dom.simply_connected
    assert dom.boundary_curvature_integral == 0.0


def test_polygon_l_shape():
    dom = DomainSpec.polygon(L_SHAPE)
    m = generate_mesh(dom, 0.2)
    assert m.h_max <= 0.3
    assert abs(mesh_quantities(m)["area"] - 0.75) < 1e-14
    assert abs(dom.analytic_perimeter - 4.0) < 1e-14


def test_polygon_clockwise_is_reversed():
    dom = DomainSpec.polygon(L_SHAPE[::-1])
    assert dom.analytic_area > 0
    generate_mesh(dom, 0.5).validate()


def test_polygon_self_intersection_rejected():
    with pytest.raises(ValueError):
        DomainSpec.polygon([(0, 0), (1, 1), (1, 0), (0, 1)])


@pytest.mark.parametrize("h", [0.0, -0.1, 1.5])
def test_bad_h(square, h):
    with pytest.raises(ValueError):
        generate_mesh(square, h)


def test_parse_selectors(tmp_path):
    assert DomainSpec.parse("square").kind == "unit_square"
    assert DomainSpec.parse("disk").kind == "unit_disk"
    assert DomainSpec.parse("annulus:0.3").inner_radius == 0.3
    f = tmp_path / "poly.txt"
    np.savetxt(f, np.array(L_SHAPE, dtype=float))
    assert DomainSpec.parse(f"polygon:{f}").kind == "polygon"
    with pytest.raises(ValueError):
        DomainSpec.parse("triangle")
    with pytest.raises(ValueError):
        DomainSpec.annulus(1.2)


def test_mesh_round_trip(tmp_path, disk):
    m = generate_mesh(disk, 0.3)
    p = tmp_path / "m.sllmesh"
    write_mesh(m, p)
    assert p.read_text().startswith("SLLMESH 1")
    r = read_mesh(p, disk)
    assert np.array_equal(m.vertices, r.vertices)
    assert np.array_equal(m.triangles, r.triangles)
    assert np.array_equal(m.boundary_edges, r.boundary_edges)
    assert np.array_equal(m.boundary_tags, r.boundary_tags)
    assert m.curved_midpoints.keys() == r.curved_midpoints.keys()


def test_read_mesh_rejects_garbage(tmp_path):
    p = tmp_path / "x"
    p.write_text("not a mesh\n")
    with pytest.raises(ValueError):
        read_mesh(p)


@settings(max_examples=15, deadline=None)
@given(h=st.floats(0.15, 1.0), kind=st.sampled_from(["square", "disk", "annulus:0.4", "lshape"]))
def test_refinement_invariants(h, kind):
    dom = DomainSpec.polygon(L_SHAPE) if kind == "lshape" else DomainSpec.parse(kind)
    m = generate_mesh(dom, h)
    assert m.h_max <= 1.5 * h + 1e-12
    r = refine_uniform(m)
    r.validate()
    assert r.nt == 4 * m.nt
    assert r.euler_characteristic() == m.euler_characteristic()
    assert len(r.boundary_edges) == 2 * len(m.boundary_edges)
    if not dom.is_curved:
        assert abs(mesh_quantities(r)["area"] - mesh_quantities(m)["area"]) < 1e-13
    else:
        # refinement adds area toward the curved boundary
        assert mesh_quantities(r)["area"] >= mesh_quantities(m)["area"]
