"""Finite element assembly for the operator catalog.

Element spaces: scalar P1/P2, vector P2 (blocked: all x-components, then
all y-components), Taylor-Hood P2/P1 and the Morley plate element.
Triangles touching a curved boundary use the isoparametric quadratic map.

Assembly is vectorized per chunk of triangles; with ``workers > 1`` chunks
are computed in a process pool and concatenated in chunk order, so the
result does not depend on scheduling.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import elements, quadrature
from .ldl import SingularFactorError, SparseLDL
from .sparse import coo_to_csr

GARDING_SHIFT = 10.0  # d~ in units of mu
PROJECTED_DIV_RATIO = 100.0  # "auto" switches the projected form on for lambda > ratio * mu


@dataclass
class AssembledSystem:
    """Stiffness/mass pair on the full dof set plus constraint bookkeeping.

    ``free_dofs`` are the unconstrained indices; :meth:`reduced` applies
    row/column elimination. When ``penalty`` is set the energy is
    ``stiffness + penalty * B^T Mp^{-1} B`` with ``B = constraint`` and
    ``Mp = pressure_mass``; otherwise a present ``constraint`` is a hard
    divergence constraint (mixed Stokes).
    """

    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    elementkind: str
    boundary_constrained_dofs: np.ndarray
    nodes: np.ndarray
    constraint: sp.csr_matrix = None
    pressure_mass: sp.csr_matrix = None
    penalty: float = None
    ncomp: int = 1
    info: dict = field(default_factory=dict)

    @property
    def ndof(self):
        return self.stiffness.shape[0]

    @property
    def free_dofs(self):
        mask = np.ones(self.ndof, dtype=bool)
        mask[self.boundary_constrained_dofs] = False
        return np.flatnonzero(mask)

    def dof(self, node, comp=0):
        """Global index of component ``comp`` at node ``node``."""
        return comp * len(self.nodes) + node

    def reduced(self):
        """(A, M, B) restricted to free dofs; B is None without a constraint."""
        f = self.free_dofs
        A = self.stiffness[f][:, f].tocsr()
        M = self.mass[f][:, f].tocsr()
        B = None if self.constraint is None else self.constraint[:, f].tocsr()
        return A, M, B

    def interpolate(self, func):
        """Nodal interpolant of ``func(x, y)`` returning ncomp values."""
        vals = np.asarray(func(self.nodes[:, 0], self.nodes[:, 1]), dtype=float)
        if self.ncomp == 1:
            return np.broadcast_to(vals, (len(self.nodes),)).copy()
        return np.concatenate([np.broadcast_to(v, (len(self.nodes),)) for v in vals])


# ---------------------------------------------------------------- helpers

def _check_mesh(mesh):
    if mesh is None or mesh.nt == 0:
        raise ValueError("cannot assemble on an empty mesh")


def _p2_layout(mesh):
    edges, tri_edges = mesh.edges()
    nodes = np.vstack([mesh.vertices, mesh.edge_midpoints()])
    tdofs = np.hstack([mesh.triangles, mesh.nv + tri_edges])
    bnodes = np.concatenate([mesh.boundary_vertices(), mesh.nv + mesh.boundary_edge_indices()])
    return nodes, tdofs, np.unique(bnodes)


def _chunks(n, workers):
    parts = max(1, int(workers))
    bounds = np.linspace(0, n, parts + 1).astype(int)
    return [(bounds[i], bounds[i + 1]) for i in range(parts) if bounds[i + 1] > bounds[i]]


def _run(kernel, X, params, workers):
    """Evaluate ``kernel(X[a:b], **params)`` per chunk and stack the results."""
    spans = _chunks(len(X), workers)
    if len(spans) <= 1:
        return kernel(X, **params)
    with ProcessPoolExecutor(max_workers=len(spans)) as pool:
        futs = [pool.submit(kernel, X[a:b], **params) for a, b in spans]
        parts = [f.result() for f in futs]
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate(p) for p in zip(*parts))
    return np.concatenate(parts)


def _scatter(local, rdofs, cdofs, shape):
    nt, nr, nc = local.shape
    rows = np.repeat(rdofs[:, :, None], nc, axis=2)
    cols = np.repeat(cdofs[:, None, :], nr, axis=1)
    return coo_to_csr(rows.ravel(), cols.ravel(), local.ravel(), shape)


def _p2_geometry(X, degree=4):
    bary, w = quadrature.rule(degree)
    N, dN = elements.p2_shape(bary)
    detJ, Jinv = elements.isoparametric(X, dN)
    G = elements.physical_gradients(dN, Jinv)
    W = 0.5 * detJ * w[None, :]
    return N, G, W, bary


# ---------------------------------------------------------------- element kernels

def _k_scalar_p2(X, mu):
    N, G, W, _ = _p2_geometry(X)
    K = mu * np.einsum("tq,tqia,tqja->tij", W, G, G)
    M = np.einsum("tq,qi,qj->tij", W, N, N)
    return K, M


def _k_scalar_p1(X, mu):
    P = X[:, :3]
    e1, e2 = P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    # gradients of barycentric coordinates
    g = np.empty((len(P), 3, 2))
    g[:, 1] = np.column_stack([e2[:, 1], -e2[:, 0]]) / det[:, None]
    g[:, 2] = np.column_stack([-e1[:, 1], e1[:, 0]]) / det[:, None]
    g[:, 0] = -g[:, 1] - g[:, 2]
    area = 0.5 * det
    K = mu * area[:, None, None] * np.einsum("tia,tja->tij", g, g)
    M = area[:, None, None] * (np.ones((3, 3)) + np.eye(3)) / 12.0
    return K, M


def _k_lame_p2(X, lam, mu):
    N, G, W, _ = _p2_geometry(X)
    gx, gy = G[..., 0], G[..., 1]

    def integ(a, b):
        return np.einsum("tq,tqi,tqj->tij", W, a, b)

    xx, yy, xy, yx = integ(gx, gx), integ(gy, gy), integ(gx, gy), integ(gy, gx)
    Kxx = (2 * mu + lam) * xx + mu * yy
    Kyy = (2 * mu + lam) * yy + mu * xx
    Kxy = lam * xy + mu * yx
    K = np.block([[Kxx, Kxy], [Kxy.transpose(0, 2, 1), Kyy]])
    Ms = np.einsum("tq,qi,qj->tij", W, N, N)
    Z = np.zeros_like(Ms)
    M = np.block([[Ms, Z], [Z, Ms]])
    return K, M


def _k_vector_laplace_p2(X, mu):
    K, M = _k_scalar_p2(X, mu)
    Z = np.zeros_like(K)
    return np.block([[K, Z], [Z, K]]), np.block([[M, Z], [Z, M]])


def _k_div_p1(X):
    """B[i, j] = int q_i div u_j with P1 q and vector P2 u; also the P1 mass."""
    _, G, W, bary = _p2_geometry(X)
    Q = bary  # P1 shape values on the reference triangle
    Bx = np.einsum("tq,qi,tqj->tij", W, Q, G[..., 0])
    By = np.einsum("tq,qi,tqj->tij", W, Q, G[..., 1])
    Mp = np.einsum("tq,qi,qj->tij", W, Q, Q)
    return np.concatenate([Bx, By], axis=2), Mp


# ---------------------------------------------------------------- public forms

def _vector_dofs(tdofs, nn):
    return np.hstack([tdofs, tdofs + nn])


def _boundary_vector(bnodes, nn):
    return np.concatenate([bnodes, bnodes + nn])


def _divergence_block(mesh, nodes, tdofs, workers):
    nn, nv = len(nodes), mesh.nv
    X = nodes[tdofs]
    Bl, Mpl = _run(_k_div_p1, X, {}, workers)
    B = _scatter(Bl, mesh.triangles, _vector_dofs(tdofs, nn), (nv, 2 * nn))
    Mp = _scatter(Mpl, mesh.triangles, mesh.triangles, (nv, nv))
    return B, Mp


def assemble_scalar_laplace(mesh, mu, bc="dirichlet", element="P2", workers=1):
    """``mu * int grad u . grad v`` and ``int u v`` on P1 or P2."""
    _check_mesh(mesh)
    if mu <= 0:
        raise ValueError("mu must be positive")
    if bc not in ("dirichlet", "neumann"):
        raise ValueError(f"unknown boundary condition {bc!r}")
    if element == "P2":
        nodes, tdofs, bnodes = _p2_layout(mesh)
        kernel = _k_scalar_p2
    elif element == "P1":
        nodes, tdofs, bnodes = mesh.vertices, mesh.triangles, mesh.boundary_vertices()
        kernel = _k_scalar_p1
    else:
        raise ValueError(f"unknown element {element!r}")
    X = np.asarray(nodes)[tdofs]
    K, M = _run(kernel, X, {"mu": mu}, workers)
    n = len(nodes)
    constrained = bnodes if bc == "dirichlet" else np.zeros(0, np.int64)
    return AssembledSystem(_scatter(K, tdofs, tdofs, (n, n)), _scatter(M, tdofs, tdofs, (n, n)),
                           element, np.asarray(constrained, np.int64), np.asarray(nodes))


def assemble_lame(mesh, lam, mu, bc="dirichlet", projected_div=False, workers=1):
    """Vector P2 form ``int 2 mu Def u : Def v + lam (div u)(div v)``.

    With ``projected_div`` the divergence term is replaced by
    ``lam * |P div u|^2`` where ``P`` is the L2 projection onto continuous
    P1 (the Taylor-Hood pressure space); the system then carries
    ``constraint``, ``pressure_mass`` and ``penalty = lam``.
    """
    _check_mesh(mesh)
    if mu <= 0 or lam + 2 * mu <= 0:
        raise ValueError(f"need mu > 0 and lambda + 2 mu > 0 (lambda={lam}, mu={mu})")
    if bc not in ("dirichlet", "traction"):
        raise ValueError(f"unknown boundary condition {bc!r}")
    if projected_div and lam <= 0:
        raise ValueError("projected divergence form needs lambda > 0")
    nodes, tdofs, bnodes = _p2_layout(mesh)
    nn = len(nodes)
    vd = _vector_dofs(tdofs, nn)
    K, M = _run(_k_lame_p2, nodes[tdofs], {"lam": 0.0 if projected_div else lam, "mu": mu}, workers)
    constrained = _boundary_vector(bnodes, nn) if bc == "dirichlet" else np.zeros(0, np.int64)
    sysm = AssembledSystem(_scatter(K, vd, vd, (2 * nn, 2 * nn)), _scatter(M, vd, vd, (2 * nn, 2 * nn)),
                           "vectorP2", constrained, nodes, ncomp=2,
                           info={"lambda": lam, "mu": mu, "bc": bc, "projected_div": bool(projected_div)})
    if projected_div:
        sysm.constraint, sysm.pressure_mass = _divergence_block(mesh, nodes, tdofs, workers)
        sysm.penalty = float(lam)
    return sysm


def assemble_laplace_vector(mesh, mu, bc="dirichlet", workers=1):
    """Dirichlet: componentwise ``mu grad:grad``; traction: ``mu (2 Def:Def - div div)``."""
    if bc == "traction":
        sysm = assemble_lame(mesh, -mu, mu, "traction", workers=workers)
        sysm.info["operator"] = "laplace_vec_traction"
        return sysm
    if bc != "dirichlet":
        raise ValueError(f"unknown boundary condition {bc!r}")
    _check_mesh(mesh)
    if mu <= 0:
        raise ValueError("mu must be positive")
    nodes, tdofs, bnodes = _p2_layout(mesh)
    nn = len(nodes)
    vd = _vector_dofs(tdofs, nn)
    K, M = _run(_k_vector_laplace_p2, nodes[tdofs], {"mu": mu}, workers)
    return AssembledSystem(_scatter(K, vd, vd, (2 * nn, 2 * nn)), _scatter(M, vd, vd, (2 * nn, 2 * nn)),
                           "vectorP2", _boundary_vector(bnodes, nn), nodes, ncomp=2,
                           info={"mu": mu, "bc": bc})


def assemble_stokes_taylor_hood(mesh, mu, bc="dirichlet", workers=1):
    """P2 velocity ``2 mu Def:Def`` with the P1 pressure pairing ``int q div u``."""
    if bc not in ("dirichlet", "cauchy_force"):
        raise ValueError(f"unknown boundary condition {bc!r}")
    sysm = assemble_lame(mesh, 0.0, mu, "dirichlet" if bc == "dirichlet" else "traction",
                         workers=workers)
    nodes, tdofs, _ = _p2_layout(mesh)
    sysm.constraint, sysm.pressure_mass = _divergence_block(mesh, nodes, tdofs, workers)
    sysm.elementkind = "taylor_hood"
    sysm.info = {"mu": mu, "bc": bc}
    return sysm


def _morley_normals(mesh):
    edges, tri_edges = mesh.edges()
    t = mesh.vertices[edges[:, 1]] - mesh.vertices[edges[:, 0]]
    t /= np.linalg.norm(t, axis=1)[:, None]
    return np.column_stack([t[:, 1], -t[:, 0]])


def _k_morley(P, normals):
    C, center, hs = elements.morley_basis(P, normals)
    e1, e2 = P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]
    area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    hxx, hxy, hyy = elements.morley_hessians(C, hs)
    bend = area[:, None, None] * (np.einsum("ti,tj->tij", hxx, hxx) + 2 * np.einsum("ti,tj->tij", hxy, hxy)
                                  + np.einsum("ti,tj->tij", hyy, hyy))

    def at(bary):
        return np.einsum("qk,tka->tqa", bary, P)

    b2, w2 = quadrature.rule(2)
    _, g = elements.morley_eval(C, center, hs, at(b2))
    geo = np.einsum("t,q,tqia,tqja->tij", area, w2, g, g)
    b4, w4 = quadrature.rule(4)
    v, _ = elements.morley_eval(C, center, hs, at(b4))
    mass = np.einsum("t,q,tqi,tqj->tij", area, w4, v, v)
    return bend, geo, mass


def assemble_biharmonic_morley(mesh, workers=1):
    """Morley bending ``int D2u:D2v``, geometric ``int grad u.grad v`` and mass.

    Degrees of freedom: vertex values (indices ``0..nv-1``) then the normal
    derivative at each edge midpoint (``nv + edge``), taken along the edge
    normal obtained by rotating the tangent from the lower to the higher
    vertex index clockwise. Straight triangles are used on curved domains.
    """
    _check_mesh(mesh)
    edges, tri_edges = mesh.edges()
    normals = _morley_normals(mesh)
    tdofs = np.hstack([mesh.triangles, mesh.nv + tri_edges])
    P = mesh.vertices[mesh.triangles]
    local_normals = normals[tri_edges]
    n = mesh.nv + len(edges)
    spans = _chunks(mesh.nt, workers)
    if len(spans) <= 1:
        bend, geo, mass = _k_morley(P, local_normals)
    else:
        with ProcessPoolExecutor(max_workers=len(spans)) as pool:
            parts = [pool.submit(_k_morley, P[a:b], local_normals[a:b]) for a, b in spans]
            parts = [f.result() for f in parts]
        bend, geo, mass = (np.concatenate(p) for p in zip(*parts))
    constrained = np.concatenate([mesh.boundary_vertices(), mesh.nv + mesh.boundary_edge_indices()])
    mids = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    return {
        "bending": _scatter(bend, tdofs, tdofs, (n, n)),
        "geometric": _scatter(geo, tdofs, tdofs, (n, n)),
        "mass": _scatter(mass, tdofs, tdofs, (n, n)),
        "dof_map": {"vertex_values": np.arange(mesh.nv), "edge_normal_derivatives": mesh.nv + np.arange(len(edges)),
                    "edge_normals": normals, "edge_midpoints": mids},
        "boundary_constrained_dofs": np.unique(constrained),
    }


def morley_interpolate(mesh, dof_map, f, grad):
    """Morley interpolant of ``f`` with gradient ``grad`` (both callables of x, y)."""
    v = mesh.vertices
    mids = dof_map["edge_midpoints"]
    g = np.asarray(grad(mids[:, 0], mids[:, 1]), dtype=float)
    g = np.broadcast_to(g.T if g.ndim == 2 else g, (len(mids), 2))
    nd = (g * dof_map["edge_normals"]).sum(axis=1)
    vals = np.broadcast_to(np.asarray(f(v[:, 0], v[:, 1]), float), (len(v),))
    return np.concatenate([vals, nd])


def garding_check(system, shift=None):
    """Factor ``A + d M`` on the free dofs (d defaults to 10 mu); True iff all pivots positive."""
    mu = system.info.get("mu", 1.0)
    d = GARDING_SHIFT * mu if shift is None else shift
    A, M, _ = system.reduced()
    try:
        F = SparseLDL(A + d * M)
    except SingularFactorError:
        return False
    return F.inertia()[1] == 0 and F.inertia()[2] == 0
