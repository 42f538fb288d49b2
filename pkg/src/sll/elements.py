"""Reference shape functions and per-element geometry.

P2 local node order is vertices 0, 1, 2 followed by the midpoints of
edges (0,1), (1,2), (2,0), matching ``Mesh.edges()``.
"""
import numpy as np

# derivatives of the barycentric coordinates w.r.t. reference (xi, eta)
_DBARY = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
_EDGES = ((0, 1), (1, 2), (2, 0))


def p1_shape(bary):
    """P1 values (nq, 3) and reference gradients (nq, 3, 2)."""
    bary = np.atleast_2d(bary)
    return bary.copy(), np.broadcast_to(_DBARY, (len(bary), 3, 2)).copy()


def p2_shape(bary):
    """P2 values (nq, 6) and reference gradients (nq, 6, 2)."""
    L = np.atleast_2d(bary)
    nq = len(L)
    N = np.empty((nq, 6))
    dN = np.empty((nq, 6, 2))
    for i in range(3):
        N[:, i] = L[:, i] * (2.0 * L[:, i] - 1.0)
        dN[:, i] = (4.0 * L[:, i] - 1.0)[:, None] * _DBARY[i]
    for k, (a, b) in enumerate(_EDGES):
        N[:, 3 + k] = 4.0 * L[:, a] * L[:, b]
        dN[:, 3 + k] = 4.0 * (L[:, b, None] * _DBARY[a] + L[:, a, None] * _DBARY[b])
    return N, dN


def isoparametric(X, dN_ref):
    """Jacobian data for the map x(xi) = sum_i N_i(xi) X_i.

    Parameters
    ----------
    X : (nt, nn, 2) node coordinates of each element.
    dN_ref : (nq, nn, 2) reference gradients of the geometry basis.

    Returns
    -------
    detJ : (nt, nq)
    Jinv : (nt, nq, 2, 2) with ``Jinv[..., a, b] = d xi_a / d x_b``.
    """
    J = np.einsum("tia,qib->tqab", X, dN_ref)
    detJ = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    Jinv = np.empty_like(J)
    Jinv[..., 0, 0] = J[..., 1, 1] / detJ
    Jinv[..., 1, 1] = J[..., 0, 0] / detJ
    Jinv[..., 0, 1] = -J[..., 0, 1] / detJ
    Jinv[..., 1, 0] = -J[..., 1, 0] / detJ
    return detJ, Jinv


def physical_gradients(dN_ref, Jinv):
    """Map reference gradients (nq, nb, 2) to physical ones (nt, nq, nb, 2)."""
    return np.einsum("qia,tqab->tqib", dN_ref, Jinv)


def morley_basis(P, normals):
    """Monomial coefficients of the local Morley basis.

    The six degrees of freedom are the vertex values and the derivatives
    along ``normals[:, l]`` at the midpoint of local edge ``l`` (from vertex
    ``l`` to vertex ``l+1``). Monomials are ``1, s, r, s^2, s r, r^2`` in
    the scaled coordinates ``s = (x - xc) / hs``, ``r = (y - yc) / hs``.

    Returns
    -------
    C : (nt, 6, 6) with basis function ``j`` equal to ``sum_m C[:, m, j] p_m``.
    center : (nt, 2)
    hs : (nt,)
    """
    center = P.mean(axis=1)
    hs = np.linalg.norm(P - center[:, None], axis=2).max(axis=1)
    S = (P - center[:, None]) / hs[:, None, None]
    nt = len(P)
    V = np.zeros((nt, 6, 6))
    s, r = S[..., 0], S[..., 1]
    V[:, :3, 0] = 1.0
    V[:, :3, 1] = s
    V[:, :3, 2] = r
    V[:, :3, 3] = s * s
    V[:, :3, 4] = s * r
    V[:, :3, 5] = r * r
    for l, (a, b) in enumerate(_EDGES):
        ms, mr = 0.5 * (s[:, a] + s[:, b]), 0.5 * (r[:, a] + r[:, b])
        nx, ny = normals[:, l, 0], normals[:, l, 1]
        row = V[:, 3 + l]
        row[:, 1] = nx
        row[:, 2] = ny
        row[:, 3] = 2.0 * ms * nx
        row[:, 4] = mr * nx + ms * ny
        row[:, 5] = 2.0 * mr * ny
        row /= hs[:, None]
    return np.linalg.inv(V), center, hs


def morley_eval(C, center, hs, points):
    """Values (nt, nq, 6) and gradients (nt, nq, 6, 2) at physical points (nt, nq, 2)."""
    S = (points - center[:, None]) / hs[:, None, None]
    s, r = S[..., 0], S[..., 1]
    one = np.ones_like(s)
    mono = np.stack([one, s, r, s * s, s * r, r * r], axis=-1)
    ds = np.stack([0 * one, one, 0 * one, 2 * s, r, 0 * one], axis=-1)
    dr = np.stack([0 * one, 0 * one, one, 0 * one, s, 2 * r], axis=-1)
    vals = np.einsum("tqm,tmj->tqj", mono, C)
    gx = np.einsum("tqm,tmj->tqj", ds, C) / hs[:, None, None]
    gy = np.einsum("tqm,tmj->tqj", dr, C) / hs[:, None, None]
    return vals, np.stack([gx, gy], axis=-1)


def morley_hessians(C, hs):
    """Constant Hessian entries (hxx, hxy, hyy), each of shape (nt, 6)."""
    k = 1.0 / hs[:, None] ** 2
    return 2.0 * C[:, 3] * k, C[:, 4] * k, 2.0 * C[:, 5] * k
