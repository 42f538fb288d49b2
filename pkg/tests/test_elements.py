import numpy as np
import pytest

from sll.elements import isoparametric, morley_basis, morley_eval, p1_shape, p2_shape, physical_gradients
from sll.quadrature import RULES, rule


def integrate_monomial(rule_, a, b):
    """Integral of x^a y^b over the reference triangle by the rule."""
    bary, w = rule_
    x, y = bary[:, 1], bary[:, 2]
    return 0.5 * np.sum(w * x ** a * y ** b)


def exact_monomial(a, b):
    from math import factorial
    return factorial(a) * factorial(b) / factorial(a + b + 2)


@pytest.mark.parametrize("degree", sorted(RULES))
def test_rules_exact_to_degree(degree):
    r = RULES[degree]
    assert abs(r[1].sum() - 1.0) < 1e-15
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            assert abs(integrate_monomial(r, a, b) - exact_monomial(a, b)) < 1e-12


def test_rule_selection():
    assert rule(3) is RULES[4]
    assert rule(1) is RULES[1]


def test_p2_partition_of_unity_and_nodal():
    nodes = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1], [0.5, 0.5, 0], [0, 0.5, 0.5], [0.5, 0, 0.5]])
    N, dN = p2_shape(nodes)
    assert np.allclose(N, np.eye(6))
    pts = RULES[4][0]
    N, dN = p2_shape(pts)
    assert np.allclose(N.sum(axis=1), 1.0)
    assert np.allclose(dN.sum(axis=1), 0.0)


def test_p1_shape():
    N, dN = p1_shape([1 / 3, 1 / 3, 1 / 3])
    assert np.allclose(N, 1 / 3)
    assert np.allclose(dN.sum(axis=1), 0.0)


def test_isoparametric_affine_triangle():
    X = np.array([[[0.0, 0.0], [2.0, 0.0], [0.0, 3.0], [1.0, 0.0], [1.0, 1.5], [0.0, 1.5]]])
    _, dN = p2_shape(RULES[4][0])
    detJ, Jinv = isoparametric(X, dN)
    assert np.allclose(detJ, 6.0)
    G = physical_gradients(dN, Jinv)
    # gradient of the interpolant of x is (1, 0)
    gx = np.einsum("tqib,ti->tqb", G, X[..., 0])
    assert np.allclose(gx, [1.0, 0.0])


def test_morley_basis_dofs_are_identity():
    P = np.array([[[0.0, 0.0], [1.0, 0.2], [0.3, 0.9]]])
    normals = np.empty((1, 3, 2))
    for l, (a, b) in enumerate(((0, 1), (1, 2), (2, 0))):
        t = P[0, b] - P[0, a]
        normals[0, l] = np.array([t[1], -t[0]]) / np.linalg.norm(t)
    C, c, hs = morley_basis(P, normals)
    vals, _ = morley_eval(C, c, hs, P)
    assert np.allclose(vals[0], np.eye(3, 6))
    mids = 0.5 * (P + np.roll(P, -1, axis=1))
    _, grads = morley_eval(C, c, hs, mids)
    nd = np.einsum("tqjb,tqb->tqj", grads, normals)
    assert np.allclose(nd[0], np.eye(6)[3:])
