"""Triangle quadrature rules in barycentric form.

Each rule is ``(bary, weights)`` with ``bary`` of shape (nq, 3) and weights
summing to 1, so ``sum(w * f) * area`` integrates ``f`` over a triangle.
"""
import numpy as np


def _dunavant4():
    a, wa = 0.445948490915965, 0.223381589678011
    b, wb = 0.091576213509771, 0.109951743655322
    pts = []
    for p in (a, b):
        q = 1.0 - 2.0 * p
        pts += [(q, p, p), (p, q, p), (p, p, q)]
    w = np.array([wa] * 3 + [wb] * 3)
    return np.array(pts), w / w.sum()


def _midpoint2():
    return np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]), np.full(3, 1.0 / 3.0)


def _centroid1():
    return np.full((1, 3), 1.0 / 3.0), np.ones(1)


RULES = {1: _centroid1(), 2: _midpoint2(), 4: _dunavant4()}


def rule(degree):
    """Smallest stored rule exact for polynomials of the given degree."""
    for d in sorted(RULES):
        if d >= degree:
            return RULES[d]
    raise ValueError(f"no triangle rule of degree {degree}")
