"""Domains and conforming triangle meshes.

Meshes are deterministic: the unit square uses a "union jack" grid (full
square symmetry group), the disk and annulus use structured polar meshes
built sector by sector so that rotation by ``2*pi/12`` maps the mesh to
itself. That symmetry is what keeps the analytic eigenvalue pairs exactly
degenerate at the discrete level.
"""
from dataclasses import dataclass, field
import math

import numpy as np

SECTORS = 12
MAGIC = "SLLMESH 1"


@dataclass(frozen=True)
class DomainSpec:
    """A flat 2D domain with its analytic measures.

    Use the constructors :meth:`unit_square`, :meth:`unit_disk`,
    :meth:`annulus` and :meth:`polygon` rather than building one directly.
    """

    kind: str
    inner_radius: float = 0.0
    vertices: tuple = ()

    @classmethod
    def unit_square(cls):
        return cls("unit_square")

    @classmethod
    def unit_disk(cls):
        return cls("unit_disk")

    @classmethod
    def annulus(cls, inner_radius):
        if not 0.0 < inner_radius < 1.0:
            raise ValueError("annulus inner radius must lie in (0, 1)")
        return cls("annulus", inner_radius=float(inner_radius))

    @classmethod
    def polygon(cls, vertices):
        pts = np.asarray(vertices, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
            raise ValueError("polygon needs at least three 2D vertices")
        if _polygon_self_intersects(pts):
            raise ValueError("polygon is self-intersecting")
        if _signed_area(pts) < 0:
            pts = pts[::-1]
        return cls("polygon", vertices=tuple(map(tuple, pts.tolist())))

    @classmethod
    def parse(cls, text):
        """Parse a CLI selector: ``square``, ``disk``, ``annulus:R`` or ``polygon:FILE``."""
        if text in ("square", "unit_square"):
            return cls.unit_square()
        if text in ("disk", "unit_disk"):
            return cls.unit_disk()
        if text.startswith("annulus:"):
            return cls.annulus(float(text.split(":", 1)[1]))
        if text.startswith("polygon:"):
            pts = np.loadtxt(text.split(":", 1)[1], ndmin=2)
            return cls.polygon(pts)
        raise ValueError(f"unknown domain selector {text!r}")

    @property
    def label(self):
        if self.kind == "annulus":
            return f"annulus:{self.inner_radius:g}"
        return {"unit_square": "square", "unit_disk": "disk"}.get(self.kind, self.kind)

    @property
    def analytic_area(self):
        if self.kind == "unit_square":
            return 1.0
        if self.kind == "unit_disk":
            return math.pi
        if self.kind == "annulus":
            return math.pi * (1.0 - self.inner_radius ** 2)
        return _signed_area(np.asarray(self.vertices))

    @property
    def analytic_perimeter(self):
        if self.kind == "unit_square":
            return 4.0
        if self.kind == "unit_disk":
            return 2.0 * math.pi
        if self.kind == "annulus":
            return 2.0 * math.pi * (1.0 + self.inner_radius)
        pts = np.asarray(self.vertices)
        return float(np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1).sum())

    @property
    def boundary_curvature_integral(self):
        """Integral of boundary curvature; for polygons the sum of exterior angles.

        The annulus value is 0: the inner circle has curvature ``-1/r`` with
        respect to the outward normal of the domain.
        """
        if self.kind == "annulus":
            return 0.0
        return 2.0 * math.pi

    @property
    def curvature_is_distributional(self):
        return self.kind in ("unit_square", "polygon")

    @property
    def is_curved(self):
        return self.kind in ("unit_disk", "annulus")

    @property
    def simply_connected(self):
        return self.kind != "annulus"

    @property
    def euler_characteristic(self):
        return 0 if self.kind == "annulus" else 1

    def boundary_radius(self, tag):
        return self.inner_radius if (self.kind == "annulus" and tag == 1) else 1.0

    def boundary_midpoint(self, p, q, tag):
        """Point of the analytic boundary halfway between boundary points p and q."""
        m = 0.5 * (np.asarray(p, float) + np.asarray(q, float))
        if not self.is_curved:
            return m
        return m * (self.boundary_radius(tag) / np.linalg.norm(m))


@dataclass
class Mesh:
    """Conforming triangulation.

    ``boundary_edges`` are oriented so the domain lies to their left;
    ``curved_midpoints`` maps a sorted vertex pair to the true boundary
    midpoint of that edge.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    curved_midpoints: dict = field(default_factory=dict)
    domain: DomainSpec = None

    @property
    def nv(self):
        return len(self.vertices)

    @property
    def nt(self):
        return len(self.triangles)

    @property
    def h_max(self):
        e = self.edges()[0]
        return float(np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1).max())

    def edges(self):
        """Unique edges and the triangle-to-edge map.

        Returns ``(edges, tri_edges)`` where ``edges`` is (ne, 2) with sorted
        vertex pairs and ``tri_edges[t, l]`` indexes the edge from local
        vertex ``l`` to local vertex ``(l + 1) % 3``.
        """
        cache = getattr(self, "_edge_cache", None)
        if cache is not None:
            return cache
        t = self.triangles
        local = np.stack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=1).reshape(-1, 2)
        key = np.sort(local, axis=1)
        edges, inverse = np.unique(key, axis=0, return_inverse=True)
        tri_edges = inverse.reshape(-1, 3)
        self._edge_cache = (edges, tri_edges)
        return self._edge_cache

    def boundary_vertices(self):
        return np.unique(self.boundary_edges)

    def boundary_edge_indices(self):
        """Indices (into ``edges()[0]``) of the boundary edges."""
        edges = self.edges()[0]
        key = np.sort(self.boundary_edges, axis=1)
        lookup = {tuple(e): i for i, e in enumerate(edges.tolist())}
        return np.array([lookup[tuple(k)] for k in key.tolist()], dtype=np.int64)

    def euler_characteristic(self):
        return self.nv - len(self.edges()[0]) + self.nt

    def signed_areas(self):
        v = self.vertices[self.triangles]
        a = v[:, 1] - v[:, 0]
        b = v[:, 2] - v[:, 0]
        return 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])

    def edge_midpoints(self):
        """Geometric midpoints of all edges, using curved midpoints where present."""
        edges = self.edges()[0]
        mids = 0.5 * (self.vertices[edges[:, 0]] + self.vertices[edges[:, 1]])
        if self.curved_midpoints:
            for i, e in enumerate(edges.tolist()):
                m = self.curved_midpoints.get((e[0], e[1]))
                if m is not None:
                    mids[i] = m
        return mids

    def validate(self):
        """Check orientation, boundary loops and topology; raise ValueError on failure."""
        if self.nt == 0:
            raise ValueError("empty mesh")
        if (self.signed_areas() <= 0).any():
            raise ValueError("mesh has non-positive triangle areas")
        edges, tri_edges = self.edges()
        counts = np.bincount(tri_edges.ravel(), minlength=len(edges))
        if (counts > 2).any():
            raise ValueError("non-manifold edge")
        bidx = self.boundary_edge_indices()
        if not (counts[bidx] == 1).all() or (counts == 1).sum() != len(bidx):
            raise ValueError("boundary edges do not match single-triangle edges")
        succ = {}
        for a, b in self.boundary_edges.tolist():
            if a in succ:
                raise ValueError("boundary vertex with two outgoing edges")
            succ[a] = b
        if set(succ) != set(succ.values()):
            raise ValueError("boundary edges do not form closed loops")
        if self.domain is not None and self.euler_characteristic() != self.domain.euler_characteristic:
            raise ValueError("Euler characteristic does not match domain topology")
        return True


def _signed_area(pts):
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _segments_cross(p1, p2, q1, q2):
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 * d2 < 0 and d3 * d4 < 0:
        return True
    return False


def _polygon_self_intersects(pts):
    n = len(pts)
    for i in range(n):
        a, b = pts[i], pts[(i + 1) % n]
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_cross(a, b, pts[j], pts[(j + 1) % n]):
                return True
    if len({tuple(p) for p in pts.tolist()}) != n:
        return True
    return False


def _finish(vertices, triangles, domain):
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    mesh = Mesh(vertices, triangles, np.zeros((0, 2), np.int64), np.zeros(0, np.int64), {}, domain)
    edges, tri_edges = mesh.edges()
    counts = np.bincount(tri_edges.ravel(), minlength=len(edges))
    t = triangles
    local = np.stack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=1).reshape(-1, 2)
    once = counts[tri_edges.ravel()] == 1
    bedges = local[once]
    tags = np.zeros(len(bedges), dtype=np.int64)
    if domain is not None and domain.kind == "annulus":
        r = np.linalg.norm(vertices[bedges[:, 0]], axis=1)
        tags[r < 0.5 * (1.0 + domain.inner_radius)] = 1
    mesh.boundary_edges = bedges
    mesh.boundary_tags = tags
    if domain is not None and domain.is_curved:
        for (a, b), tag in zip(bedges.tolist(), tags.tolist()):
            key = (min(a, b), max(a, b))
            mesh.curved_midpoints[key] = domain.boundary_midpoint(vertices[a], vertices[b], tag)
    return mesh


def _square_mesh(h, domain):
    n = max(2, math.ceil(1.0 / h - 1e-12))
    n += n % 2
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    tris = []
    for j in range(n):
        for i in range(n):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            if (i + j) % 2 == 0:
                tris += [(a, b, c), (a, c, d)]
            else:
                tris += [(a, b, d), (b, c, d)]
    return _finish(vertices, tris, domain)


def _stitch(inner, outer, inner_ang, outer_ang):
    """Triangulate the strip between two angle-sorted polylines with shared end angles."""
    tris = []
    i = j = 0
    p, q = len(inner) - 1, len(outer) - 1
    while i < p or j < q:
        if j < q and (i == p or outer_ang[j + 1] <= inner_ang[i + 1] + 1e-12):
            tris.append((inner[i], outer[j], outer[j + 1]))
            j += 1
        else:
            tris.append((inner[i], outer[j], inner[i + 1]))
            i += 1
    return tris


def _polar_mesh(radii, counts, domain, center):
    """Rotation-symmetric mesh between concentric rings.

    ``counts[r]`` points per ring, each a multiple of SECTORS; the strip
    between consecutive rings is stitched in one sector and rotated.
    """
    vertices = []
    ring_start = []
    if center:
        vertices.append((0.0, 0.0))
    for r, m in zip(radii, counts):
        ring_start.append(len(vertices))
        ang = 2.0 * math.pi * np.arange(m) / m
        vertices += list(zip(r * np.cos(ang), r * np.sin(ang)))
    tris = []
    for s in range(SECTORS):
        if center:
            m = counts[0]
            per = m // SECTORS
            for t in range(per):
                a = ring_start[0] + (s * per + t) % m
                b = ring_start[0] + (s * per + t + 1) % m
                tris.append((0, a, b))
        for r in range(len(radii) - 1):
            mi, mo = counts[r], counts[r + 1]
            pi_, po = mi // SECTORS, mo // SECTORS
            inner = [ring_start[r] + (s * pi_ + t) % mi for t in range(pi_ + 1)]
            outer = [ring_start[r + 1] + (s * po + t) % mo for t in range(po + 1)]
            inner_ang = [t / pi_ for t in range(pi_ + 1)]
            outer_ang = [t / po for t in range(po + 1)]
            tris += _stitch(inner, outer, inner_ang, outer_ang)
    return _finish(vertices, tris, domain)


def _disk_mesh(h, domain):
    N = max(1, math.ceil(1.0 / h - 1e-12))
    radii = [i / N for i in range(1, N + 1)]
    counts = [SECTORS * math.ceil(2.0 * math.pi * i / SECTORS - 1e-12) for i in range(1, N + 1)]
    return _polar_mesh(radii, counts, domain, center=True)


def _annulus_mesh(h, domain):
    r0 = domain.inner_radius
    N = max(1, math.ceil((1.0 - r0) / h - 1e-12))
    radii = [r0 + (1.0 - r0) * i / N for i in range(N + 1)]
    m = SECTORS * max(1, math.ceil(2.0 * math.pi / (SECTORS * h) - 1e-12))
    return _polar_mesh(radii, [m] * len(radii), domain, center=False)


def _ear_clip(pts):
    idx = list(range(len(pts)))
    tris = []

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 10 * len(pts) ** 2:
            raise ValueError("ear clipping failed; polygon may be degenerate")
        for k in range(len(idx)):
            a, b, c = idx[k - 1], idx[k], idx[(k + 1) % len(idx)]
            if cross(pts[a], pts[b], pts[c]) <= 1e-14:
                continue
            inside = False
            for o in idx:
                if o in (a, b, c):
                    continue
                p = pts[o]
                if (cross(pts[a], pts[b], p) >= 0 and cross(pts[b], pts[c], p) >= 0
                        and cross(pts[c], pts[a], p) >= 0):
                    inside = True
                    break
            if not inside:
                tris.append((a, b, c))
                idx.pop(k)
                break
    tris.append(tuple(idx))
    return tris


def generate_mesh(spec, h_target):
    """Triangulate ``spec`` with longest edge at most ``1.5 * h_target``."""
    if not 0.0 < h_target <= 1.0:
        raise ValueError(f"h_target must lie in (0, 1], got {h_target}")
    if spec.kind == "unit_square":
        mesh = _square_mesh(h_target, spec)
    elif spec.kind == "unit_disk":
        mesh = _disk_mesh(h_target, spec)
    elif spec.kind == "annulus":
        mesh = _annulus_mesh(h_target, spec)
    elif spec.kind == "polygon":
        pts = np.asarray(spec.vertices, dtype=float)
        mesh = _finish(pts, _ear_clip(pts), spec)
        while mesh.h_max > 1.5 * h_target:
            mesh = refine_uniform(mesh)
    else:
        raise ValueError(f"unknown domain kind {spec.kind!r}")
    mesh.validate()
    return mesh


def _quadratic_point(a, m, b, s):
    """Point at parameter s in [0, 1] on the quadratic through a, m (s=1/2), b."""
    return a * (1 - s) * (1 - 2 * s) + 4 * m * s * (1 - s) + b * s * (2 * s - 1)


def refine_uniform(mesh):
    """Split every triangle into four; boundary midpoints follow the true boundary."""
    edges, tri_edges = mesh.edges()
    nv = mesh.nv
    mids = mesh.edge_midpoints()
    vertices = np.vstack([mesh.vertices, mids])
    t = mesh.triangles
    m01, m12, m20 = (nv + tri_edges[:, 0], nv + tri_edges[:, 1], nv + tri_edges[:, 2])
    children = np.stack([
        np.column_stack([t[:, 0], m01, m20]),
        np.column_stack([m01, t[:, 1], m12]),
        np.column_stack([m20, m12, t[:, 2]]),
        np.column_stack([m01, m12, m20]),
    ], axis=1).reshape(-1, 3)

    lookup = {tuple(e): i for i, e in enumerate(edges.tolist())}
    bedges, btags, curved = [], [], {}
    for (a, b), tag in zip(mesh.boundary_edges.tolist(), mesh.boundary_tags.tolist()):
        key = (min(a, b), max(a, b))
        mid = nv + lookup[key]
        bedges += [(a, mid), (mid, b)]
        btags += [tag, tag]
        if key in mesh.curved_midpoints:
            pa, pm, pb = mesh.vertices[a], mesh.curved_midpoints[key], mesh.vertices[b]
            for (u, v), s in (((a, mid), 0.25), ((mid, b), 0.75)):
                if mesh.domain is not None and mesh.domain.is_curved:
                    c = mesh.domain.boundary_midpoint(vertices[u], vertices[v], tag)
                else:
                    c = _quadratic_point(pa, np.asarray(pm), pb, s)
                curved[(min(u, v), max(u, v))] = c
    child = Mesh(vertices, children, np.array(bedges, dtype=np.int64).reshape(-1, 2),
                 np.array(btags, dtype=np.int64), curved, mesh.domain)
    return child


def mesh_quantities(mesh, use_curved=True):
    """Area (sum of straight triangle areas) and boundary length.

    With ``use_curved`` the length of each curved boundary edge is the arc
    length of its quadratic interpolant, integrated by 5-point Gauss-Legendre.
    """
    area = float(mesh.signed_areas().sum())
    a = mesh.vertices[mesh.boundary_edges[:, 0]]
    b = mesh.vertices[mesh.boundary_edges[:, 1]]
    lengths = np.linalg.norm(b - a, axis=1)
    if use_curved and mesh.curved_midpoints:
        gx, gw = np.polynomial.legendre.leggauss(5)
        s = 0.5 * (gx + 1.0)
        for k, (i, j) in enumerate(mesh.boundary_edges.tolist()):
            m = mesh.curved_midpoints.get((min(i, j), max(i, j)))
            if m is None:
                continue
            pa, pb, pm = a[k], b[k], np.asarray(m)
            d = (pa * (4 * s[:, None] - 3) + pm * (4 - 8 * s[:, None]) + pb * (4 * s[:, None] - 1))
            lengths[k] = 0.5 * float(np.dot(gw, np.linalg.norm(d, axis=1)))
    return {"area": area, "perimeter": float(lengths.sum())}


def write_mesh(mesh, path):
    """Write the line-based ``SLLMESH 1`` format (0-based indices)."""
    with open(path, "w") as fh:
        fh.write(MAGIC + "\n")
        fh.write(f"{mesh.nv} {mesh.nt} {len(mesh.boundary_edges)}\n")
        for x, y in mesh.vertices.tolist():
            fh.write(f"{x!r} {y!r}\n")
        for i, j, k in mesh.triangles.tolist():
            fh.write(f"{i} {j} {k}\n")
        for (i, j), tag in zip(mesh.boundary_edges.tolist(), mesh.boundary_tags.tolist()):
            fh.write(f"{i} {j} {tag}\n")
        fh.write(f"{len(mesh.curved_midpoints)}\n")
        for (i, j), m in sorted(mesh.curved_midpoints.items()):
            fh.write(f"{i} {j} {float(m[0])!r} {float(m[1])!r}\n")


def read_mesh(path, domain=None):
    """Read a mesh written by :func:`write_mesh`."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != MAGIC:
        raise ValueError(f"{path}: missing '{MAGIC}' header")
    nv, nt, nb = (int(v) for v in lines[1].split())
    pos = 2
    verts = np.array([[float(v) for v in lines[pos + i].split()] for i in range(nv)]).reshape(-1, 2)
    pos += nv
    tris = np.array([[int(v) for v in lines[pos + i].split()] for i in range(nt)], dtype=np.int64).reshape(-1, 3)
    pos += nt
    brows = [[int(v) for v in lines[pos + i].split()] for i in range(nb)]
    pos += nb
    bedges = np.array([r[:2] for r in brows], dtype=np.int64).reshape(-1, 2)
    btags = np.array([r[2] for r in brows], dtype=np.int64)
    curved = {}
    if pos < len(lines):
        nc = int(lines[pos])
        pos += 1
        for i in range(nc):
            a, b, mx, my = lines[pos + i].split()
            curved[(int(a), int(b))] = np.array([float(mx), float(my)])
    mesh = Mesh(verts, tris, bedges, btags, curved, domain)
    mesh.validate()
    return mesh
