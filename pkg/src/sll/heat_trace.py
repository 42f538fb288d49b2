"""Heat-trace asymptotics: closed-form coefficients, partition curves, fits.

For a spectrum ``{lam_k}`` on an n-dimensional domain,
``Z(t) = sum_k exp(-t lam_k) ~ c0 t^{-n/2} + c1 t^{(1-n)/2} + c2 t^{(2-n)/2}``
as ``t -> 0+``. :func:`theoretical_coefficients` returns ``c0, c1, c2``
with the geometry already multiplied in, keyed by the power of ``t``.
"""
from dataclasses import dataclass, field
import math

import numpy as np

OPERATORS = ("lame", "stokes", "laplace_vec", "buckling_2d", "laplace_scalar")


class IllConditionedFit(ValueError):
    def __init__(self, cond):
        super().__init__(f"design matrix too ill-conditioned (cond ~ {cond:.2e}); widen the t-window")
        self.cond = cond


@dataclass
class AsymptoticModel:
    n: int
    coefficients: dict
    provenance: str = "theoretical"
    geometry: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    @property
    def powers(self):
        return sorted(self.coefficients)

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        return sum(c * t ** p for p, c in self.coefficients.items())

    def term(self, power, t):
        return self.coefficients[power] * np.asarray(t, dtype=float) ** power


@dataclass
class PartitionCurve:
    t: np.ndarray
    Z: np.ndarray
    tail_bound: np.ndarray

    def is_strictly_decreasing(self):
        return bool(np.all(np.diff(self.Z) < 0))

    def log_convexity_defect(self):
        """Most negative second difference of log Z against log-spaced or uniform t (>= 0 is convex)."""
        if len(self.t) < 3:
            return 0.0
        lz = np.log(self.Z)
        t = self.t
        # divided second differences handle non-uniform grids
        d1 = np.diff(lz) / np.diff(t)
        d2 = np.diff(d1) / (0.5 * (t[2:] - t[:-2]))
        return float(d2.min())


def _interior_angles(pts):
    """Interior angles of a counterclockwise polygon (pi minus the signed turn)."""
    pts = np.asarray(pts, dtype=float)
    d_in = pts - np.roll(pts, 1, axis=0)
    d_out = np.roll(pts, -1, axis=0) - pts
    cross = d_in[:, 0] * d_out[:, 1] - d_in[:, 1] * d_out[:, 0]
    return math.pi - np.arctan2(cross, (d_in * d_out).sum(axis=1))


def geometry_of(domain, volume=None, boundary_volume=None):
    """Geometry inputs for a flat 2D domain (scalar curvature integral is 0).

    Polygonal domains also carry ``corner_angles`` (interior angles).
    """
    geom = {"volume": domain.analytic_area if volume is None else volume,
            "boundary_volume": domain.analytic_perimeter if boundary_volume is None else boundary_volume,
            "scalar_curvature_integral": 0.0,
            "mean_curvature_integral": domain.boundary_curvature_integral}
    if domain.kind == "unit_square":
        geom["corner_angles"] = [math.pi / 2] * 4
    elif domain.kind == "polygon":
        geom["corner_angles"] = _interior_angles(domain.vertices).tolist()
    return geom


def _powers(n):
    return (-n / 2.0, (1.0 - n) / 2.0, (2.0 - n) / 2.0)


def theoretical_coefficients(operator, bc, lam, mu, n, geom):
    """Closed-form heat-trace coefficients times geometry.

    Parameters
    ----------
    operator : {"lame", "stokes", "laplace_vec", "buckling_2d", "laplace_scalar"}
    bc : "dirichlet" or "traction_or_cauchy" (also accepts "traction", "cauchy",
        "neumann"); selects the sign of the boundary term.
    lam, mu : Lame parameters (lam is used only by "lame").
    n : spatial dimension (buckling_2d requires 2).
    geom : dict with volume, boundary_volume, scalar_curvature_integral,
        mean_curvature_integral.
    """
    if operator not in OPERATORS:
        raise ValueError(f"unknown operator {operator!r}")
    if mu <= 0:
        raise ValueError("mu must be positive")
    if n < 2:
        raise ValueError("n must be at least 2")
    if operator == "lame" and lam + 2 * mu <= 0:
        raise ValueError("lambda + 2 mu must be positive")
    if operator == "buckling_2d" and n != 2:
        raise ValueError("buckling formula is two-dimensional")
    dirichlet = bc == "dirichlet"
    if not dirichlet and bc not in ("traction_or_cauchy", "traction", "cauchy", "cauchy_force", "neumann"):
        raise ValueError(f"unknown boundary condition {bc!r}")
    sgn = -1.0 if dirichlet else 1.0
    V = geom["volume"]
    S = geom["boundary_volume"]
    R = geom.get("scalar_curvature_integral", 0.0)
    H = geom.get("mean_curvature_integral", 0.0)
    fp = 4.0 * math.pi
    pre2 = 1.0 / (6.0 * fp ** (n / 2.0))
    e0, e1, e2 = n / 2.0, (n - 1) / 2.0, (n - 2) / 2.0

    if operator == "lame":
        nu = lam + 2 * mu
        a0 = (n - 1) / (fp * mu) ** e0 + 1.0 / (fp * nu) ** e0
        a1 = sgn * 0.25 * ((n - 1) / (fp * mu) ** e1 + 1.0 / (fp * nu) ** e1)
        base = 1.0 / nu ** e2 + (n - 7) / mu ** e2
        a2 = pre2 * ((base + (12.0 * mu / n) * (1.0 / nu ** e0 + (n - 1) / mu ** e0)) * R + 2.0 * base * H)
    elif operator == "stokes":
        beta = 1.0 if n == 2 else 0.0
        a0 = (n - 1) / (fp * mu) ** e0
        a1 = sgn * (n - 1) / (4.0 * (fp * mu) ** e1)
        base = beta + (n - 7) / mu ** e2
        a2 = pre2 * ((base + 12.0 * (n - 1) / (n * mu ** e2)) * R + 2.0 * base * H)
    elif operator == "laplace_vec":
        a0 = n / (fp * mu) ** e0
        a1 = sgn * n / (4.0 * (fp * mu) ** e1)
        a2 = pre2 * ((n + 6) / mu ** e2 * R + 2.0 * (n - 6) / mu ** e2 * H)
    elif operator == "laplace_scalar":
        a0 = 1.0 / (fp * mu) ** e0
        a1 = sgn / (4.0 * (fp * mu) ** e1)
        corners = geom.get("corner_angles")
        if n == 2 and corners:
            # straight edges carry no curvature; each corner contributes (pi^2 - a^2) / (24 pi a)
            a2 = pre2 * R + sum((math.pi ** 2 - a * a) / (24.0 * math.pi * a) for a in corners)
        else:
            a2 = pre2 * (R + 2.0 * H) / mu ** e2
    else:  # buckling_2d
        a0 = 1.0 / (fp * mu)
        a1 = sgn / (4.0 * math.sqrt(fp * mu))
        a2 = -1.0 - H / (3.0 * math.pi)
        p0, p1, p2 = _powers(2)
        return AsymptoticModel(2, {p0: a0 * V, p1: a1 * S, p2: a2}, "theoretical", dict(geom),
                               {"operator": operator, "bc": bc, "mu": mu})
    p0, p1, p2 = _powers(n)
    return AsymptoticModel(n, {p0: a0 * V, p1: a1 * S, p2: a2}, "theoretical", dict(geom),
                           {"operator": operator, "bc": bc, "lambda": lam, "mu": mu})


def partition_function(spectrum, t_grid, leading=None):
    """``Z(t) = sum exp(-t lam_k)`` with a Weyl-type truncation estimate.

    ``tail_bound(t) = (C_W / t) exp(-t lam_N)``; ``C_W`` is ``leading`` (the
    theoretical t^{-1} coefficient) when given, otherwise ``N / lam_N``.
    """
    lam = np.sort(np.asarray(spectrum, dtype=float))
    if len(lam) == 0:
        raise ValueError("empty spectrum")
    t = np.asarray(t_grid, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t values must be positive")
    Z = np.array([np.exp(-ti * lam).sum() for ti in t])
    lam_n = lam[-1]
    cw = leading if leading is not None else (len(lam) / lam_n if lam_n > 0 else 0.0)
    tail = np.abs(cw) / t * np.exp(-t * lam_n)
    return PartitionCurve(t, Z, tail)


def fit_asymptotics(curve, powers=(-1.0, -0.5, 0.0), cond_limit=1e12):
    """Weighted least squares of Z(t) on ``t^p`` (weights 1/Z^2)."""
    t, Z = curve.t, curve.Z
    X = np.column_stack([t ** p for p in powers]) / Z[:, None]
    y = np.ones_like(Z)
    scale = np.linalg.norm(X, axis=0)
    Xs = X / scale
    cond = np.linalg.cond(Xs)
    if not np.isfinite(cond) or cond > cond_limit or len(t) < len(powers):
        raise IllConditionedFit(float(cond))
    coef, *_ = np.linalg.lstsq(Xs, y, rcond=None)
    coef = coef / scale
    resid = float(np.sqrt(np.mean((X @ coef - y) ** 2)))
    return AsymptoticModel(2, {float(p): float(c) for p, c in zip(powers, coef)}, "fitted", {},
                           {"residual": resid, "cond": float(cond), "t_min": float(t.min()), "t_max": float(t.max())})


def compare(fitted, theoretical):
    """Per-power relative error (absolute where the theoretical value is below 1e-12)."""
    if set(fitted.coefficients) != set(theoretical.coefficients):
        raise ValueError("models have different powers")
    out = {}
    for p in theoretical.powers:
        f, th = fitted.coefficients[p], theoretical.coefficients[p]
        out[p] = abs(f - th) if abs(th) < 1e-12 else abs(f - th) / abs(th)
    return out


def auto_window(spectrum, model, tail_rtol=1e-3, term_ratio=0.1, npts=40, min_span=4.0):
    """Choose ``[t_min, t_max]`` for fitting.

    ``t_min``: smallest t with tail_bound < tail_rtol * Z. ``t_max``: the t^0
    model term stays below ``term_ratio`` of the t^{-1/2} term. The window
    is widened to ``t_max >= min_span * t_min`` so the fit stays solvable.
    """
    lam = np.sort(np.asarray(spectrum, dtype=float))
    lam_n = lam[-1]
    lead = model.coefficients[-1.0]
    probe = np.geomspace(1e-3 / lam_n, 1e3 / max(lam_n, 1e-300), 4000)
    curve = partition_function(lam, probe, leading=lead)
    ok = curve.tail_bound < tail_rtol * curve.Z
    t_min = float(probe[np.argmax(ok)]) if ok.any() else float(probe[-1])
    c1, c2 = abs(model.coefficients[-0.5]), abs(model.coefficients[0.0])
    t_max = (term_ratio * c1 / c2) ** 2 if c2 > 0 else 100.0 * t_min
    widened = t_max < min_span * t_min
    if widened:
        t_max = min_span * t_min
    return {"t_min": t_min, "t_max": float(t_max), "widened": bool(widened),
            "t_grid": np.geomspace(t_min, t_max, npts)}


def write_fit_csv(path, fitted, theoretical):
    errs = compare(fitted, theoretical)
    with open(path, "w") as fh:
        fh.write("power,fitted,theoretical,rel_error\n")
        for p in theoretical.powers:
            fh.write(f"{p!r},{fitted.coefficients[p]:.17g},{theoretical.coefficients[p]:.17g},{errs[p]:.17g}\n")


def write_zt(path, curve):
    """Gnuplot-ready two-column ``t Z(t)`` file."""
    with open(path, "w") as fh:
        fh.write("# t Z(t)\n")
        for t, z in zip(curve.t, curve.Z):
            fh.write(f"{t:.17g} {z:.17g}\n")
