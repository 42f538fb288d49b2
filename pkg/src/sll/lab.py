"""Problem catalog and verification experiments.

Every operator is reduced to one of three discrete shapes:

* ``standard``: a pencil ``A x = lam M x`` on the free dofs;
* ``saddle``: Taylor-Hood Stokes, ``A u + B^T p = lam M u, B u = 0``;
* ``penalty``: the projected-divergence Lame form, ``B u = C p`` with
  ``C = Mp / lambda``.

The shift is chosen by inertia: starting from 0 (or ``-0.1 mu`` when a
kernel is expected) it is lowered until ``A - sigma M`` has no negative
pivots, so the eigenvalues nearest the shift are the lowest ones.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
import math
import time

import numpy as np
import scipy.sparse as sp

from . import assembly, eigen
from .mesh import DomainSpec, generate_mesh, refine_uniform

OPERATORS = {
    "lame_dirichlet": "DL",
    "lame_traction": "TL",
    "stokes_dirichlet": "DS",
    "stokes_cauchy": "CS",
    "laplace_vec_dirichlet": "DB",
    "laplace_vec_traction": "TB",
    "scalar_dirichlet": "Xi",
    "scalar_neumann": "Theta",
    "buckling_dirichlet": "LambdaD",
    "clamped_plate": "Gamma",
}
ALIASES = {v.lower(): k for k, v in OPERATORS.items()}
KERNEL_DIM = {"lame_traction": 3, "stokes_cauchy": 3, "scalar_neumann": 1}
BASE_H = {"unit_square": 0.25, "unit_disk": 0.25, "annulus": 0.25, "polygon": 0.25}
NONZERO_FLOOR = 1e-6  # values below this times mu are never taken as "first nonzero"


def canonical_operator(name):
    key = name.lower()
    if key in OPERATORS:
        return key
    if key in ALIASES:
        return ALIASES[key]
    raise ValueError(f"unknown operator {name!r}; choose from {sorted(OPERATORS)}")


@dataclass(frozen=True)
class ProblemSpec:
    operator: str
    domain: DomainSpec
    mu: float = 1.0
    lam: float = 0.0
    level: int = 0
    count: int = 6
    h0: float = None
    projected_div: str = "auto"

    def __post_init__(self):
        object.__setattr__(self, "operator", canonical_operator(self.operator))
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.operator in ("lame_dirichlet", "lame_traction") and self.lam + 2 * self.mu <= 0:
            raise ValueError("lambda + 2 mu must be positive")
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.projected_div not in ("auto", "on", "off"):
            raise ValueError("projected_div must be auto, on or off")

    @property
    def base_h(self):
        return self.h0 if self.h0 is not None else BASE_H[self.domain.kind]

    @property
    def h(self):
        return self.base_h / 2 ** self.level

    def uses_projected_div(self):
        if self.operator not in ("lame_dirichlet", "lame_traction"):
            return False
        if self.projected_div == "on":
            return True
        if self.projected_div == "off":
            return False
        return self.lam > assembly.PROJECTED_DIV_RATIO * self.mu


@dataclass
class SpectrumResult:
    spec: ProblemSpec
    eigenvalues: np.ndarray
    multiplicity_groups: list
    residuals: np.ndarray
    mesh_h: float
    wall_time: float
    zero_modes: int = 0
    raw_eigenvalues: np.ndarray = None
    flags: list = field(default_factory=list)
    info: dict = field(default_factory=dict)


@lru_cache(maxsize=32)
def mesh_at(domain, level, h0):
    """Base mesh at ``h0`` refined ``level`` times (cached)."""
    if level == 0:
        return generate_mesh(domain, h0)
    return refine_uniform(mesh_at(domain, level - 1, h0))


def _problem_mesh(spec):
    return mesh_at(spec.domain, spec.level, spec.base_h)


def discretize(spec):
    """Assemble ``spec`` and return its discrete shape.

    Returns a dict with ``kind`` in {standard, saddle, penalty} and the
    reduced matrices ``A, M`` (plus ``B, C`` for constrained kinds),
    ``kernel_expected`` and ``transform`` (applied to the raw eigenvalues).
    """
    mesh = _problem_mesh(spec)
    op, mu, lam = spec.operator, spec.mu, spec.lam
    out = {"kind": "standard", "B": None, "C": None, "kernel_expected": op in KERNEL_DIM,
           "transform": None, "mesh": mesh}
    if op in ("lame_dirichlet", "lame_traction"):
        bc = "dirichlet" if op == "lame_dirichlet" else "traction"
        proj = spec.uses_projected_div()
        S = assembly.assemble_lame(mesh, lam, mu, bc, projected_div=proj)
        A, M, B = S.reduced()
        out.update(A=A, M=M)
        if proj:
            out.update(kind="penalty", B=B, C=(S.pressure_mass / lam).tocsr())
    elif op in ("laplace_vec_dirichlet", "laplace_vec_traction"):
        S = assembly.assemble_laplace_vector(mesh, mu, "dirichlet" if op.endswith("dirichlet") else "traction")
        A, M, _ = S.reduced()
        out.update(A=A, M=M)
        out["kernel_expected"] = op.endswith("traction")
    elif op in ("scalar_dirichlet", "scalar_neumann"):
        S = assembly.assemble_scalar_laplace(mesh, mu, "dirichlet" if op.endswith("dirichlet") else "neumann", "P2")
        A, M, _ = S.reduced()
        out.update(A=A, M=M)
    elif op in ("stokes_dirichlet", "stokes_cauchy"):
        S = assembly.assemble_stokes_taylor_hood(mesh, mu, "dirichlet" if op == "stokes_dirichlet" else "cauchy_force")
        A, M, B = S.reduced()
        if op == "stokes_dirichlet":
            B = B[1:]  # constant pressure is in ker B^T; its row is redundant
        out.update(kind="saddle", A=A, M=M, B=B)
    elif op in ("buckling_dirichlet", "clamped_plate"):
        P = assembly.assemble_biharmonic_morley(mesh)
        mask = np.ones(P["bending"].shape[0], dtype=bool)
        mask[P["boundary_constrained_dofs"]] = False
        f = np.flatnonzero(mask)
        bend = P["bending"][f][:, f].tocsr()
        if op == "buckling_dirichlet":
            out.update(A=(mu * bend).tocsr(), M=P["geometric"][f][:, f].tocsr())
        else:
            out.update(A=(mu * mu * bend).tocsr(), M=P["mass"][f][:, f].tocsr(),
                       transform=lambda v: np.sqrt(np.maximum(v, 0.0)))
    else:  # pragma: no cover - canonical_operator guards this
        raise ValueError(op)
    return out


def _choose_sigma(d, mu):
    """Shift with no eigenvalue below it, found by inertia counting."""
    A, M = d["A"], d["M"]
    sigma = -0.1 * mu if d["kernel_expected"] else 0.0
    if d["kind"] != "standard":
        return sigma
    for _ in range(60):
        try:
            if eigen.count_below(A, M, sigma) == 0:
                return sigma
        except eigen.SingularFactorError:
            pass
        sigma = 4.0 * sigma if sigma < 0 else -0.1 * mu
    raise eigen.FactorizationError("could not place a shift below the spectrum")


def _snap_zeros(vals, mu):
    """Count numerically zero values and set them to exactly 0."""
    mags = np.abs(vals)
    floor = NONZERO_FLOOR * mu
    nonzero = mags[mags > floor]
    if len(nonzero) == 0:
        zero = np.ones(len(vals), dtype=bool)
    else:
        zero = mags <= eigen.ZERO_RTOL * nonzero.min()
    out = vals.copy()
    out[zero] = 0.0
    return out, int(zero.sum())


def _package(spec, res, d, t0, method):
    vals = np.asarray(res.eigenvalues, dtype=float)
    raw = vals.copy()
    if d["transform"] is not None:
        vals = d["transform"](vals)
    vals, nz = _snap_zeros(vals, spec.mu)
    flags = list(res.flags)
    info = dict(res.info)
    info.update(method=method, ndof=int(d["A"].shape[0]), sigma=res.sigma, iterations=res.iterations)
    if info.get("pivot_ratio", 0) and info["pivot_ratio"] > 1e14:
        flags.append("ill_conditioned")
    return SpectrumResult(spec, vals, eigen.group_multiplicities(vals), np.asarray(res.residual_norms),
                          d["mesh"].h_max, time.perf_counter() - t0, nz, raw, flags, info)


def compute_spectrum(spec, tol=eigen.DEFAULT_TOL, seed=None):
    """Lowest ``spec.count`` eigenvalues of the catalog problem ``spec``."""
    t0 = time.perf_counter()
    d = discretize(spec)
    sigma = _choose_sigma(d, spec.mu)
    k = min(spec.count, d["A"].shape[0])
    if d["kind"] == "standard":
        res = eigen.solve_shift_invert_lanczos(d["A"], d["M"], sigma, k, tol, seed, vectors=False)
    else:
        res = eigen.solve_saddle_point_eig(d["A"], d["B"], d["M"], sigma, k, tol, seed,
                                           penalty_block=d["C"], vectors=False)
    if k < spec.count:
        res.flags.append("truncated")
    return _package(spec, res, d, t0, "lanczos")


def dense_spectrum(spec, k=None):
    """Dense reference solve of ``spec`` (reduced dimension at most 4000)."""
    t0 = time.perf_counter()
    d = discretize(spec)
    n = d["A"].shape[0]
    if n > 4000:
        raise ValueError(f"reduced dimension {n} exceeds the dense limit 4000")
    k = spec.count if k is None else k
    if d["kind"] == "standard":
        res = eigen.solve_dense_sym_generalized(d["A"], d["M"], k)
    else:
        res = eigen.solve_nullspace_dense(d["A"], d["B"], d["M"], k, penalty_block=d["C"])
    res.sigma = None
    return _package(spec, res, d, t0, "dense")


# ------------------------------------------------------------------ job pool

def _spectrum_job(spec):
    return compute_spectrum(spec)


def run_spectra(specs, workers=1):
    """Compute many spectra; results come back in input order."""
    specs = list(specs)
    if workers <= 1 or len(specs) <= 1:
        return [compute_spectrum(s) for s in specs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_spectrum_job, specs))


# ------------------------------------------------------------------ experiments

def extrapolate_mesh(results):
    """Richardson extrapolation of three successive levels, index by index.

    Parameters
    ----------
    results : sequence of three SpectrumResult (or arrays), coarse to fine.

    Returns
    -------
    dict with ``values``, ``order`` (NaN where skipped) and ``flags``
    (``"ok"``, ``"non_monotone"`` or ``"degenerate"`` per index).
    """
    arrs = [np.asarray(r.eigenvalues if hasattr(r, "eigenvalues") else r, dtype=float) for r in results]
    if len(arrs) != 3:
        raise ValueError("extrapolation needs exactly three levels")
    n = min(len(a) for a in arrs)
    l0, l1, l2 = (a[:n] for a in arrs)
    d1, d2 = l0 - l1, l1 - l2
    values = l2.copy()
    order = np.full(n, np.nan)
    flags = []
    for i in range(n):
        scale = max(abs(l2[i]), 1e-300)
        if abs(d1[i]) <= 1e-14 * scale or abs(d2[i]) <= 1e-14 * scale:
            flags.append("degenerate")
            continue
        if d1[i] * d2[i] <= 0 or abs(d2[i]) >= abs(d1[i]):
            flags.append("non_monotone")
            continue
        p = min(max(math.log2(d1[i] / d2[i]), 1.0), 6.0)
        order[i] = p
        values[i] = l2[i] + (l2[i] - l1[i]) / (2.0 ** p - 1.0)
        flags.append("ok")
    return {"values": values, "order": order, "flags": flags}


def level_series(spec, levels, workers=1):
    """Spectra of ``spec`` at each refinement level in ``levels``."""
    return run_spectra([replace(spec, level=l) for l in levels], workers)


def extrapolated(spec, levels, workers=1):
    res = level_series(spec, levels, workers)
    ext = extrapolate_mesh(res[-3:])
    return ext, res


def lambda_sweep(domain, mu, lambda_grid, k, level=1, h0=None, projected_div="auto", workers=1,
                 bcs=("dirichlet", "traction")):
    """tau_k(lambda) for both boundary conditions on one fixed mesh.

    One formulation is used for the whole grid: with ``auto`` the projected
    divergence form is chosen only when every grid value exceeds the
    switch-over ratio, so the rows stay comparable.
    """
    grid = [float(x) for x in lambda_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("lambda grid must be strictly ascending")
    if any(l + 2 * mu <= 0 for l in grid):
        raise ValueError("lambda grid must lie in (-2 mu, inf)")
    if projected_div == "auto":
        mode = "on" if all(l > assembly.PROJECTED_DIV_RATIO * mu for l in grid) else "off"
    else:
        mode = projected_div
    specs = []
    for lam in grid:
        for bc in bcs:
            specs.append(ProblemSpec("lame_" + bc, domain, mu, lam, level, k, h0, mode))
    results = run_spectra(specs, workers)
    table = {}
    for s, r in zip(specs, results):
        table.setdefault(s.lam, {})[s.operator.split("_")[1]] = r
    return table


def check_monotone(table, k, slack=1e-9):
    """Rows ``(bc, lam1, lam2, index, tau1, tau2, ok)`` for consecutive grid pairs."""
    rows = []
    lams = sorted(table)
    for bc in ("dirichlet", "traction"):
        for a, b in zip(lams, lams[1:]):
            if bc not in table[a]:
                continue
            t1, t2 = table[a][bc].eigenvalues, table[b][bc].eigenvalues
            for i in range(min(k, len(t1), len(t2))):
                ok = t1[i] <= t2[i] + slack * abs(t2[i])
                rows.append((bc, a, b, i + 1, float(t1[i]), float(t2[i]), bool(ok)))
    return rows


def stokes_via_penalty(domain, mu, lambda_pen, k, richardson=True, level=1, h0=None, bc="dirichlet"):
    """Stokes eigenvalue estimates from the projected-divergence Lame form.

    Solves at ``lambda_pen`` (and ``2 lambda_pen`` with Richardson) and
    extrapolates linearly in ``eps = 1 / (lambda + mu)`` to ``eps = 0``.
    ``bc="traction"`` gives the Cauchy-force Stokes estimates.
    """
    if lambda_pen < 10 * mu:
        raise ValueError("penalty parameter must be at least 10 mu")
    op = "lame_dirichlet" if bc == "dirichlet" else "lame_traction"
    lams = [lambda_pen, 2 * lambda_pen] if richardson else [lambda_pen]
    res = [compute_spectrum(ProblemSpec(op, domain, mu, l, level, k, h0, "on")) for l in lams]
    out = {"lambdas": lams, "raw": [r.eigenvalues for r in res],
           "flags": sorted({f for r in res for f in r.flags}),
           "pivot_ratio": max(r.info.get("pivot_ratio", 0.0) for r in res)}
    if richardson:
        e1, e2 = 1.0 / (lams[0] + mu), 1.0 / (lams[1] + mu)
        t1, t2 = res[0].eigenvalues, res[1].eigenvalues
        out["estimate"] = t2 + (t2 - t1) * e2 / (e1 - e2)
    else:
        out["estimate"] = res[0].eigenvalues
    return out


def _spec(op, domain, mu, k, h0, lam=0.0, level=0):
    return ProblemSpec(op, domain, mu, lam, level, k, h0, "off")


def verify_sandwich(domain, mu, lambda_grid, k, levels=(1, 2, 3), h0=None, slack=1e-3, workers=1,
                    bcs=("dirichlet", "traction")):
    """theta_k <= tau_k(lambda) <= varsigma_k on extrapolated values, for each boundary condition in ``bcs``."""
    levels = list(levels)
    jobs = {}
    if "dirichlet" in bcs:
        jobs["theta_D"] = _spec("laplace_vec_dirichlet", domain, mu, k, h0)
        jobs["sigma_D"] = _spec("stokes_dirichlet", domain, mu, k, h0)
        for lam in lambda_grid:
            jobs[("tau_D", lam)] = _spec("lame_dirichlet", domain, mu, k, h0, lam)
    if "traction" in bcs:
        jobs["sigma_C"] = _spec("stokes_cauchy", domain, mu, k, h0)
        for lam in lambda_grid:
            jobs[("tau_T", lam)] = _spec("lame_traction", domain, mu, k, h0, lam)
    keys = list(jobs)
    flat = [replace(jobs[key], level=l) for key in keys for l in levels]
    res = run_spectra(flat, workers)
    ext = {}
    for i, key in enumerate(keys):
        ext[key] = extrapolate_mesh(res[i * len(levels):(i + 1) * len(levels)][-3:])["values"]
    rows = []
    for lam in lambda_grid:
        for i in range(k):
            if "dirichlet" in bcs:
                lo, mid, hi = ext["theta_D"][i], ext[("tau_D", lam)][i], ext["sigma_D"][i]
                left = (mid - lo) / abs(mid)
                right = (hi - mid) / abs(hi)
                rows.append({"bc": "dirichlet", "lambda": lam, "k": i + 1, "lower": lo, "value": mid, "upper": hi,
                             "left_margin": left, "right_margin": right,
                             "pass": bool(left >= -slack and right >= -slack)})
            if "traction" not in bcs:
                continue
            mid, hi = ext[("tau_T", lam)][i], ext["sigma_C"][i]
            right = (hi - mid) / max(abs(hi), 1e-300) if hi != 0 else -mid
            rows.append({"bc": "traction", "lambda": lam, "k": i + 1, "lower": 0.0, "value": mid, "upper": hi,
                         "left_margin": mid, "right_margin": right,
                         "pass": bool(mid >= -slack * max(abs(hi), 1.0) and right >= -slack)})
    return rows


def verify_buckling_stokes_identity(domain, mu, k, levels=(1, 2, 3), h0=None, workers=1):
    """Compare Morley buckling and Taylor-Hood Stokes spectra level by level and extrapolated."""
    if not domain.simply_connected:
        raise ValueError("the stream-function route needs a simply connected domain")
    levels = list(levels)
    flat = [_spec(op, domain, mu, k, h0, level=l) for op in ("buckling_dirichlet", "stokes_dirichlet") for l in levels]
    res = run_spectra(flat, workers)
    buck, stokes = res[: len(levels)], res[len(levels):]
    gaps = [float(np.max(np.abs(b.eigenvalues[:k] - s.eigenvalues[:k]) / s.eigenvalues[:k]))
            for b, s in zip(buck, stokes)]
    eb = extrapolate_mesh(buck[-3:])
    es = extrapolate_mesh(stokes[-3:])
    rel = np.abs(eb["values"][:k] - es["values"][:k]) / es["values"][:k]
    return {"buckling": eb["values"][:k], "stokes": es["values"][:k], "relative_gap": rel,
            "max_gap": float(rel.max()), "level_gaps": gaps,
            "buckling_order": eb["order"], "stokes_order": es["order"]}


def verify_chain_inequalities(domain, mu, k, levels=(1, 2, 3), h0=None, slack=1e-3, workers=1):
    """Theta_k < Xi_k < Gamma_k < Lambda_k on extrapolated values."""
    levels = list(levels)
    names = ("scalar_neumann", "scalar_dirichlet", "clamped_plate", "buckling_dirichlet")
    flat = [_spec(op, domain, mu, k, h0, level=l) for op in names for l in levels]
    res = run_spectra(flat, workers)
    ext = {}
    for i, op in enumerate(names):
        ext[op] = extrapolate_mesh(res[i * len(levels):(i + 1) * len(levels)][-3:])["values"][:k]
    rows = []
    for i in range(k):
        seq = [ext[op][i] for op in names]
        margins = [(b - a) / abs(b) for a, b in zip(seq, seq[1:])]
        rows.append({"k": i + 1, "Theta": seq[0], "Xi": seq[1], "Gamma": seq[2], "Lambda": seq[3],
                     "margins": margins, "pass": bool(all(m > -slack for m in margins))})
    return rows
