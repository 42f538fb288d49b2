"""The acceptance suite: eleven numbered checks, each filling report rows.

``run_suite(fast=True)`` swaps in coarser meshes and smaller counts so the
whole suite runs in about a minute; the default settings are the ones the
tolerances are stated for.
"""
import math
import time

import numpy as np

from . import assembly, eigen, heat_trace as ht, lab, oracles
from .mesh import DomainSpec, Mesh
from .report import ExperimentReport

SQUARE = DomainSpec.unit_square()
DISK = DomainSpec.unit_disk()
L_SHAPE = DomainSpec.polygon([(0, 0), (1, 0), (1, 0.5), (0.5, 0.5), (0.5, 1), (0, 1)])
MONOTONE_GRID = (-1.5, -1.0, -0.5, 0.0, 1.0, 10.0, 100.0, 1e4)
SANDWICH_GRID = (-0.9, 0.0, 1.0, 10.0)


def _rel(a, b):
    return abs(a - b) / abs(b) if b != 0 else abs(a - b)


def _name(domain):
    return {"unit_square": "square", "unit_disk": "disk"}.get(domain.kind, domain.label)


# ------------------------------------------------------------------ 1

def _hand_p1(rep):
    """Single-triangle P1 matrices against hand-computed values."""
    cases = {
        "reference": np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
        "scaled": np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]]),
    }
    K_ref = 0.5 * np.array([[2.0, -1.0, -1.0], [-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])
    M_ref = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 24.0
    for name, V in cases.items():
        area = 0.5 * abs(np.linalg.det(V[1:] - V[0]))
        mesh = Mesh(V, np.array([[0, 1, 2]]), np.array([[0, 1], [1, 2], [2, 0]]), np.zeros(3, np.int64))
        sysm = assembly.assemble_scalar_laplace(mesh, 1.0, "neumann", "P1")
        K = sysm.stiffness.toarray()
        M = sysm.mass.toarray()
        # stiffness is scale invariant in 2D, mass scales with area
        rep.add("1:p1_stiffness", name, np.abs(K).max(), np.abs(K_ref).max(), np.abs(K - K_ref).max(), 1e-12)
        rep.add("1:p1_mass", name, np.abs(M).max(), np.abs(M_ref * area / 0.5).max(),
                np.abs(M - M_ref * area / 0.5).max(), 1e-12)


def criterion_1(rep, fast=False, workers=1):
    _hand_p1(rep)
    k = 10
    pencils = [
        lab.ProblemSpec("scalar_dirichlet", SQUARE, 1.0, 0.0, 1 if fast else 2, k),
        lab.ProblemSpec("lame_dirichlet", SQUARE, 1.0, 1.0, 1 if fast else 2, k),
        lab.ProblemSpec("lame_traction", DISK, 1.0, -0.5, 0, k),
        lab.ProblemSpec("stokes_dirichlet", SQUARE, 1.0, 0.0, 1, k),
        lab.ProblemSpec("stokes_cauchy", DISK, 1.0, 0.0, 0, k),
        lab.ProblemSpec("buckling_dirichlet", DISK, 1.0, 0.0, 1, k),
        lab.ProblemSpec("clamped_plate", SQUARE, 1.0, 0.0, 1 if fast else 2, k),
    ]
    for spec in pencils:
        t0 = time.perf_counter()
        it = lab.compute_spectrum(spec)
        dn = lab.dense_spectrum(spec, k)
        a, b = it.eigenvalues[:k], dn.eigenvalues[:k]
        scale = np.maximum(np.abs(b), spec.mu)
        err = float(np.max(np.abs(a - b) / scale))
        ndof = it.info["ndof"]
        if ndof > 2000:
            raise ValueError(f"pencil {spec.operator} has dimension {ndof} > 2000")
        rep.add("1:dense_vs_lanczos", f"{spec.operator} {_name(spec.domain)} level={spec.level} lambda={spec.lam} "
                f"dim={ndof} k={k}", a[-1], b[-1], err, 1e-8, time.perf_counter() - t0)


# ------------------------------------------------------------------ 2

def criterion_2(rep, fast=False, workers=1):
    levels = (0, 1, 2) if fast else (1, 2, 3)
    k = 10
    t0 = time.perf_counter()
    ext, _ = lab.extrapolated(lab.ProblemSpec("scalar_dirichlet", SQUARE, 1.0, 0.0, 0, k), levels, workers)
    ref = oracles.square_laplace_spectrum("dirichlet", 1.0, k)
    wall = time.perf_counter() - t0
    for i in range(k):
        rep.check("2:square_dirichlet", f"P2 levels={levels} k={i + 1}", ext["values"][i], ref[i], 5e-3, wall)

    t0 = time.perf_counter()
    ext, res = lab.extrapolated(lab.ProblemSpec("scalar_dirichlet", DISK, 1.0, 0.0, 0, k), levels, workers)
    ref = oracles.disk_spectra("laplace_dirichlet", 1.0, k)
    wall = time.perf_counter() - t0
    for i in range(k):
        rep.check("2:disk_dirichlet", f"P2 levels={levels} k={i + 1}", ext["values"][i], ref[i], 1e-2, wall)
    groups = [count for _, count in eigen.group_multiplicities(res[-1].eigenvalues[:k])]
    expected = [row[3] for row in oracles.disk_spectrum_table("laplace_dirichlet", 1.0, k)]
    mismatch = sum(a != b for a, b in zip(groups, expected)) + abs(len(groups) - len(expected))
    rep.add("2:disk_multiplicities", f"groups={groups} expected={expected}", len(groups), len(expected),
            mismatch, 0)


# ------------------------------------------------------------------ 3

def criterion_3(rep, fast=False, workers=1, k=10, domains=(SQUARE, DISK), mu=1.0, grid=None, level=None,
                projected_div="auto"):
    level = (0 if fast else 1) if level is None else level
    grid = [g * mu for g in MONOTONE_GRID] if grid is None else grid
    for dom in domains:
        t0 = time.perf_counter()
        table = lab.lambda_sweep(dom, mu, grid, k, level=level, projected_div=projected_div, workers=workers)
        wall = time.perf_counter() - t0
        for bc, l1, l2, i, t1, t2, _ in lab.check_monotone(table, k):
            err = (t1 - t2) / abs(t2) if t2 != 0 else t1 - t2
            rep.add("3:monotone", f"{_name(dom)} {bc} level={level} lambda={l1:g}->{l2:g} k={i}", t2, t1,
                    err, 1e-9, wall)


# ------------------------------------------------------------------ 4

def criterion_4(rep, fast=False, workers=1):
    mu, k = 1.0, 5
    level = 0 if fast else 1
    t0 = time.perf_counter()
    stokes = lab.compute_spectrum(lab.ProblemSpec("stokes_dirichlet", SQUARE, mu, 0.0, level, k)).eigenvalues
    pen = lab.stokes_via_penalty(SQUARE, mu, 1e3 * mu, k, level=level)
    t1, t2 = pen["raw"]
    wall = time.perf_counter() - t0
    for i in range(k):
        ratio = (t1[i] - stokes[i]) / (t2[i] - stokes[i])
        rep.add("4:penalty_rate", f"square level={level} lambda=1e3->2e3 k={i + 1}", ratio, 2.0,
                abs(ratio - 2.0), 0.3, wall)
    for i in range(k):
        rep.check("4:richardson_eps", f"square level={level} k={i + 1}", pen["estimate"][i], stokes[i], 5e-3, wall)
    t0 = time.perf_counter()
    lam = -mu + 1e-4 * mu
    tau = lab.compute_spectrum(lab.ProblemSpec("lame_dirichlet", SQUARE, mu, lam, level, k, None, "off")).eigenvalues
    theta = lab.compute_spectrum(lab.ProblemSpec("laplace_vec_dirichlet", SQUARE, mu, 0.0, level, k)).eigenvalues
    wall = time.perf_counter() - t0
    for i in range(k):
        rep.check("4:lower_limit", f"square level={level} lambda=-mu+1e-4 k={i + 1}", tau[i], theta[i], 1e-2, wall)


# ------------------------------------------------------------------ 5

def criterion_5(rep, fast=False, workers=1, k=8, domains=(SQUARE, DISK), mu=1.0, grid=None, levels=None,
                bcs=("dirichlet",)):
    levels = ((0, 1, 2) if fast else (1, 2, 3)) if levels is None else levels
    grid = [g * mu for g in SANDWICH_GRID] if grid is None else grid
    for dom in domains:
        t0 = time.perf_counter()
        rows = lab.verify_sandwich(dom, mu, grid, k, levels, workers=workers, bcs=bcs)
        wall = time.perf_counter() - t0
        for r in rows:
            if r["bc"] == "traction":
                # left side is 0 <= tau; measure it against the upper value's scale
                left = r["value"] / max(abs(r["upper"]), 1.0)
            else:
                left = r["left_margin"]
            margin = min(left, r["right_margin"])
            rep.add("5:sandwich", f"{_name(dom)} {r['bc']} lambda={r['lambda']:g} k={r['k']} "
                    f"theta={r['lower']:.10g} sigma={r['upper']:.10g}", r["value"], r["upper"], -margin, 1e-3, wall)


# ------------------------------------------------------------------ 6

def criterion_6(rep, fast=False, workers=1, k=5, domains=(SQUARE, DISK), mu=1.0, levels=None):
    fixed = levels
    for dom in domains:
        # the Morley element needs a finer start on the square than on the disk
        levels = fixed or ((0, 1, 2) if fast and dom.kind == "unit_disk" else (1, 2, 3))
        t0 = time.perf_counter()
        r = lab.verify_buckling_stokes_identity(dom, mu, k, levels, workers=workers)
        wall = time.perf_counter() - t0
        for i in range(k):
            rep.check("6:morley_vs_taylor_hood", f"{_name(dom)} levels={levels} k={i + 1}", r["buckling"][i],
                      r["stokes"][i], 5e-3, wall)
        if dom.kind == "unit_disk":
            ref = oracles.disk_spectra("stokes_dirichlet_eq_buckling", mu, k)
            for i in range(k):
                rep.check("6:disk_buckling_oracle", f"levels={levels} k={i + 1}", r["buckling"][i], ref[i], 1e-2, wall)
                rep.check("6:disk_stokes_oracle", f"levels={levels} k={i + 1}", r["stokes"][i], ref[i], 1e-2, wall)


# ------------------------------------------------------------------ 7

def criterion_7(rep, fast=False, workers=1, k=5, domains=(SQUARE, DISK), mu=1.0, levels=None):
    levels = ((0, 1, 2) if fast else (1, 2, 3)) if levels is None else levels
    names = ("Theta", "Xi", "Gamma", "Lambda")
    for dom in domains:
        t0 = time.perf_counter()
        rows = lab.verify_chain_inequalities(dom, mu, k, levels, workers=workers)
        wall = time.perf_counter() - t0
        for r in rows:
            for (a, b), m in zip(zip(names, names[1:]), r["margins"]):
                rep.add("7:chain", f"{_name(dom)} k={r['k']} {a}<{b}", r[a], r[b], -m, 1e-3, wall)
        if dom.kind == "unit_disk":
            r = rows[0]
            refs = {"Xi": mu * oracles.bessel_zeros(0, 1).zeros[0] ** 2,
                    "Gamma": mu * oracles.clamped_plate_roots(0, 1)[0] ** 2,
                    "Lambda": mu * oracles.bessel_zeros(1, 1).zeros[0] ** 2}
            for name, ref in refs.items():
                rep.check("7:disk_first", f"{name}_1 levels={levels}", r[name], ref, 1e-2, wall)


# ------------------------------------------------------------------ 8

def _fit_rows(rep, tag, inputs, spectrum, model, tols, wall):
    win = ht.auto_window(spectrum, model)
    curve = ht.partition_function(spectrum, win["t_grid"], leading=model.coefficients[-1.0])
    fit = ht.fit_asymptotics(curve)
    window = f"t=[{win['t_min']:.4g},{win['t_max']:.4g}]{' widened' if win['widened'] else ''}"
    for p, tol in zip((-1.0, -0.5, 0.0), tols):
        f, th = fit.coefficients[p], model.coefficients[p]
        if tol is None:
            rep.info(f"{tag}_t^{p:g}", f"{inputs} {window}", f, th, wall)
        else:
            rep.check(f"{tag}_t^{p:g}", f"{inputs} {window}", f, th, tol, wall)
    return fit, curve


def criterion_8(rep, fast=False, workers=1, count=10000, mu=1.0):
    t0 = time.perf_counter()
    spec = oracles.square_laplace_spectrum("dirichlet", mu, count)
    model = ht.theoretical_coefficients("laplace_scalar", "dirichlet", 0.0, mu, 2, ht.geometry_of(SQUARE))
    fit, _ = _fit_rows(rep, "8:analytic", f"square dirichlet N={count}", spec, model, (1e-2, 3e-2, None),
                       time.perf_counter() - t0)
    rep.add("8:boundary_sign", "dirichlet boundary term negative", fit.coefficients[-0.5], -1.0,
            0.0 if fit.coefficients[-0.5] < 0 else 1.0, 0.0, time.perf_counter() - t0)


# ------------------------------------------------------------------ 9

def criterion_9(rep, fast=False, workers=1, mu=1.0, lam=1.0):
    levels, k = ((1, 2, 3), 150) if fast else ((2, 3, 4), 200)
    t0 = time.perf_counter()
    ext, _ = lab.extrapolated(lab.ProblemSpec("lame_dirichlet", SQUARE, mu, lam, 0, k), levels, workers)
    spec = np.sort(ext["values"])
    model = ht.theoretical_coefficients("lame", "dirichlet", lam, mu, 2, ht.geometry_of(SQUARE))
    ok = sum(f == "ok" for f in ext["flags"])
    _fit_rows(rep, "9:fem_lame", f"square lambda={lam:g} levels={levels} N={k} extrapolated_ok={ok}", spec, model,
              (5e-2, None, None), time.perf_counter() - t0)


# ------------------------------------------------------------------ 10

def criterion_10(rep, fast=False, workers=1):
    mu = 1.0
    for n in (2, 3):
        geom = {"volume": 1.3, "boundary_volume": 4.1, "scalar_curvature_integral": 0.7,
                "mean_curvature_integral": 2.3}
        for bc in ("dirichlet", "traction"):
            a = ht.theoretical_coefficients("lame", bc, -mu, mu, n, geom).coefficients
            b = ht.theoretical_coefficients("laplace_vec", bc, 0.0, mu, n, geom).coefficients
            err = max(_rel(a[p], b[p]) for p in b)
            rep.add("10:lame_minus_mu_eq_laplace", f"n={n} {bc}", a[max(a)], b[max(b)], err, 1e-12)
            a = ht.theoretical_coefficients("lame", bc, 1e8, mu, n, geom).coefficients
            b = ht.theoretical_coefficients("stokes", bc, 0.0, mu, n, geom).coefficients
            for p in sorted(b)[:2]:
                rep.check("10:lame_large_lambda_vs_stokes", f"n={n} {bc} power={p:g}", a[p], b[p], 1e-3)
    model = ht.theoretical_coefficients("buckling_2d", "dirichlet", 0.0, mu, 2, ht.geometry_of(DISK))
    d1 = model.coefficients[-0.5]
    rep.check("10:disk_buckling_d1", "mu=1", d1, -math.sqrt(math.pi) / 4, 1e-12)
    rep.check("10:disk_buckling_d2", "mu=1", model.coefficients[0.0], -5.0 / 3.0, 1e-12)


# ------------------------------------------------------------------ 11

KERNEL_CASES = (("lame_traction", 1.0, 3), ("lame_traction", 0.0, 3), ("lame_traction", -0.5, 3),
                ("stokes_cauchy", 0.0, 3), ("scalar_neumann", 0.0, 1))


def criterion_11(rep, fast=False, workers=1):
    domains = (SQUARE, DISK, DomainSpec.annulus(0.5), L_SHAPE)
    levels = (0,) if fast else (0, 1)
    specs = [lab.ProblemSpec(op, dom, 1.0, lam, level, 8)
             for dom in domains for level in levels for op, lam, _ in KERNEL_CASES]
    t0 = time.perf_counter()
    res = lab.run_spectra(specs, workers)
    wall = time.perf_counter() - t0
    expected = [e for _ in domains for _ in levels for _, _, e in KERNEL_CASES]
    for s, r, e in zip(specs, res, expected):
        rep.add("11:kernel_dimension", f"{s.operator} {_name(s.domain)} lambda={s.lam:g} level={s.level}",
                r.zero_modes, e, abs(r.zero_modes - e), 0, wall)


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 12)}


def run_criterion(i, fast=False, workers=1):
    rep = ExperimentReport()
    CRITERIA[i](rep, fast=fast, workers=workers)
    return rep


def run_suite(fast=False, workers=1, which=None, progress=None):
    """Run the numbered checks in ``which`` (default all) in order; returns one report."""
    rep = ExperimentReport(meta={"suite": "acceptance", "fast": bool(fast), "workers": int(workers)})
    for i in sorted(which or CRITERIA):
        part = run_criterion(i, fast, workers)
        rep.extend(part)
        if progress is not None:
            progress(i, part)
    return rep
