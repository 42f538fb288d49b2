"""Command-line runner: ``sll <command> [flags]``.

Settings are resolved in three layers, later ones winning: built-in
defaults, then the JSON document given by ``--config``, then explicit
command-line flags. Fields left as ``null`` take a per-command default
(for example ``k`` is 6 for ``solve`` and 200 for ``heat-trace``).

Exit status: 0 when every report row passes, 1 when some row fails,
2 for usage or configuration errors, 3 when an experiment raises.
"""
import argparse
from dataclasses import asdict, dataclass, fields
import json
import math
import os
import sys
import time

import numpy as np

from . import heat_trace as ht, lab, oracles, suite
from .mesh import DomainSpec, mesh_quantities, write_mesh
from .report import ExperimentReport, fmt, write_spectrum

COMMANDS = ("mesh", "solve", "sweep", "penalty", "heat-trace", "verify")
SUBS = ("sandwich", "identity", "chain", "monotone", "all")

# per-command defaults for fields left unset
DEFAULT_K = {"solve": 6, "sweep": 10, "penalty": 5, "heat-trace": 200,
             "monotone": 10, "sandwich": 8, "identity": 5, "chain": 5}
DEFAULT_LEVEL0 = {"mesh": 0, "heat-trace": 2}


class ConfigError(ValueError):
    pass


class ExperimentError(RuntimeError):
    def __init__(self, experiment, exc):
        super().__init__(f"experiment {experiment!r} failed: {type(exc).__name__}: {exc}")
        self.experiment = experiment


@dataclass
class RunConfig:
    """Everything a run needs; serialized as one flat JSON object."""

    command: str = None
    sub: str = "all"
    op: str = "scalar_dirichlet"
    domain: str = "square"
    mu: float = 1.0
    lam: float = None
    lambda_grid: list = None
    k: int = None
    levels: int = 3
    level0: int = None
    h0: float = None
    output_dir: str = "sll_out"
    format: str = "csv"
    worker_count: int = 1
    fast: bool = False
    projected_div: str = "auto"
    no_timestamps: bool = False

    # JSON uses "lambda" for the lam field
    _json_names = {"lam": "lambda"}

    def to_dict(self):
        d = asdict(self)
        return {self._json_names.get(k, k): v for k, v in d.items()}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data, source="<config>"):
        if not isinstance(data, dict):
            raise ConfigError(f"{source}: top level must be a JSON object, got {type(data).__name__}")
        inverse = {v: k for k, v in cls._json_names.items()}
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            name = inverse.get(key, key)
            if name not in known or name.startswith("_"):
                raise ConfigError(f"{source}: field {key!r}: unknown field")
            kwargs[name] = _coerce(name, value, f"{source}: field {key!r}")
        cfg = cls(**kwargs)
        cfg.validate(source)
        return cfg

    @classmethod
    def from_json(cls, text, source="<config>"):
        if not text.strip():
            raise ConfigError(f"{source}:1:1: empty config document")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
        return cls.from_dict(data, source)

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
        return cls.from_json(text, path)

    def validate(self, source="<config>"):
        def bad(name, msg):
            raise ConfigError(f"{source}: field {self._json_names.get(name, name)!r}: {msg}")

        if self.command is not None and self.command not in COMMANDS:
            bad("command", f"must be one of {list(COMMANDS)}")
        if self.sub not in SUBS:
            bad("sub", f"must be one of {list(SUBS)}")
        if self.format not in ("csv", "json"):
            bad("format", "must be 'csv' or 'json'")
        if self.projected_div not in ("on", "off", "auto"):
            bad("projected_div", "must be 'on', 'off' or 'auto'")
        if not self.mu > 0:
            bad("mu", "must be positive")
        if self.k is not None and self.k < 1:
            bad("k", "must be >= 1")
        if self.levels < 1:
            bad("levels", "must be >= 1")
        if self.level0 is not None and self.level0 < 0:
            bad("level0", "must be >= 0")
        if self.worker_count < 1:
            bad("worker_count", "must be >= 1")
        if self.h0 is not None and not 0 < self.h0 <= 1:
            bad("h0", "must lie in (0, 1]")
        try:
            DomainSpec.parse(self.domain)
        except (ValueError, OSError) as exc:
            bad("domain", str(exc))
        try:
            lab.canonical_operator(self.op)
        except ValueError as exc:
            bad("op", str(exc))
        return self

    # ------------------------------------------------------------ resolved values

    @property
    def domain_spec(self):
        return DomainSpec.parse(self.domain)

    def k_for(self, key):
        return self.k if self.k is not None else DEFAULT_K[key]

    def start_level(self, key):
        if self.level0 is not None:
            return self.level0
        base = DEFAULT_LEVEL0.get(key, 1)
        return max(base - 1, 0) if self.fast else base

    def level_range(self, key):
        start = self.start_level(key)
        return tuple(range(start, start + self.levels))


_TYPES = {"mu": float, "lam": float, "h0": float, "k": int, "levels": int, "level0": int, "worker_count": int,
          "fast": bool, "no_timestamps": bool, "command": str, "sub": str, "op": str, "domain": str,
          "output_dir": str, "format": str, "projected_div": str}
_NULLABLE = {"command", "lam", "lambda_grid", "k", "level0", "h0"}


def _coerce(name, value, where):
    if value is None:
        if name in _NULLABLE:
            return None
        raise ConfigError(f"{where}: may not be null")
    if name == "lambda_grid":
        if not isinstance(value, list) or not all(_is_number(v) for v in value):
            raise ConfigError(f"{where}: expected a list of numbers")
        return [float(v) for v in value]
    kind = _TYPES[name]
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true or false, got {value!r}")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if kind is float:
        if not _is_number(value):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{where}: expected a string, got {value!r}")
    return value


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


# ------------------------------------------------------------------ argument parsing

def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser():
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON config document; explicit flags override its fields")
    common.add_argument("--domain", help="square | disk | annulus:R | polygon:FILE")
    common.add_argument("--op", help="operator name or alias (solve only)")
    common.add_argument("--mu", type=float)
    common.add_argument("--lambda", dest="lam", type=float)
    common.add_argument("--lambda-grid", dest="lambda_grid", type=_float_list)
    common.add_argument("--k", type=int)
    common.add_argument("--levels", type=int, help="number of refinement levels")
    common.add_argument("--level0", type=int, help="first refinement level")
    common.add_argument("--h0", type=float, help="base mesh size (level 0)")
    common.add_argument("--out", dest="output_dir")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--workers", dest="worker_count", type=int)
    common.add_argument("--fast", action="store_true")
    common.add_argument("--projected-div", dest="projected_div", choices=("on", "off", "auto"))
    common.add_argument("--no-timestamps", dest="no_timestamps", action="store_true")

    parser = argparse.ArgumentParser(prog="sll", description="Finite-element spectral lab.", parents=[common])
    subs = parser.add_subparsers(dest="command", metavar="{" + ",".join(COMMANDS) + "}")
    for name in COMMANDS:
        p = subs.add_parser(name, parents=[common], argument_default=argparse.SUPPRESS)
        if name == "verify":
            p.add_argument("--sub", choices=SUBS)
    return parser


def _join_negative_values(argv):
    """Rewrite ``--lambda -1`` as ``--lambda=-1`` so argparse does not take the value for a flag."""
    out = []
    it = iter(argv)
    for tok in it:
        if tok in ("--lambda", "--lambda-grid", "--mu", "--h0"):
            nxt = next(it, None)
            if nxt is not None and nxt[:1] == "-" and (nxt[1:2].isdigit() or nxt[1:2] == "."):
                out.append(f"{tok}={nxt}")
                continue
            out.append(tok)
            if nxt is not None:
                out.append(nxt)
            continue
        out.append(tok)
    return out


def resolve_config(argv):
    """Parse ``argv`` into a validated :class:`RunConfig`."""
    parser = build_parser()
    ns = vars(parser.parse_args(_join_negative_values(list(argv))))
    command = ns.pop("command", None)
    path = ns.pop("config", None)
    base = RunConfig.load(path) if path else RunConfig()
    data = base.to_dict()
    for key, value in ns.items():
        data[RunConfig._json_names.get(key, key)] = value
    if command is not None:
        data["command"] = command
    cfg = RunConfig.from_dict(data, path or "<flags>")
    if cfg.command is None:
        parser.error("a command is required (on the command line or as 'command' in the config)")
    return cfg


# ------------------------------------------------------------------ commands

class _Run:
    def __init__(self, cfg):
        self.cfg = cfg
        self.report = ExperimentReport(meta={"config": cfg.to_dict()})
        self.files = []
        os.makedirs(cfg.output_dir, exist_ok=True)

    def path(self, name):
        p = os.path.join(self.cfg.output_dir, name)
        self.files.append(p)
        return p

    def guard(self, experiment, fn, *args, **kw):
        try:
            return fn(*args, **kw)
        except Exception as exc:
            raise ExperimentError(experiment, exc) from exc


def _cmd_mesh(run):
    cfg = run.cfg
    dom = cfg.domain_spec
    h0 = cfg.h0 if cfg.h0 is not None else lab.BASE_H[dom.kind]
    for level in cfg.level_range("mesh"):
        t0 = time.perf_counter()
        mesh = run.guard(f"mesh:level{level}", lab.mesh_at, dom, level, h0)
        write_mesh(mesh, run.path(f"mesh_L{level}.sllmesh"))
        try:
            mesh.validate()
            bad = 0.0
        except ValueError:
            bad = 1.0
        wall = time.perf_counter() - t0
        q = mesh_quantities(mesh)
        tag = f"{dom.label} level={level} h={h0 / 2 ** level:g} nv={mesh.nv} nt={mesh.nt}"
        run.report.add("mesh:valid", tag, 1.0 - bad, 1.0, bad, 0.0, wall)
        run.report.add("mesh:euler_characteristic", tag, mesh.euler_characteristic(), dom.euler_characteristic,
                       abs(mesh.euler_characteristic() - dom.euler_characteristic), 0.0, wall)
        run.report.info("mesh:area", tag, q["area"], dom.analytic_area, wall)
        run.report.info("mesh:perimeter", tag, q["perimeter"], dom.analytic_perimeter, wall)
        run.report.info("mesh:h_max", tag, mesh.h_max, h0 / 2 ** level, wall)


def _oracle(op, dom, mu, count):
    """Reference values and tolerance for ``op`` on ``dom``, or ``(None, None)``."""
    if dom.kind == "unit_square" and op in ("scalar_dirichlet", "scalar_neumann"):
        return oracles.square_laplace_spectrum(op.split("_")[1], mu, count), 5e-3
    if dom.kind == "unit_disk" and count <= 200:
        kind = {"scalar_dirichlet": "laplace_dirichlet", "stokes_dirichlet": "stokes_dirichlet_eq_buckling",
                "buckling_dirichlet": "stokes_dirichlet_eq_buckling", "clamped_plate": "clamped_plate"}.get(op)
        if kind is not None:
            return oracles.disk_spectra(kind, mu, count), 1e-2
    return None, None


def _cmd_solve(run):
    cfg = run.cfg
    dom = cfg.domain_spec
    op = lab.canonical_operator(cfg.op)
    k = cfg.k_for("solve")
    lam = cfg.lam if cfg.lam is not None else 0.0
    levels = cfg.level_range("solve")
    base = lab.ProblemSpec(op, dom, cfg.mu, lam, 0, k, cfg.h0, cfg.projected_div)
    res = run.guard(f"solve:{op}", lab.level_series, base, levels, cfg.worker_count)
    for r in res:
        write_spectrum(run.path(f"spectrum_{op}_L{r.spec.level}.txt"), r.eigenvalues)
        tag = f"{op} {dom.label} lambda={lam:g} level={r.spec.level} h={r.spec.h:g}"
        expected = lab.KERNEL_DIM.get(op)
        if op == "lame_traction" and abs(lam + cfg.mu) < 1e-12:
            expected = None  # infinitely many zero modes at lambda = -mu
        if expected is not None and k > expected:
            run.report.add("solve:zero_modes", tag, r.zero_modes, expected, abs(r.zero_modes - expected), 0.0,
                           r.wall_time)
        for i, v in enumerate(r.eigenvalues):
            run.report.info("solve:eigenvalue", f"{tag} k={i + 1}", v, math.nan, r.wall_time)
    if len(res) < 3:
        return
    ext = lab.extrapolate_mesh(res[-3:])
    write_spectrum(run.path(f"spectrum_{op}_extrapolated.txt"), ext["values"])
    ref, tol = _oracle(op, dom, cfg.mu, k)
    wall = sum(r.wall_time for r in res)
    for i, v in enumerate(ext["values"]):
        tag = f"{op} {dom.label} levels={levels} k={i + 1} order={fmt(ext['order'][i])} {ext['flags'][i]}"
        if ref is None:
            run.report.info("solve:extrapolated", tag, v, math.nan, wall)
        else:
            run.report.check("solve:extrapolated", tag, v, ref[i], tol, wall)


def _cmd_sweep(run):
    cfg = run.cfg
    dom = cfg.domain_spec
    k = cfg.k_for("sweep")
    grid = cfg.lambda_grid or [g * cfg.mu for g in suite.MONOTONE_GRID]
    level = cfg.start_level("sweep")
    table = run.guard("sweep", lab.lambda_sweep, dom, cfg.mu, grid, k, level, cfg.h0, cfg.projected_div,
                      cfg.worker_count)
    for lam in sorted(table):
        for bc, r in table[lam].items():
            write_spectrum(run.path(f"sweep_{bc}_lambda{fmt(lam)}.txt"), r.eigenvalues)
    for bc, l1, l2, i, t1, t2, _ in lab.check_monotone(table, k):
        err = (t1 - t2) / abs(t2) if t2 != 0 else t1 - t2
        run.report.add("sweep:monotone", f"{dom.label} {bc} level={level} lambda={fmt(l1)}->{fmt(l2)} k={i}",
                       t2, t1, err, 1e-9)


def _cmd_penalty(run):
    cfg = run.cfg
    dom = cfg.domain_spec
    k = cfg.k_for("penalty")
    lam = cfg.lam if cfg.lam is not None else 1e3 * cfg.mu
    level = cfg.start_level("penalty")
    t0 = time.perf_counter()
    pen = run.guard("penalty:lame", lab.stokes_via_penalty, dom, cfg.mu, lam, k, True, level, cfg.h0)
    stokes = run.guard("penalty:stokes", lab.compute_spectrum,
                       lab.ProblemSpec("stokes_dirichlet", dom, cfg.mu, 0.0, level, k, cfg.h0)).eigenvalues
    wall = time.perf_counter() - t0
    for l, raw in zip(pen["lambdas"], pen["raw"]):
        write_spectrum(run.path(f"penalty_lambda{fmt(l)}.txt"), raw)
    write_spectrum(run.path("penalty_richardson.txt"), pen["estimate"])
    write_spectrum(run.path("stokes_taylor_hood.txt"), stokes)
    t1, t2 = pen["raw"]
    for i in range(k):
        tag = f"{dom.label} level={level} lambda={fmt(lam)} k={i + 1}"
        ratio = (t1[i] - stokes[i]) / (t2[i] - stokes[i])
        run.report.add("penalty:rate", tag, ratio, 2.0, abs(ratio - 2.0), 0.3, wall)
        run.report.check("penalty:richardson", tag, pen["estimate"][i], stokes[i], 5e-3, wall)


def _cmd_heat_trace(run):
    cfg = run.cfg
    dom = cfg.domain_spec
    geom = ht.geometry_of(dom)
    if dom.kind == "unit_square":
        t0 = time.perf_counter()
        spec = oracles.square_laplace_spectrum("dirichlet", cfg.mu, 10000)
        model = ht.theoretical_coefficients("laplace_scalar", "dirichlet", 0.0, cfg.mu, 2, geom)
        fit, curve = suite._fit_rows(run.report, "heat:analytic_laplace", "square dirichlet N=10000", spec,
                                     model, (1e-2, 3e-2, None), time.perf_counter() - t0)
        ht.write_zt(run.path("Zt_analytic.dat"), curve)
        ht.write_fit_csv(run.path("fit_analytic.csv"), fit, model)
    k = cfg.k if cfg.k is not None else (150 if cfg.fast else DEFAULT_K["heat-trace"])
    lam = cfg.lam if cfg.lam is not None else 1.0
    levels = cfg.level_range("heat-trace")
    t0 = time.perf_counter()
    base = lab.ProblemSpec("lame_dirichlet", dom, cfg.mu, lam, 0, k, cfg.h0, cfg.projected_div)
    res = run.guard("heat:fem_lame", lab.level_series, base, levels[-3:], cfg.worker_count)
    # extrapolate when three levels are available, otherwise use the finest one
    values = np.sort(lab.extrapolate_mesh(res)["values"] if len(res) == 3 else res[-1].eigenvalues)
    write_spectrum(run.path("spectrum_lame_dirichlet_heat.txt"), values)
    model = ht.theoretical_coefficients("lame", "dirichlet", lam, cfg.mu, 2, geom)
    fit, curve = suite._fit_rows(run.report, "heat:fem_lame", f"{dom.label} lambda={fmt(lam)} levels={levels} N={k}",
                                 values, model, (5e-2, None, None), time.perf_counter() - t0)
    ht.write_zt(run.path("Zt.dat"), curve)
    ht.write_fit_csv(run.path("fit_fem.csv"), fit, model)


def _cmd_verify(run):
    cfg = run.cfg
    if cfg.sub == "all":
        rep = run.guard("verify:all", suite.run_suite, cfg.fast, cfg.worker_count,
                        progress=lambda i, part: print(f"criterion {i}: {'PASS' if part.verdict else 'FAIL'}",
                                                       flush=True))
        run.report.extend(rep)
        return
    dom = cfg.domain_spec
    k = cfg.k_for(cfg.sub)
    if cfg.level0 is not None or cfg.h0 is not None:
        start = cfg.start_level("verify")
    else:
        start = 0 if cfg.fast else 1
    levels = tuple(range(start, start + max(cfg.levels, 3)))[-3:]
    kw = dict(fast=cfg.fast, workers=cfg.worker_count, k=k, domains=(dom,), mu=cfg.mu)
    if cfg.sub == "monotone":
        run.guard("verify:monotone", suite.criterion_3, run.report, grid=cfg.lambda_grid, level=start,
                  projected_div=cfg.projected_div, **kw)
    elif cfg.sub == "sandwich":
        grid = cfg.lambda_grid or ([cfg.lam] if cfg.lam is not None else None)
        run.guard("verify:sandwich", suite.criterion_5, run.report, grid=grid, levels=levels,
                  bcs=("dirichlet", "traction"), **kw)
    elif cfg.sub == "identity":
        run.guard("verify:identity", suite.criterion_6, run.report, levels=levels, **kw)
    elif cfg.sub == "chain":
        run.guard("verify:chain", suite.criterion_7, run.report, levels=levels, **kw)


DISPATCH = {"mesh": _cmd_mesh, "solve": _cmd_solve, "sweep": _cmd_sweep, "penalty": _cmd_penalty,
            "heat-trace": _cmd_heat_trace, "verify": _cmd_verify}


def run(cfg):
    """Execute ``cfg``; returns the report and the list of files written (report file last)."""
    r = _Run(cfg)
    DISPATCH[cfg.command](r)
    path = r.report.write(cfg.output_dir, cfg.format, timestamps=not cfg.no_timestamps)
    r.files.append(path)
    return r.report, r.files


def verify_all(cfg):
    """Run the full acceptance suite with the pool size and speed settings of ``cfg``."""
    return run(RunConfig(**{**asdict(cfg), "command": "verify", "sub": "all"}))[0]


def main(argv=None):
    try:
        cfg = resolve_config(sys.argv[1:] if argv is None else argv)
    except ConfigError as exc:
        print(f"sll: config error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse already printed usage
        return int(exc.code or 0)
    try:
        report, files = run(cfg)
    except ExperimentError as exc:
        print(f"sll: {exc}", file=sys.stderr)
        return 3
    failed = report.failures()
    print(f"{len(report.rows)} rows, {len(failed)} failed; report: {files[-1]}")
    for row in failed:
        print(f"FAIL {row.experiment} [{row.inputs}] error={fmt(row.error)} tolerance={fmt(row.tolerance)}")
    return 0 if not failed else 1


if __name__ == "__main__":
    sys.exit(main())
