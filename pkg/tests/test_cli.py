import json
import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sll import cli
from sll.report import SCHEMA, read_csv


def run_cli(args, tmp_path, name="out"):
    out = tmp_path / name
    code = cli.main(list(args) + ["--out", str(out), "--no-timestamps"])
    return code, out


def test_solve_example(tmp_path):
    code, out = run_cli(["solve", "--op", "scalar_dirichlet", "--domain", "square", "--levels", "3", "--k", "4"],
                        tmp_path)
    assert code == 0
    for level in (1, 2, 3):
        vals = np.loadtxt(out / f"spectrum_scalar_dirichlet_L{level}.txt")
        assert vals.shape == (4,)
    rep = read_csv(out / "report.csv")
    ext = [r for r in rep.rows if r.experiment == "solve:extrapolated"]
    ref = np.pi ** 2 * np.array([2, 5, 5, 8])
    assert np.allclose([r.reference for r in ext], ref)
    assert all(r.passed and r.error < 5e-3 for r in ext)


def test_verify_monotone_example(tmp_path):
    code, out = run_cli(["verify", "--sub", "monotone", "--domain", "square", "--mu", "1", "--k", "5"], tmp_path)
    assert code == 0
    rows = read_csv(out / "report.csv").rows
    # one row per (boundary condition, lambda pair, k)
    assert len(rows) == 2 * 7 * 5
    assert all(r.passed for r in rows)


def test_report_is_bitwise_reproducible(tmp_path):
    args = ["sweep", "--domain", "disk", "--k", "3", "--level0", "0", "--lambda-grid", "-0.5,0,1"]
    _, a = run_cli(args, tmp_path, "a")
    _, b = run_cli(args, tmp_path, "b")
    _, c = run_cli(args + ["--workers", "2"], tmp_path, "c")
    ta = (a / "report.csv").read_bytes()
    assert ta == (b / "report.csv").read_bytes() == (c / "report.csv").read_bytes()
    assert ta.decode().splitlines()[0] == SCHEMA


def test_json_format_and_mesh(tmp_path):
    code, out = run_cli(["mesh", "--domain", "annulus:0.5", "--levels", "2", "--format", "json"], tmp_path)
    assert code == 0
    doc = json.loads((out / "report.json").read_text())
    assert doc["verdict"] is True
    assert (out / "mesh_L0.sllmesh").exists() and (out / "mesh_L1.sllmesh").exists()


def test_penalty_command(tmp_path):
    code, out = run_cli(["penalty", "--k", "3", "--level0", "0"], tmp_path)
    assert code == 0
    assert (out / "penalty_richardson.txt").exists()


def test_heat_trace_writes_curves(tmp_path):
    code, out = run_cli(["heat-trace", "--fast"], tmp_path)
    assert code == 0
    zt = np.loadtxt(out / "Zt.dat")
    assert zt.shape[1] == 2 and np.all(np.diff(zt[:, 1]) < 0)
    assert (out / "Zt_analytic.dat").exists()
    fit = (out / "fit_fem.csv").read_text().splitlines()
    assert fit[0] == "power,fitted,theoretical,rel_error"


def test_negative_lambda_flags(tmp_path):
    code, out = run_cli(["solve", "--op", "TL", "--lambda", "-0.5", "--k", "5", "--levels", "1"], tmp_path)
    assert code == 0
    zero = [r for r in read_csv(out / "report.csv").rows if r.experiment == "solve:zero_modes"]
    assert zero and zero[0].computed == 3


def test_config_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "solve", "op": "Xi", "k": 2, "levels": 1, "mu": 2.0}))
    resolved = cli.resolve_config(["--config", str(cfg), "--k", "3"])
    assert (resolved.command, resolved.k, resolved.mu, resolved.op) == ("solve", 3, 2.0, "Xi")
    resolved = cli.resolve_config(["verify", "--config", str(cfg), "--sub", "chain"])
    assert resolved.command == "verify" and resolved.sub == "chain"


@pytest.mark.parametrize("text,fragment", [
    ("", "empty config"),
    ("   \n", "empty config"),
    ('{"mu": "x"}', "field 'mu'"),
    ('{"k": 2.5}', "field 'k'"),
    ('{"bogus": 1}', "field 'bogus'"),
    ('{"domain": "hexagon"}', "field 'domain'"),
    ('{\n "mu": 1,,\n}', ":2:"),
    ("[1, 2]", "JSON object"),
])
def test_config_errors(tmp_path, capsys, text, fragment):
    cfg = tmp_path / "c.json"
    cfg.write_text(text)
    assert cli.main(["solve", "--config", str(cfg)]) == 2
    assert fragment in capsys.readouterr().err


def test_unknown_subcommand_exits_2(capsys):
    assert cli.main(["frobnicate"]) == 2
    assert "usage" in capsys.readouterr().err


def test_missing_command_exits_2():
    assert cli.main([]) == 2


def test_experiment_error_names_experiment(tmp_path, capsys):
    code, _ = run_cli(["verify", "--sub", "identity", "--domain", "annulus:0.5", "--fast"], tmp_path)
    assert code == 3
    assert "verify:identity" in capsys.readouterr().err


def test_failing_row_gives_exit_1(tmp_path, monkeypatch):
    def fake(run):
        run.report.check("fake", "", 2.0, 1.0, 1e-3)
    monkeypatch.setitem(cli.DISPATCH, "mesh", fake)
    code, _ = run_cli(["mesh"], tmp_path)
    assert code == 1


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "sll.cli", "frobnicate"], capture_output=True, text=True)
    assert out.returncode == 2


name_st = st.text(alphabet="abcdefghijklmnopqrstuvwxyz_/", min_size=1, max_size=12)


@settings(max_examples=40, deadline=None)
@given(mu=st.floats(0.01, 100.0), lam=st.one_of(st.none(), st.floats(-1.9, 1e4)),
       grid=st.one_of(st.none(), st.lists(st.floats(-1.9, 1e4), max_size=5)),
       k=st.one_of(st.none(), st.integers(1, 300)), levels=st.integers(1, 5),
       workers=st.integers(1, 8), fmt=st.sampled_from(["csv", "json"]), out=name_st,
       command=st.sampled_from(cli.COMMANDS), sub=st.sampled_from(cli.SUBS),
       domain=st.sampled_from(["square", "disk", "annulus:0.25"]), fast=st.booleans())
def test_config_round_trip(mu, lam, grid, k, levels, workers, fmt, out, command, sub, domain, fast):
    cfg = cli.RunConfig(command=command, sub=sub, domain=domain, mu=mu, lam=lam, lambda_grid=grid, k=k,
                        levels=levels, output_dir=out, format=fmt, worker_count=workers, fast=fast)
    back = cli.RunConfig.from_json(cfg.to_json())
    assert back == cfg
    assert back.to_json() == cfg.to_json()
