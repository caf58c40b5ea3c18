"""Command-line interface: config layering, artifacts and exit codes."""

import json
import os

import numpy as np
import pytest
from click.testing import CliRunner

from rotostate.cli import main

CONFIG = """\
[problem]
m = 3
a = 0.05

[grid]
n_alpha = 48
n_s = 16
n_harmonics = 4

[branch]
xi_step = 0.005
n_steps = 2

[output]
raster_n = 64
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "run.ini").write_text(CONFIG)
    return d


def run(workdir, *args, env=None):
    runner = CliRunner()
    cwd = os.getcwd()
    os.chdir(workdir)
    try:
        return runner.invoke(main, list(args), env=env,
                             catch_exceptions=False)
    finally:
        os.chdir(cwd)


@pytest.fixture(scope="module")
def branch_run(workdir):
    res = run(workdir, "--config", "run.ini", "--out", "art", "branch")
    assert res.exit_code == 0, res.output
    return workdir / "art"


def test_help_and_version(workdir):
    assert run(workdir, "--help").exit_code == 0
    assert run(workdir, "--version").exit_code == 0


def test_unknown_subcommand_is_usage_error(workdir):
    runner = CliRunner()
    res = runner.invoke(main, ["frobnicate"])
    assert res.exit_code == 2


def test_missing_config_file_is_usage_error(workdir):
    res = run(workdir, "--config", "nope.ini", "verify-integrals")
    assert res.exit_code == 2


def test_unknown_config_key_is_usage_error(workdir, tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[x]\nwibble = 3\n")
    res = run(workdir, "--config", str(bad), "verify-integrals")
    assert res.exit_code == 2
    assert "wibble" in res.output


def test_unparsable_config_value_is_usage_error(workdir, tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("m = three\n")
    res = run(workdir, "--config", str(bad), "verify-integrals")
    assert res.exit_code == 2


def test_invalid_value_is_usage_error(workdir, tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("m = 1\n")
    res = run(workdir, "--config", str(bad), "spectrum")
    assert res.exit_code == 2


def test_verify_integrals(workdir):
    res = run(workdir, "--out", "integ", "verify-integrals", "--max-m", "4")
    assert res.exit_code == 0, res.output
    lines = (workdir / "integ" / "integrals.csv").read_text().splitlines()
    assert lines[0] == "integral,m,closed_form,quadrature,abs_error"
    assert len(lines) == 1 + 5 * 4


def test_check_bounds(workdir):
    res = run(workdir, "--config", "run.ini", "--out", "bnd",
              "check-bounds", "--samples", "500", "--a", "0.25")
    assert res.exit_code == 0, res.output
    rep = json.loads((workdir / "bnd" / "bounds.json").read_text())
    assert rep["ok"]


def test_spectrum(workdir):
    res = run(workdir, "--config", "run.ini", "--out", "spec", "spectrum")
    assert res.exit_code == 0, res.output
    rep = json.loads((workdir / "spec" / "spectrum_m3.json").read_text())
    assert rep["ok"]
    assert rep["transversality"] == pytest.approx(3.0, abs=1e-6)


def test_branch_artifacts(branch_run):
    lines = (branch_run / "branch.jsonl").read_text().splitlines()
    header = json.loads(lines[0])
    assert header["format"] == "branch-v1"
    assert len(lines) == 1 + 3  # header + trivial point + 2 steps


def test_branch_runs_are_byte_identical(workdir, branch_run):
    res = run(workdir, "--config", "run.ini", "--out", "art2", "branch")
    assert res.exit_code == 0, res.output
    assert ((workdir / "art2" / "branch.jsonl").read_bytes()
            == (branch_run / "branch.jsonl").read_bytes())


def test_branch_resume(workdir, branch_run):
    res = run(workdir, "--config", "run.ini", "--out", "art3", "branch",
              "--resume", str(branch_run / "branch.jsonl"), "--n-steps", "1")
    assert res.exit_code == 0, res.output
    lines = (workdir / "art3" / "branch.jsonl").read_text().splitlines()
    assert len(lines) == 1 + 4


def test_branch_refuses_flat_velocity_schedule(workdir, tmp_path):
    bad = tmp_path / "flat.ini"
    bad.write_text(CONFIG + "dlambda_da = 0.0\n")
    res = run(workdir, "--config", str(bad), "--out", "flat", "branch")
    assert res.exit_code == 1


def test_reconstruct_artifacts(workdir, branch_run):
    res = run(workdir, "--config", "run.ini", "--out", str(branch_run),
              "reconstruct")
    assert res.exit_code == 0, res.output
    ras = np.loadtxt(branch_run / "raster.csv", delimiter=",")
    assert ras.shape == (64, 64)
    assert ras.min() >= 0.0 and ras.max() <= 1.0
    diag = json.loads((branch_run / "diagnostics.json").read_text())
    assert diag["raster_min"] == pytest.approx(float(ras.min()))
    assert diag["raster_max"] == pytest.approx(float(ras.max()))
    assert diag["min_d_rho_r"] > 0.0
    lvl = (branch_run / "levelsets.csv").read_text().splitlines()
    assert lvl[0] == "level_s,alpha,x,y"
    assert len(lvl) == 1 + 3 * 48


def test_reconstruct_binary_raster(workdir, branch_run):
    res = run(workdir, "--config", "run.ini", "--out", str(branch_run),
              "reconstruct", "--raster-format", "bin", "--raster-n", "32")
    assert res.exit_code == 0, res.output
    side = json.loads((branch_run / "raster.f64.json").read_text())
    ras = np.fromfile(branch_run / "raster.f64",
                      dtype=side["dtype"]).reshape(side["shape"])
    assert ras.shape == (32, 32)
    assert ras.min() >= 0.0 and ras.max() <= 1.0


def test_reconstruct_without_branch_is_usage_error(workdir):
    res = run(workdir, "--config", "run.ini", "--out", "empty", "reconstruct")
    assert res.exit_code == 2


def test_residual_command(workdir, branch_run):
    res = run(workdir, "--config", "run.ini", "--out", str(branch_run),
              "residual")
    assert res.exit_code == 0, res.output
    rep = json.loads((branch_run / "residual.json").read_text())
    assert rep["rotation_residual"] <= rep["residual_tol"]
    field = np.loadtxt(branch_run / "residual_field.csv", delimiter=",")
    assert field.shape == (48, 16)


def test_advect_command(workdir, branch_run):
    res = run(workdir, "--config", "run.ini", "--out", str(branch_run),
              "advect", "--T", "0.2", "--dt", "0.02", "--markers", "8")
    assert res.exit_code == 0, res.output
    rep = json.loads((branch_run / "advect.json").read_text())
    assert rep["lambda_rel_error"] <= 0.01
    lines = (branch_run / "markers.csv").read_text().splitlines()
    assert lines[0] == "t,marker,level_s,x,y"
    assert len(lines) == 1 + 11 * rep["n_markers"]


def test_threads_env_override(workdir):
    res = run(workdir, "--out", "thr", "verify-integrals", "--max-m", "1",
              env={"ROTOSTATE_THREADS": "2"})
    assert res.exit_code == 0, res.output
