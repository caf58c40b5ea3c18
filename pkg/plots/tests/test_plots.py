"""Headless rendering of every plot kind from shipped fixture artifacts."""

import json
import os
import shutil
import subprocess
import sys

import numpy as np
import pytest

from rotoplot.io import (FormatError, load_branch, load_diagnostics,
                         load_levelsets, load_raster)
from rotoplot.render import (plot_branch, plot_levelsets,
                             plot_residual_history, plot_vorticity)

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def plot_cmd(*args):
    return subprocess.run([sys.executable, "-m", "rotoplot.cli", *args],
                          capture_output=True, text=True)


def test_all_plot_kinds_render_headlessly(tmp_path):
    env_backend = os.environ.pop("MPLBACKEND", None)
    try:
        for kind, src in (("branch", "branch.jsonl"),
                          ("residual-history", "branch.jsonl"),
                          ("levelsets", "levelsets.csv"),
                          ("vorticity", "")):
            out = tmp_path / f"{kind}.png"
            inp = os.path.join(FIXTURES, src) if src else FIXTURES
            res = plot_cmd("--kind", kind, "--in", inp, "--out", str(out))
            assert res.returncode == 0, res.stderr
            assert out.stat().st_size > 1000
    finally:
        if env_backend is not None:
            os.environ["MPLBACKEND"] = env_backend


def test_vorticity_raster_statistics_match_diagnostics():
    ras, extent = load_raster(os.path.join(FIXTURES, "raster.csv"))
    diag = load_diagnostics(os.path.join(FIXTURES, "diagnostics.json"))
    assert ras.min() >= 0.0 and ras.max() <= 1.0
    assert ras.min() == pytest.approx(diag["raster_min"])
    assert ras.max() == pytest.approx(diag["raster_max"])
    assert extent == pytest.approx(diag["raster_extent"])
    fig = plot_vorticity(ras, extent)
    im = fig.axes[0].get_images()[0]
    lo, hi = im.get_clim()
    assert lo == 0.0 and hi >= diag["raster_max"]


def test_branch_reader_and_figure():
    header, points = load_branch(os.path.join(FIXTURES, "branch.jsonl"))
    assert header["m"] == 3
    assert points[0]["xi"] == 0.0
    fig = plot_branch(header, points)
    assert len(fig.axes) == 2


def test_trivial_only_branch_renders_single_point(tmp_path):
    src = os.path.join(FIXTURES, "branch.jsonl")
    lines = open(src).read().splitlines()
    path = tmp_path / "trivial.jsonl"
    path.write_text("\n".join(lines[:2]) + "\n")
    header, points = load_branch(str(path))
    assert len(points) == 1 and points[0]["xi"] == 0.0
    assert plot_branch(header, points) is not None


def test_levelsets_reader_closed_threefold_curves():
    curves = load_levelsets(os.path.join(FIXTURES, "levelsets.csv"))
    assert set(curves) == {-0.5, 0.0, 0.5}
    for pts in curves.values():
        r = np.hypot(pts[:, 0], pts[:, 1])
        assert r.std() < 0.01  # wavy annulus, small amplitude
    assert plot_levelsets(curves) is not None


def test_residual_history_figure():
    _, points = load_branch(os.path.join(FIXTURES, "branch.jsonl"))
    assert plot_residual_history(points) is not None


def test_missing_input_fails_with_message(tmp_path):
    res = plot_cmd("--kind", "branch", "--in", str(tmp_path / "nope.jsonl"),
                   "--out", str(tmp_path / "x.png"))
    assert res.returncode == 1
    assert "not found" in res.stderr


def test_unknown_kind_is_usage_error(tmp_path):
    res = plot_cmd("--kind", "pie", "--in", FIXTURES,
                   "--out", str(tmp_path / "x.png"))
    assert res.returncode == 2


def test_corrupt_branch_rejected(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"format": "branch-v1"}\n{broken\n')
    with pytest.raises(FormatError, match="corrupt record"):
        load_branch(str(bad))
    bad.write_text('{"format": "other"}\n')
    with pytest.raises(FormatError, match="bad format tag"):
        load_branch(str(bad))


def test_levelsets_header_validated(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(FormatError, match="expected header"):
        load_levelsets(str(bad))


def test_binary_raster_sidecar_validated(tmp_path):
    raw = tmp_path / "raster.f64"
    np.arange(16.0).tofile(raw)
    side = {"dtype": "<f8", "shape": [4, 4], "extent": 2.0, "order": "C"}
    (tmp_path / "raster.f64.json").write_text(json.dumps(side))
    ras, extent = load_raster(str(raw))
    assert ras.shape == (4, 4) and extent == 2.0
    side["shape"] = [5, 5]
    (tmp_path / "raster.f64.json").write_text(json.dumps(side))
    with pytest.raises(FormatError, match="do not match sidecar shape"):
        load_raster(str(raw))
