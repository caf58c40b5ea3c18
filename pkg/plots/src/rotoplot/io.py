"""Readers for the documented rotostate output formats.

All loaders raise FormatError with the offending path and reason; nothing
here ever writes to or mutates an input file.
"""

from __future__ import annotations

import csv
import json
import os

import numpy as np


class FormatError(ValueError):
    """An input file does not conform to its documented format."""


def _require(path: str) -> str:
    if not os.path.isfile(path):
        raise FormatError(f"{path}: file not found")
    return path


def load_branch(path: str):
    """Branch JSON-lines file -> (header dict, list of point dicts)."""
    with open(_require(path)) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError(f"{path}: empty branch file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: corrupt header: {e}") from None
    if header.get("format") != "branch-v1":
        raise FormatError(f"{path}: not a branch file (bad format tag)")
    points = []
    for i, line in enumerate(lines[1:], start=2):
        try:
            p = json.loads(line)
            points.append({
                "xi": float(p["xi"]),
                "a": float(p["a"]),
                "lambda": float(p["lambda"]),
                "w_coeffs": np.asarray(p["w_coeffs"], dtype=float),
                "residual_L2": float(p["residual_L2"]),
                "residual_history": [float(r) for r in p["residual_history"]],
            })
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise FormatError(f"{path}: corrupt record at line {i}: {e}") \
                from None
    if not points:
        raise FormatError(f"{path}: branch file has no points")
    return header, points


def load_levelsets(path: str):
    """levelsets.csv -> {level_s: (n, 2) polyline array}, insertion order."""
    curves: dict[float, list] = {}
    with open(_require(path)) as fh:
        reader = csv.reader(fh)
        head = next(reader, None)
        if head != ["level_s", "alpha", "x", "y"]:
            raise FormatError(f"{path}: expected header level_s,alpha,x,y, "
                              f"got {head}")
        for i, row in enumerate(reader, start=2):
            try:
                s, _, x, y = (float(v) for v in row)
            except (ValueError, TypeError):
                raise FormatError(f"{path}: bad row at line {i}: {row}") \
                    from None
            curves.setdefault(s, []).append((x, y))
    if not curves:
        raise FormatError(f"{path}: no level-set points")
    return {s: np.asarray(pts) for s, pts in curves.items()}


def load_diagnostics(path: str) -> dict:
    try:
        with open(_require(path)) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: corrupt JSON: {e}") from None
    if not isinstance(d, dict):
        raise FormatError(f"{path}: diagnostics must be a JSON object")
    return d


def load_raster(path: str):
    """Raster file -> (array, extent).

    `path` is either the CSV raster (extent taken from diagnostics.json
    next to it, if present) or the raw binary with its `.json` sidecar.
    """
    _require(path)
    if path.endswith(".csv"):
        try:
            ras = np.loadtxt(path, delimiter=",")
        except ValueError as e:
            raise FormatError(f"{path}: unreadable raster: {e}") from None
        extent = None
        diag = os.path.join(os.path.dirname(path), "diagnostics.json")
        if os.path.isfile(diag):
            extent = load_diagnostics(diag).get("raster_extent")
    else:
        side = path + ".json"
        meta = load_diagnostics(side)
        for key in ("dtype", "shape", "extent"):
            if key not in meta:
                raise FormatError(f"{side}: missing key {key!r}")
        data = np.fromfile(path, dtype=meta["dtype"])
        if data.size != int(np.prod(meta["shape"])):
            raise FormatError(
                f"{path}: {data.size} values do not match sidecar shape "
                f"{meta['shape']}")
        ras = data.reshape(meta["shape"])
        extent = float(meta["extent"])
    if ras.ndim != 2:
        raise FormatError(f"{path}: raster must be two-dimensional")
    return ras, (float(extent) if extent is not None else 1.0)
