"""Reading and writing fields, trajectories and configs."""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError
from .spatial import Field, Grid

__all__ = [
    "write_fields_csv",
    "read_fields_csv",
    "field_to_json",
    "field_from_json",
    "write_snapshot_csv",
    "read_snapshot_csv",
    "load_mapping",
    "time_tag",
]


def write_fields_csv(path, snapshots, L: float):
    """Wide format: a header ``t, x_0, ..., x_{N-1}`` then one row per (t, field).

    The header carries the cell-centre coordinates after the ``t`` column
    and a leading comment line records L so the grid can be rebuilt.
    """
    snapshots = list(snapshots)
    if not snapshots:
        raise ValueError("no snapshots to write")
    grid = snapshots[0][1].grid
    with open(path, "w", newline="") as fh:
        fh.write(f"# L={grid.L!r} N={grid.N}\n")
        w = csv.writer(fh)
        w.writerow(["t"] + [repr(float(x)) for x in grid.x])
        for t, f in snapshots:
            w.writerow([repr(float(t))] + [repr(float(v)) for v in f.values])


def read_fields_csv(path):
    with open(path) as fh:
        head = fh.readline()
        if not head.startswith("#"):
            raise ValueError(f"{path}: missing grid comment line")
        meta = dict(kv.split("=") for kv in head[1:].split())
        grid = Grid(float(meta["L"]), int(meta["N"]))
        rows = list(csv.reader(fh))
    out = []
    for row in rows[1:]:
        vals = np.array([float(v) for v in row])
        out.append((vals[0], Field(vals[1:], grid)))
    return out


def field_to_json(f: Field, t: float = 0.0) -> str:
    return json.dumps({"t": float(t), "L": f.grid.L, "N": f.grid.N, "values": f.values.tolist()})


def field_from_json(text: str):
    d = json.loads(text)
    grid = Grid(float(d["L"]), int(d["N"]))
    return float(d.get("t", 0.0)), Field(np.asarray(d["values"], dtype=float), grid)


def time_tag(t: float) -> str:
    """File-name friendly time stamp, e.g. 4.5 -> '4.5', 100 -> '100'."""
    return f"{float(t):g}"


def write_snapshot_csv(path, f: Field):
    """Long format with columns ``x, u``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "u"])
        for x, v in zip(f.grid.x, f.values):
            w.writerow([repr(float(x)), repr(float(v))])


def read_snapshot_csv(path, L: float) -> Field:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Field(data[:, 1], Grid(L, data.shape[0]))


def load_mapping(path) -> dict:
    """Load a YAML or JSON config file into a dict."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {os.fspath(path)}")
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data
