"""Output writers: probe CSVs, structured-grid snapshots, timing tables and run manifests."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

__all__ = [
    "PROBE_COLUMNS",
    "MissingColumnError",
    "write_probe_csv",
    "read_probe_csv",
    "read_table",
    "write_table",
    "write_vtk",
    "write_timings",
    "write_reports",
    "write_manifest",
]

PROBE_COLUMNS = ("t", "eta", "phi_eta", "w_eta")


class MissingColumnError(KeyError):
    def __init__(self, path, column):
        super().__init__(f"{path}: missing column {column!r}")
        self.column = column


def _fmt(v):
    # shortest repr that round-trips; keeps files bitwise reproducible
    return repr(float(v))


def write_table(path, header, rows):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(header)
        for row in rows:
            out.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return Path(path)


def read_table(path, required=()):
    """Read a CSV with a header into a dict of arrays (numeric where possible)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumnError(path, required[0] if required else "header") from None
        rows = list(reader)
    for col in required:
        if col not in header:
            raise MissingColumnError(path, col)
    cols = {}
    for j, name in enumerate(header):
        values = [r[j] for r in rows]
        try:
            cols[name] = np.array(values, dtype=float)
        except ValueError:
            cols[name] = np.array(values, dtype=object)
    return cols


def write_probe_csv(path, t, eta, phi_eta, w_eta):
    return write_table(path, PROBE_COLUMNS, zip(t, eta, phi_eta, w_eta))


def read_probe_csv(path):
    return read_table(path, required=PROBE_COLUMNS)


def write_vtk(path, volume, point_data, title="wavesem snapshot"):
    """Legacy ASCII VTK STRUCTURED_GRID of the volume mesh.

    Points are ordered level by level with x fastest; `point_data` maps
    names to arrays over volume DoFs.
    """
    ncol = volume.surface.ndof
    nlev = volume.n_levels
    order = (np.arange(ncol)[None, :] * nlev + np.arange(nlev)[:, None]).ravel()
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{title}\nASCII\nDATASET STRUCTURED_GRID\n")
        fh.write(f"DIMENSIONS {ncol} {nlev} 1\n")
        fh.write(f"POINTS {ncol * nlev} double\n")
        for i in order:
            fh.write(f"{_fmt(volume.x[i])} {_fmt(volume.z[i])} 0\n")
        fh.write(f"POINT_DATA {ncol * nlev}\n")
        for name, values in point_data.items():
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            v = np.asarray(values)[order]
            fh.write("\n".join(_fmt(a) for a in v))
            fh.write("\n")
    return Path(path)


def write_timings(path, timers):
    shares = timers.shares()
    rows = [(name, calls, total, mean, shares[name]) for name, calls, total, mean in timers.rows()]
    return write_table(path, ("routine", "calls", "total_s", "mean_s", "share"), rows)


def write_reports(path, reports):
    from .solver import SolveReport

    return write_table(path, SolveReport.CSV_FIELDS, (r.as_row() for r in reports))


def write_manifest(path, manifest):
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return Path(path)
