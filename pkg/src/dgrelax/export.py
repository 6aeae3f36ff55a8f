"""CSV and legacy VTK writers for runs and fields.

All floating-point values are written with 17 significant digits so that
reading a report back reproduces the numbers bit for bit.
"""
from __future__ import annotations

import csv
import dataclasses
import pathlib
from typing import Iterable, Sequence

import numpy as np

from .mesh import Mesh


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


def write_report_csv(records: Sequence, path: str | pathlib.Path) -> None:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not records:
        path.write_text("")
        return
    fields = dataclasses.fields(records[0])
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow([fld.name for fld in fields])
        for rec in records:
            row = []
            for fld in fields:
                v = getattr(rec, fld.name)
                row.append(fmt(v) if isinstance(v, float) else str(v))
            w.writerow(row)


def read_report_csv(path: str | pathlib.Path, record_type) -> list:
    """Rebuild records written by write_report_csv, coercing field types."""
    fields = {f.name: f.type for f in dataclasses.fields(record_type)}
    out = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        for row in reader:
            kwargs = {}
            for name, typ in fields.items():
                raw = row[name]
                if typ == "float":
                    kwargs[name] = float(raw)
                elif typ == "int":
                    kwargs[name] = int(raw)
                elif typ == "bool":
                    kwargs[name] = raw == "True"
                else:
                    kwargs[name] = raw
            out.append(record_type(**kwargs))
    return out


def write_trace_csv(result, path: str | pathlib.Path) -> None:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["iteration", "energy", "grad_inf", "step"])
        for i, (e, g, s) in enumerate(zip(result.trace_energy,
                                          result.trace_grad_inf,
                                          result.trace_step)):
            w.writerow([i, fmt(e), fmt(g), fmt(s)])


def write_fields_csv(rows: Iterable[dict], header: Sequence[str],
                     path: str | pathlib.Path) -> None:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(row[k]) if isinstance(row[k], float) else str(row[k])
                        for k in header])


def write_profile_csv(ts: np.ndarray, pts: np.ndarray, u_abs: np.ndarray,
                      path: str | pathlib.Path) -> None:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t", "x", "y", "u_abs"])
        for t, (x, y), u in zip(ts, pts, u_abs):
            w.writerow([fmt(t), fmt(x), fmt(y), fmt(u)])


def write_vtk(mesh: Mesh, cell_data: dict[str, np.ndarray],
              path: str | pathlib.Path, title: str = "dgrelax fields") -> None:
    """Legacy ASCII VTK unstructured grid with per-triangle scalars."""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    V, T = mesh.num_vertices, mesh.num_triangles
    lines = ["# vtk DataFile Version 3.0", title, "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {V} double"]
    lines.extend(f"{fmt(p[0])} {fmt(p[1])} 0" for p in mesh.vertices)
    lines.append(f"CELLS {T} {4 * T}")
    lines.extend(f"3 {a} {b} {c}" for a, b, c in mesh.triangles)
    lines.append(f"CELL_TYPES {T}")
    lines.extend("5" for _ in range(T))
    lines.append(f"CELL_DATA {T}")
    for name, values in cell_data.items():
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(fmt(v) for v in values)
    path.write_text("\n".join(lines) + "\n")
