"""CSV tables and legacy-VTK snapshots."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .bernstein import eval_bernstein, reference_vertices
from .mesh import Mesh
from .quadrature import cart_to_bary


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_csv(rows: list[dict], path) -> Path:
    """Write ``rows`` with a header; floats use ``%.17g``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fields = list(rows[0]) if rows else []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(fields)
        for r in rows:
            w.writerow([_fmt(r[k]) for k in fields])
    return path


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


_VTK_CELL = {2: 5, 3: 10}


def write_vtk(mesh: Mesh, fields: dict, N: int, path) -> Path:
    """Legacy ASCII unstructured grid with degree-``N`` fields at element vertices.

    Vertices are duplicated per element so discontinuous data is kept as is.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    d, K = mesh.dim, mesh.K
    V = eval_bernstein(N, d, cart_to_bary(reference_vertices(d)))
    pts = mesh.element_vertices().reshape(-1, d)
    if d == 2:
        pts = np.column_stack([pts, np.zeros(len(pts))])
    nv = d + 1
    lines = ["# vtk DataFile Version 2.0", "bbwadg snapshot", "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {len(pts)} double"]
    lines += [" ".join("%.17g" % c for c in p) for p in pts]
    lines.append(f"CELLS {K} {K * (nv + 1)}")
    lines += [" ".join(map(str, [nv] + list(range(k * nv, (k + 1) * nv)))) for k in range(K)]
    lines.append(f"CELL_TYPES {K}")
    lines += [str(_VTK_CELL[d])] * K
    lines.append(f"POINT_DATA {len(pts)}")
    for name, coeffs in fields.items():
        vals = (V @ coeffs).T.reshape(-1)
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += ["%.17g" % v for v in vals]
    path.write_text("\n".join(lines) + "\n")
    return path

