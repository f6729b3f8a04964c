"""Legacy ASCII VTK output."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .mesh import Mesh

VTK_TRIANGLE = 5
VTK_LINE = 3


def _fmt(values) -> str:
    return "\n".join(f"{v:.9g}" for v in np.asarray(values, dtype=float))


def _grid(title, points, cells, cell_type, point_data) -> str:
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {len(points)} double"]
    lines += [f"{x:.9g} {y:.9g} 0" for x, y in points]
    width = cells.shape[1]
    lines.append(f"CELLS {len(cells)} {len(cells) * (width + 1)}")
    lines += [f"{width} " + " ".join(map(str, c)) for c in cells.tolist()]
    lines.append(f"CELL_TYPES {len(cells)}")
    lines += [str(cell_type)] * len(cells)
    lines.append(f"POINT_DATA {len(points)}")
    for name, values in point_data.items():
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default", _fmt(values)]
    return "\n".join(lines) + "\n"


def boundary_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + "_boundary" + path.suffix)


def write_vtk(mesh: Mesh, phi, P, P_gamma, path) -> tuple[Path, Path]:
    """Write bulk fields ``phi``, ``mu`` and a companion boundary file with ``mu_gamma``.

    The boundary file sits next to ``path`` with a ``_boundary`` suffix.
    """
    path = Path(path)
    nb = mesh.n_boundary_vertices
    path.write_text(_grid("chdyn bulk", mesh.vertices, mesh.cells, VTK_TRIANGLE,
                          {"phi": phi, "mu": P}))
    bpath = boundary_path(path)
    bpath.write_text(_grid("chdyn boundary", mesh.vertices[:nb], mesh.boundary_faces,
                           VTK_LINE, {"phi": np.asarray(phi)[:nb], "mu_gamma": P_gamma}))
    return path, bpath


def read_vtk(path) -> dict:
    """Minimal reader for files produced by :func:`write_vtk`."""
    tokens = Path(path).read_text().split("\n")
    out = {}
    i = 0
    while i < len(tokens):
        words = tokens[i].split()
        if words and words[0] == "POINTS":
            n = int(words[1])
            out["points"] = np.array([[float(t) for t in tokens[i + 1 + k].split()]
                                      for k in range(n)])
            i += n
        elif words and words[0] == "CELLS":
            m = int(words[1])
            out["cells"] = np.array([[int(t) for t in tokens[i + 1 + k].split()[1:]]
                                     for k in range(m)])
            i += m
        elif words and words[0] == "POINT_DATA":
            out["n_point_data"] = int(words[1])
        elif words and words[0] == "SCALARS":
            n = out["n_point_data"]
            out[words[1]] = np.array([float(t) for t in tokens[i + 2:i + 2 + n]])
            i += n + 1
        i += 1
    return out
