"""Legacy ASCII VTK output of nodal finite element fields.

Higher-order cells are split into linear sub-cells through their Lagrange
nodes, so every dof becomes a VTK point and viewers interpolate linearly
between nodes.
"""
from __future__ import annotations

import numpy as np

from .fe_space import DofMap

VTK_TRIANGLE = 5
VTK_QUAD = 9


def _lattice(dofmap: DofMap) -> dict:
    k = dofmap.degree
    ij = np.rint(dofmap.element.nodes * k).astype(int)
    return {(int(i), int(j)): n for n, (i, j) in enumerate(ij)}


def sub_cells(dofmap: DofMap) -> tuple[np.ndarray, int]:
    """Linear sub-cells as global dof indices, and their VTK cell type."""
    k = dofmap.degree
    at = _lattice(dofmap)
    local = []
    if dofmap.mesh.kind == "triangle":
        for j in range(k):
            for i in range(k - j):
                local.append((at[i, j], at[i + 1, j], at[i, j + 1]))
                if i + j + 2 <= k:
                    local.append((at[i + 1, j], at[i + 1, j + 1], at[i, j + 1]))
        ctype = VTK_TRIANGLE
    else:
        for j in range(k):
            for i in range(k):
                local.append((at[i, j], at[i + 1, j], at[i + 1, j + 1], at[i, j + 1]))
        ctype = VTK_QUAD
    local = np.asarray(local)
    cells = dofmap.cell_dofs[:, local].reshape(-1, local.shape[1])
    return cells, ctype


def write_vtk(path, dofmap: DofMap, fields: dict, title: str = "bpfem field") -> None:
    """Write nodal ``fields`` (name -> coefficient vector) as an unstructured grid."""
    cells, ctype = sub_cells(dofmap)
    pts = dofmap.coords
    n = len(pts)
    for name, values in fields.items():
        if np.shape(values) != (n,):
            raise ValueError(f"field {name!r} has shape {np.shape(values)}, expected ({n},)")
        if " " in name:
            raise ValueError("VTK field names cannot contain spaces")
    nv = cells.shape[1]
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(title.replace("\n", " ")[:255] + "\n")
        fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {n} double\n")
        for x, y in pts:
            fh.write(f"{x:.16e} {y:.16e} 0\n")
        fh.write(f"CELLS {len(cells)} {len(cells) * (nv + 1)}\n")
        for c in cells:
            fh.write(f"{nv} " + " ".join(map(str, c)) + "\n")
        fh.write(f"CELL_TYPES {len(cells)}\n")
        fh.write(f"{ctype}\n" * len(cells))
        if fields:
            fh.write(f"POINT_DATA {n}\n")
        for name, values in fields.items():
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            for v in np.asarray(values, dtype=float):
                fh.write(f"{v:.16e}\n")
