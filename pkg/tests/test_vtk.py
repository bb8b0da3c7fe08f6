import numpy as np
import pytest

from bpfem import build_structured_mesh
from bpfem.fe_space import ELEMENTS, build_dof_map, interpolate
from bpfem.vtk_writer import VTK_QUAD, VTK_TRIANGLE, sub_cells, write_vtk


def mesh_for(el, N=3):
    return build_structured_mesh("quad" if el.startswith("q") else "tri-perturbed", N)


@pytest.mark.parametrize("el", sorted(ELEMENTS))
def test_sub_cells_tile_the_domain(el):
    dm = build_dof_map(mesh_for(el), el)
    cells, ctype = sub_cells(dm)
    k = dm.degree
    per_cell = k * k
    assert len(cells) == dm.mesh.n_cells * per_cell
    assert ctype == (VTK_QUAD if el.startswith("q") else VTK_TRIANGLE)
    p = dm.coords[cells]
    # shoelace area, positive for counter-clockwise cells
    x, y = p[..., 0], p[..., 1]
    area = 0.5 * np.sum(x * np.roll(y, -1, axis=1) - np.roll(x, -1, axis=1) * y, axis=1)
    assert np.all(area > 0)
    assert area.sum() == pytest.approx(1.0)
    assert set(np.unique(cells)) == set(range(dm.n_dofs))


def test_write_vtk_layout(tmp_path):
    dm = build_dof_map(mesh_for("p2"), "p2")
    u = interpolate(dm, lambda x, y: x + 2 * y)
    path = tmp_path / "f.vtk"
    write_vtk(path, dm, {"u_plus": u, "u_minus": 0 * u})
    lines = path.read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert lines[2:4] == ["ASCII", "DATASET UNSTRUCTURED_GRID"]
    assert lines[4] == f"POINTS {dm.n_dofs} double"
    n_cells = dm.mesh.n_cells * 4
    assert f"CELLS {n_cells} {n_cells * 4}" in lines
    assert f"POINT_DATA {dm.n_dofs}" in lines
    i = lines.index("SCALARS u_plus double 1")
    vals = np.array(lines[i + 2:i + 2 + dm.n_dofs], dtype=float)
    np.testing.assert_array_equal(vals, u)


def test_write_vtk_validation(tmp_path):
    dm = build_dof_map(mesh_for("q1"), "q1")
    with pytest.raises(ValueError):
        write_vtk(tmp_path / "a.vtk", dm, {"u": np.zeros(3)})
    with pytest.raises(ValueError):
        write_vtk(tmp_path / "a.vtk", dm, {"bad name": np.zeros(dm.n_dofs)})
