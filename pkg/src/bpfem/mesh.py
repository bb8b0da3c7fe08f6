"""Structured meshes of the unit square.

Four families are provided, all with ``N x N`` vertices on a uniform grid of
spacing ``h = 1/(N-1)``:

``tri-uniform``
    every square split by the diagonal running lower-left to upper-right.
``tri-alt``
    diagonals alternate in a checkerboard pattern (a symmetric mesh).
``tri-perturbed``
    ``tri-uniform`` with every interior vertex of odd parity ``(i + j)``
    shifted by ``0.45 h`` to the right. The result has obtuse triangles and
    non-Delaunay edge pairs.
``quad``
    the squares themselves.

Vertex ``(i, j)`` (column ``i``, row ``j``) has id ``j*N + i``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

FAMILIES = ("tri-alt", "tri-uniform", "tri-perturbed", "quad")
PERTURBATION = 0.45
GEOM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming mesh of triangles or parallelograms.

    Cells are stored counter-clockwise. Every cell is the affine image of a
    reference element: the triangle ``(0,0), (1,0), (0,1)`` or the square
    ``[0,1]^2`` with local vertices ``(0,0), (1,0), (1,1), (0,1)``.
    """

    vertices: np.ndarray
    cells: np.ndarray
    family: str
    N: int

    @property
    def kind(self) -> str:
        return "quadrilateral" if self.cells.shape[1] == 4 else "triangle"

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def h(self) -> float:
        """Grid spacing of the underlying lattice."""
        return 1.0 / (self.N - 1)

    # -- affine geometry ---------------------------------------------------
    @cached_property
    def origins(self) -> np.ndarray:
        return self.vertices[self.cells[:, 0]]

    @cached_property
    def jacobians(self) -> np.ndarray:
        """Per-cell matrices ``B`` with ``x = origin + B @ xi``."""
        v = self.vertices[self.cells]
        e1 = v[:, 1] - v[:, 0]
        e2 = v[:, -1] - v[:, 0]
        return np.stack([e1, e2], axis=2)

    @cached_property
    def dets(self) -> np.ndarray:
        B = self.jacobians
        return B[:, 0, 0] * B[:, 1, 1] - B[:, 0, 1] * B[:, 1, 0]

    @cached_property
    def inv_jacobians(self) -> np.ndarray:
        B = self.jacobians
        d = self.dets
        inv = np.empty_like(B)
        inv[:, 0, 0] = B[:, 1, 1] / d
        inv[:, 1, 1] = B[:, 0, 0] / d
        inv[:, 0, 1] = -B[:, 0, 1] / d
        inv[:, 1, 0] = -B[:, 1, 0] / d
        return inv

    @cached_property
    def areas(self) -> np.ndarray:
        """Signed cell areas (positive for counter-clockwise cells)."""
        v = self.vertices[self.cells]
        x, y = v[..., 0], v[..., 1]
        return 0.5 * np.sum(x * np.roll(y, -1, axis=1) - np.roll(x, -1, axis=1) * y, axis=1)

    @cached_property
    def diameters(self) -> np.ndarray:
        """Largest vertex-to-vertex distance of each cell."""
        v = self.vertices[self.cells]
        diff = v[:, :, None, :] - v[:, None, :, :]
        return np.sqrt((diff**2).sum(axis=-1)).max(axis=(1, 2))

    @cached_property
    def min_edges(self) -> np.ndarray:
        v = self.vertices[self.cells]
        return np.linalg.norm(np.roll(v, -1, axis=1) - v, axis=-1).min(axis=1)

    def cell_sizes(self, measure: str = "diameter") -> np.ndarray:
        if measure == "diameter":
            return self.diameters
        if measure == "min-edge":
            return self.min_edges
        raise ValueError(f"unknown cell size measure {measure!r}")

    def map_to_physical(self, cell_ids, ref) -> np.ndarray:
        cell_ids = np.asarray(cell_ids)
        ref = np.asarray(ref, dtype=float)
        return self.origins[cell_ids] + np.einsum("...ij,...j->...i", self.jacobians[cell_ids], ref)

    def map_to_reference(self, cell_ids, points) -> np.ndarray:
        cell_ids = np.asarray(cell_ids)
        points = np.asarray(points, dtype=float)
        return np.einsum("...ij,...j->...i", self.inv_jacobians[cell_ids], points - self.origins[cell_ids])

    def contains_reference(self, ref, tol: float = GEOM_TOL) -> np.ndarray:
        xi, eta = ref[..., 0], ref[..., 1]
        if self.kind == "triangle":
            return (xi >= -tol) & (eta >= -tol) & (xi + eta <= 1.0 + tol)
        return (xi >= -tol) & (eta >= -tol) & (xi <= 1.0 + tol) & (eta <= 1.0 + tol)

    # -- facets --------------------------------------------------------------
    @cached_property
    def _facet_data(self):
        nloc = self.cells.shape[1]
        local = np.stack([self.cells, np.roll(self.cells, -1, axis=1)], axis=2).reshape(-1, 2)
        owner = np.repeat(np.arange(self.n_cells), nloc)
        key = np.sort(local, axis=1)
        uniq, first, inverse, counts = np.unique(
            key, axis=0, return_index=True, return_inverse=True, return_counts=True
        )
        inverse = inverse.ravel()
        if counts.max() > 2:
            raise ValueError("non-manifold mesh: a facet is shared by more than two cells")
        facet_cells = np.full((len(uniq), 2), -1, dtype=np.int64)
        order = np.lexsort((owner, inverse))
        inv_sorted = inverse[order]
        owner_sorted = owner[order]
        start = np.searchsorted(inv_sorted, np.arange(len(uniq)))
        facet_cells[:, 0] = owner_sorted[start]
        two = counts == 2
        facet_cells[two, 1] = owner_sorted[start[two] + 1]
        # endpoints in the orientation of the first (lower id) cell
        facets = local[order][start]
        return facets, facet_cells

    @property
    def facets(self) -> np.ndarray:
        """Facet endpoint vertex ids, shape ``(n_facets, 2)``."""
        return self._facet_data[0]

    @property
    def facet_cells(self) -> np.ndarray:
        """Adjacent cells ``(left, right)``; ``right = -1`` on the boundary.

        The left cell always has the lower id.
        """
        return self._facet_data[1]

    @cached_property
    def interior_facets(self) -> np.ndarray:
        return np.flatnonzero(self.facet_cells[:, 1] >= 0)

    @cached_property
    def boundary_facets(self) -> np.ndarray:
        return np.flatnonzero(self.facet_cells[:, 1] < 0)

    @cached_property
    def facet_lengths(self) -> np.ndarray:
        a, b = self.vertices[self.facets[:, 0]], self.vertices[self.facets[:, 1]]
        return np.linalg.norm(b - a, axis=1)

    @cached_property
    def facet_normals(self) -> np.ndarray:
        """Unit normals pointing out of the left (lower id) cell."""
        a, b = self.vertices[self.facets[:, 0]], self.vertices[self.facets[:, 1]]
        t = b - a
        # counter-clockwise cells: the outward normal is the tangent turned clockwise
        n = np.stack([t[:, 1], -t[:, 0]], axis=1)
        return n / np.linalg.norm(n, axis=1)[:, None]

    @cached_property
    def boundary_vertex_mask(self) -> np.ndarray:
        return on_boundary(self.vertices)

    # -- point location ------------------------------------------------------
    @cached_property
    def _buckets(self):
        nb = self.N - 1
        v = self.vertices[self.cells]
        lo = np.clip(np.floor(v.min(axis=1) * nb - 1e-9).astype(int), 0, nb - 1)
        hi = np.clip(np.floor(v.max(axis=1) * nb + 1e-9).astype(int), 0, nb - 1)
        lists = [[] for _ in range(nb * nb)]
        for c in range(self.n_cells):
            for bj in range(lo[c, 1], hi[c, 1] + 1):
                for bi in range(lo[c, 0], hi[c, 0] + 1):
                    lists[bj * nb + bi].append(c)
        width = max(len(cands) for cands in lists)
        table = np.full((nb * nb, width), -1, dtype=np.int64)
        for k, cands in enumerate(lists):
            table[k, : len(cands)] = cands
        return table

    def _candidates(self, points: np.ndarray) -> np.ndarray:
        nb = self.N - 1
        b = np.clip(np.floor(points * nb).astype(int), 0, nb - 1)
        return self._buckets[b[:, 1] * nb + b[:, 0]]

    def locate_points(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised :func:`locate_point`."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        _check_in_domain(points)
        cand = self._candidates(points)
        valid = cand >= 0
        safe = np.where(valid, cand, 0)
        ref = self.map_to_reference(safe, points[:, None, :])
        inside = valid & self.contains_reference(ref)
        if not inside.any(axis=1).all():
            bad = points[~inside.any(axis=1)][0]
            raise RuntimeError(f"point location failed for {bad}")
        first = inside.argmax(axis=1)
        rows = np.arange(len(points))
        return cand[rows, first], ref[rows, first]

    def cells_containing(self, point) -> np.ndarray:
        point = np.asarray(point, dtype=float).reshape(1, 2)
        _check_in_domain(point)
        cand = self._candidates(point)[0]
        cand = cand[cand >= 0]
        ref = self.map_to_reference(cand, np.broadcast_to(point, (len(cand), 2)))
        return np.sort(cand[self.contains_reference(ref)])

    # -- quality -------------------------------------------------------------
    def angles(self) -> np.ndarray:
        """Interior angles in radians, shape ``(n_cells, n_local_vertices)``."""
        v = self.vertices[self.cells]
        prev = np.roll(v, 1, axis=1) - v
        nxt = np.roll(v, -1, axis=1) - v
        cos = (prev * nxt).sum(-1) / (np.linalg.norm(prev, axis=-1) * np.linalg.norm(nxt, axis=-1))
        return np.arccos(np.clip(cos, -1.0, 1.0))

    def delaunay_violations(self, tol: float = 1e-12) -> int:
        """Interior edges whose two opposite angles sum to more than pi."""
        if self.kind != "triangle":
            return 0
        ang = self.angles()
        count = 0
        for f in self.interior_facets:
            total = 0.0
            edge = set(self.facets[f])
            for c in self.facet_cells[f]:
                local = [k for k, vid in enumerate(self.cells[c]) if vid not in edge]
                total += ang[c, local[0]]
            if total > np.pi + tol:
                count += 1
        return count


def on_boundary(points, tol: float = GEOM_TOL) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    x, y = p[..., 0], p[..., 1]
    return (np.abs(x) <= tol) | (np.abs(1 - x) <= tol) | (np.abs(y) <= tol) | (np.abs(1 - y) <= tol)


def _check_in_domain(points: np.ndarray, tol: float = GEOM_TOL) -> None:
    outside = (points < -tol) | (points > 1 + tol)
    if outside.any():
        bad = points[outside.any(axis=1)][0]
        raise ValueError(f"point {tuple(bad)} lies outside the closed unit square")


def build_structured_mesh(family: str, N: int) -> Mesh:
    """Build one of the four structured mesh families with ``N`` points per side."""
    if family not in FAMILIES:
        raise ValueError(f"unknown mesh family {family!r}; expected one of {FAMILIES}")
    if int(N) != N or N < 3:
        raise ValueError(f"N must be an integer >= 3, got {N}")
    N = int(N)
    h = 1.0 / (N - 1)
    t = np.linspace(0.0, 1.0, N)
    X, Y = np.meshgrid(t, t)  # row j, column i
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    I, J = np.meshgrid(np.arange(N - 1), np.arange(N - 1))
    I, J = I.ravel(), J.ravel()
    ll = J * N + I
    lr = ll + 1
    ul = ll + N
    ur = ul + 1

    if family == "quad":
        cells = np.column_stack([ll, lr, ur, ul])
    else:
        if family == "tri-alt":
            flip = (I + J) % 2 == 1
        else:
            flip = np.zeros_like(I, dtype=bool)
        # unflipped: diagonal ll-ur; flipped: diagonal lr-ul
        t1 = np.where(flip[:, None], np.column_stack([ll, lr, ul]), np.column_stack([ll, lr, ur]))
        t2 = np.where(flip[:, None], np.column_stack([lr, ur, ul]), np.column_stack([ll, ur, ul]))
        cells = np.stack([t1, t2], axis=1).reshape(-1, 3)

    if family == "tri-perturbed":
        i = np.arange(N * N) % N
        j = np.arange(N * N) // N
        interior = (i > 0) & (i < N - 1) & (j > 0) & (j < N - 1)
        shift = interior & ((i + j) % 2 == 1)
        vertices = vertices.copy()
        vertices[shift, 0] += PERTURBATION * h

    mesh = Mesh(vertices=vertices, cells=cells.astype(np.int64), family=family, N=N)
    assert np.all(mesh.areas > 0), "non-positive cell area"
    return mesh


def mesh_function(mesh: Mesh, cell_size: str = "diameter") -> np.ndarray:
    """Per-vertex average of the sizes of the adjacent cells.

    ``cell_size`` selects the size measure: ``"diameter"`` or ``"min-edge"``.
    """
    sizes = mesh.cell_sizes(cell_size)
    total = np.zeros(mesh.n_vertices)
    count = np.zeros(mesh.n_vertices)
    for k in range(mesh.cells.shape[1]):
        np.add.at(total, mesh.cells[:, k], sizes)
        np.add.at(count, mesh.cells[:, k], 1.0)
    return total / count


def vertex_patch(mesh: Mesh, point) -> np.ndarray:
    """Ids of all cells whose closure contains ``point``."""
    return mesh.cells_containing(point)


def locate_point(mesh: Mesh, point) -> tuple[int, np.ndarray]:
    """Containing cell (lowest id on ties) and reference coordinates of ``point``."""
    cells, ref = mesh.locate_points(np.asarray(point, dtype=float).reshape(1, 2))
    return int(cells[0]), ref[0]
