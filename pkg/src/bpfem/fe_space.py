"""Lagrange finite element spaces on the structured meshes.

P1-P3 on triangles and Q1-Q2 on parallelograms. Reference bases are built
from a monomial Vandermonde matrix over equispaced Lagrange nodes, so the
same code covers every supported degree.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.special import roots_jacobi, roots_legendre

from .mesh import Mesh, on_boundary

ScalarField = Callable[[np.ndarray, np.ndarray], np.ndarray]

MAX_QUADRATURE_DEGREE = 12
SNAP = 1e-12
ELEMENTS = {
    "p1": ("simplex", 1),
    "p2": ("simplex", 2),
    "p3": ("simplex", 3),
    "q1": ("tensor", 1),
    "q2": ("tensor", 2),
}


@dataclass(frozen=True)
class ElementSpec:
    family: str
    degree: int

    def __post_init__(self):
        if self.family not in ("simplex", "tensor"):
            raise ValueError(f"unknown element family {self.family!r}")
        top = 3 if self.family == "simplex" else 2
        if not 1 <= self.degree <= top:
            raise ValueError(f"degree {self.degree} not supported for {self.family} elements")

    @classmethod
    def from_name(cls, name: str) -> "ElementSpec":
        try:
            return cls(*ELEMENTS[name.lower()])
        except KeyError:
            raise ValueError(f"unknown element {name!r}; expected one of {sorted(ELEMENTS)}") from None

    @property
    def name(self) -> str:
        return ("p" if self.family == "simplex" else "q") + str(self.degree)

    @property
    def shape(self) -> str:
        return "triangle" if self.family == "simplex" else "quadrilateral"


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int


class ReferenceElement:
    """Lagrange basis on the reference triangle or unit square."""

    def __init__(self, spec: ElementSpec):
        self.spec = spec
        k = spec.degree
        if spec.family == "simplex":
            self.exponents = [(a, b) for a in range(k + 1) for b in range(k + 1 - a)]
            corners = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
            interior = [(i / k, j / k) for j in range(1, k) for i in range(1, k) if i + j < k]
        else:
            self.exponents = [(a, b) for a in range(k + 1) for b in range(k + 1)]
            corners = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
            interior = [(i / k, j / k) for j in range(1, k) for i in range(1, k)]
        nodes = list(corners)
        nc = len(corners)
        for e in range(nc):
            a, b = corners[e], corners[(e + 1) % nc]
            nodes.extend(a + (b - a) * t / k for t in range(1, k))
        nodes.extend(np.array(p) for p in interior)
        self.nodes = np.array(nodes)
        V = self._monomials(self.nodes)
        self.coefficients = np.linalg.inv(V)

    @property
    def n_local(self) -> int:
        return len(self.nodes)

    def _monomials(self, pts):
        x, y = pts[..., 0], pts[..., 1]
        return np.stack([x**a * y**b for a, b in self.exponents], axis=-1)

    def _monomial_grads(self, pts):
        x, y = pts[..., 0], pts[..., 1]
        dx = [a * x ** max(a - 1, 0) * y**b for a, b in self.exponents]
        dy = [b * x**a * y ** max(b - 1, 0) for a, b in self.exponents]
        return np.stack([np.stack(dx, axis=-1), np.stack(dy, axis=-1)], axis=-1)

    def values(self, pts) -> np.ndarray:
        """Basis values, shape ``pts.shape[:-1] + (n_local,)``."""
        return self._monomials(np.asarray(pts, dtype=float)) @ self.coefficients

    def gradients(self, pts) -> np.ndarray:
        """Reference gradients, shape ``pts.shape[:-1] + (n_local, 2)``."""
        g = self._monomial_grads(np.asarray(pts, dtype=float))
        return np.einsum("...md,mi->...id", g, self.coefficients)


@lru_cache(maxsize=None)
def reference_element(spec: ElementSpec) -> ReferenceElement:
    return ReferenceElement(spec)


def reference_basis(spec: ElementSpec, points) -> tuple[np.ndarray, np.ndarray]:
    """Values and reference gradients of the Lagrange basis at ``points``."""
    ref = reference_element(spec)
    return ref.values(points), ref.gradients(points)


@lru_cache(maxsize=None)
def _quadrature(shape: str, degree: int) -> QuadratureRule:
    if shape == "interval":
        n = degree // 2 + 1
        x, w = roots_legendre(n)
        return QuadratureRule((x + 1) / 2, w / 2, degree)
    if shape == "quadrilateral":
        n = degree // 2 + 1
        x, w = roots_legendre(n)
        x, w = (x + 1) / 2, w / 2
        X, Y = np.meshgrid(x, x, indexing="ij")
        return QuadratureRule(np.column_stack([X.ravel(), Y.ravel()]), np.outer(w, w).ravel(), degree)
    if shape == "triangle":
        if degree <= 2:
            pts = np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]])
            return QuadratureRule(pts, np.full(3, 1 / 6), degree)
        # collapsed (Duffy) Gauss-Jacobi rule
        n = degree // 2 + 1
        s, ws = roots_jacobi(n, 1.0, 0.0)  # weight (1 - s)
        t, wt = roots_legendre(n)
        s, ws = (s + 1) / 2, ws / 4
        t, wt = (t + 1) / 2, wt / 2
        S, T = np.meshgrid(s, t, indexing="ij")
        pts = np.column_stack([S.ravel(), ((1 - S) * T).ravel()])
        return QuadratureRule(pts, np.outer(ws, wt).ravel(), degree)
    raise ValueError(f"unknown reference shape {shape!r}")


def quadrature(shape: str, required_degree: int) -> QuadratureRule:
    """Gauss-type rule on ``triangle``, ``quadrilateral`` or ``interval``.

    Reference measures are 1/2, 1 and 1 respectively.
    """
    if required_degree < 0 or required_degree > MAX_QUADRATURE_DEGREE:
        raise ValueError(f"quadrature degree {required_degree} unsupported (max {MAX_QUADRATURE_DEGREE})")
    return _quadrature(shape, int(required_degree))


class DofMap:
    """Global numbering of the Lagrange nodes of one element on one mesh.

    Nodes are numbered lexicographically by ``(y, x)`` after snapping the
    coordinates to a ``1e-12`` lattice, which makes the numbering independent
    of the cell traversal order. For P1/Q1 this coincides with the vertex ids.
    """

    def __init__(self, mesh: Mesh, spec: ElementSpec):
        if spec.shape != mesh.kind:
            raise ValueError(f"element {spec.name} needs {spec.shape} cells, mesh has {mesh.kind} cells")
        self.mesh = mesh
        self.spec = spec
        self.element = reference_element(spec)
        phys = mesh.map_to_physical(
            np.arange(mesh.n_cells)[:, None], self.element.nodes[None, :, :]
        )
        flat = phys.reshape(-1, 2)
        keys = np.round(flat / SNAP).astype(np.int64)
        _, first, inverse = np.unique(keys[:, ::-1], axis=0, return_index=True, return_inverse=True)
        self.cell_dofs = inverse.ravel().reshape(mesh.n_cells, -1)
        self.coords = flat[first]
        self.boundary = on_boundary(self.coords)

    @property
    def n_dofs(self) -> int:
        return self.coords.shape[0]

    @property
    def n_interior(self) -> int:
        return int((~self.boundary).sum())

    @cached_property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary)

    @property
    def degree(self) -> int:
        return self.spec.degree

    @property
    def default_quadrature_degree(self) -> int:
        return 2 * self.spec.degree + 2

    def cell_quadrature(self, degree: int | None = None) -> QuadratureRule:
        return quadrature(self.spec.shape, self.default_quadrature_degree if degree is None else degree)

    def quadrature_points(self, rule: QuadratureRule, cells=slice(None)) -> np.ndarray:
        """Physical quadrature points, shape ``(n_cells, n_q, 2)``."""
        m = self.mesh
        return m.origins[cells][:, None, :] + np.einsum("cij,qj->cqi", m.jacobians[cells], rule.points)

    def physical_gradients(self, ref_grads: np.ndarray, cells=slice(None)) -> np.ndarray:
        """Map reference gradients ``(n_q, n_loc, 2)`` to ``(n_cells, n_q, n_loc, 2)``."""
        return np.einsum("qlb,cba->cqla", ref_grads, self.mesh.inv_jacobians[cells])

    def cell_chunks(self, size: int = 4096):
        n = self.mesh.n_cells
        for start in range(0, n, size):
            yield slice(start, min(start + size, n))

    def scatter_matrix(self, local: np.ndarray, cells=slice(None)) -> sp.csr_matrix:
        dofs = self.cell_dofs[cells]
        rows = np.repeat(dofs, dofs.shape[1], axis=1).ravel()
        cols = np.tile(dofs, (1, dofs.shape[1])).ravel()
        return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(self.n_dofs, self.n_dofs))


def build_dof_map(mesh: Mesh, spec: ElementSpec | str) -> DofMap:
    if isinstance(spec, str):
        spec = ElementSpec.from_name(spec)
    return DofMap(mesh, spec)


def _field_values(f: ScalarField, pts: np.ndarray) -> np.ndarray:
    vals = np.broadcast_to(np.asarray(f(pts[..., 0], pts[..., 1]), dtype=float), pts.shape[:-1])
    if not np.all(np.isfinite(vals)):
        raise ValueError("function returned non-finite values")
    return vals


def interpolate(dofmap: DofMap, f: ScalarField) -> np.ndarray:
    """Lagrange interpolant: the value of ``f`` at every global node."""
    return np.array(_field_values(f, dofmap.coords))


def mass_matrix(dofmap: DofMap, quad_degree: int | None = None) -> sp.csr_matrix:
    rule = dofmap.cell_quadrature(quad_degree)
    phi = dofmap.element.values(rule.points)
    local = np.einsum("q,qi,qj->ij", rule.weights, phi, phi)
    M = None
    for cells in dofmap.cell_chunks():
        det = np.abs(dofmap.mesh.dets[cells])
        part = dofmap.scatter_matrix(det[:, None, None] * local[None], cells)
        M = part if M is None else M + part
    return M.tocsr()


def load_vector(dofmap: DofMap, f: ScalarField, quad_degree: int | None = None) -> np.ndarray:
    """Entries ``(f, phi_i)`` for every global basis function."""
    rule = dofmap.cell_quadrature(quad_degree)
    phi = dofmap.element.values(rule.points)
    b = np.zeros(dofmap.n_dofs)
    for cells in dofmap.cell_chunks():
        fq = _field_values(f, dofmap.quadrature_points(rule, cells))
        det = np.abs(dofmap.mesh.dets[cells])
        local = np.einsum("c,q,cq,qi->ci", det, rule.weights, fq, phi)
        np.add.at(b, dofmap.cell_dofs[cells], local)
    return b


def l2_project(dofmap: DofMap, f: ScalarField) -> np.ndarray:
    """Coefficients of the L2-orthogonal projection of ``f`` onto the full space."""
    from .solver import solve_sparse

    return solve_sparse(mass_matrix(dofmap), load_vector(dofmap, f))


def evaluate(dofmap: DofMap, coeffs: np.ndarray, points, gradient: bool = False):
    """Evaluate the finite element function at physical points.

    Returns values of shape ``(n_points,)``; with ``gradient=True`` also the
    gradients, shape ``(n_points, 2)``.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    cells, ref = dofmap.mesh.locate_points(points)
    local = np.asarray(coeffs)[dofmap.cell_dofs[cells]]
    vals = np.einsum("pl,pl->p", dofmap.element.values(ref), local)
    if not gradient:
        return vals
    g_ref = dofmap.element.gradients(ref)
    g = np.einsum("plb,pba,pl->pa", g_ref, dofmap.mesh.inv_jacobians[cells], local)
    return vals, g


def l2_norm(dofmap: DofMap, coeffs: np.ndarray, quad_degree: int | None = None) -> float:
    """Exact (up to quadrature) L2 norm of a finite element function."""
    c = np.asarray(coeffs)
    return float(np.sqrt(max(c @ (mass_matrix(dofmap, quad_degree) @ c), 0.0)))
