"""Bilinear and linear forms of the bound-preserving method.

Coefficient fields are plain callables taking coordinate arrays ``x, y`` of
any (common) shape:

* ``diffusion(x, y)`` returns ``shape + (2, 2)``,
* ``convection(x, y)`` returns ``shape + (2,)``,
* ``source(x, y)`` and ``boundary(x, y)`` return ``shape``,
* ``dirichlet(x, y)`` returns a boolean mask selecting Dirichlet boundary
  points (everything else on the boundary is a homogeneous Neumann part).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .fe_space import (
    DofMap,
    ElementSpec,
    build_dof_map,
    load_vector,
    mass_matrix,
    quadrature,
    reference_element,
)
from .mesh import Mesh, mesh_function

VARIANTS = ("normal", "upwind", "none")
BETA_NORMS = ("euclidean", "max")
FACET_SIZES = ("length", "diameter")
CELL_SIZES = ("diameter", "min-edge")


def _everywhere(x, y):
    return np.ones(np.shape(x), dtype=bool)


def _zero(x, y):
    return np.zeros(np.shape(x))


@dataclass
class ProblemSpec:
    """Steady convection-diffusion-reaction problem on the unit square."""

    diffusion: Callable
    convection: Callable
    reaction: float = 0.0
    source: Callable = _zero
    boundary: Callable = _zero
    kappa: float = 1.0
    dirichlet: Callable = _everywhere
    name: str = "problem"

    def __post_init__(self):
        if self.reaction < 0:
            raise ValueError("reaction coefficient must be nonnegative")
        if not np.isfinite(self.kappa) or self.kappa < 0:
            raise ValueError("kappa must be finite and nonnegative")

    def min_diffusion_eigenvalue(self, n: int = 101) -> float:
        t = np.linspace(0.0, 1.0, n)
        X, Y = np.meshgrid(t, t)
        D = np.asarray(self.diffusion(X, Y))
        return float(np.linalg.eigvalsh(0.5 * (D + np.swapaxes(D, -1, -2))).min())


@dataclass(frozen=True)
class StabConfig:
    """Stabilization parameters and the size/norm conventions behind them.

    ``beta_norm`` is the pointwise norm of the convective field in both the
    penalty and the ``s`` form (``"max"`` = largest absolute component).
    ``facet_size`` is the ``h_F`` of the penalty: the facet length or the
    mean diameter of the two adjacent cells. ``cell_size`` is the cell
    measure averaged into the nodal mesh function.
    """

    variant: str = "normal"
    gamma: float = 0.0
    gamma_beta: float = 0.0
    alpha: float = 1.0
    beta_norm: str = "euclidean"
    facet_size: str = "diameter"
    cell_size: str = "diameter"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown CIP variant {self.variant!r}")
        for name, allowed in (("beta_norm", BETA_NORMS), ("facet_size", FACET_SIZES), ("cell_size", CELL_SIZES)):
            if getattr(self, name) not in allowed:
                raise ValueError(f"{name} must be one of {allowed}")
        for name in ("gamma", "gamma_beta", "alpha"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and nonnegative")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")


def pointwise_norm(beta: np.ndarray, kind: str = "euclidean") -> np.ndarray:
    if kind == "euclidean":
        return np.linalg.norm(beta, axis=-1)
    if kind == "max":
        return np.abs(beta).max(axis=-1)
    raise ValueError(f"unknown norm {kind!r}")


def _sample(fn, pts, tail=()):
    vals = np.asarray(fn(pts[..., 0], pts[..., 1]), dtype=float)
    vals = np.broadcast_to(vals, pts.shape[:-1] + tail)
    if not np.all(np.isfinite(vals)):
        raise ValueError("coefficient field returned non-finite values")
    return vals


def assemble_galerkin(problem: ProblemSpec, dofmap: DofMap, quad_degree: int | None = None):
    """Galerkin matrix over all dofs and the load vector.

    ``A[i, j] = (D grad phi_j, grad phi_i) + (beta . grad phi_j, phi_i) + mu (phi_j, phi_i)``.
    """
    rule = dofmap.cell_quadrature(quad_degree)
    el = dofmap.element
    phi = el.values(rule.points)
    dphi = el.gradients(rule.points)
    mass_local = np.einsum("q,qi,qj->ij", rule.weights, phi, phi)
    A = None
    for cells in dofmap.cell_chunks():
        xq = dofmap.quadrature_points(rule, cells)
        D = _sample(problem.diffusion, xq, (2, 2))
        beta = _sample(problem.convection, xq, (2,))
        G = dofmap.physical_gradients(dphi, cells)
        wdet = np.abs(dofmap.mesh.dets[cells])[:, None] * rule.weights[None, :]
        local = np.einsum("cq,cqab,cqjb,cqia->cij", wdet, D, G, G, optimize=True)
        local += np.einsum("cq,cqa,cqja,qi->cij", wdet, beta, G, phi, optimize=True)
        if problem.reaction:
            local += problem.reaction * np.abs(dofmap.mesh.dets[cells])[:, None, None] * mass_local
        part = dofmap.scatter_matrix(local, cells)
        A = part if A is None else A + part
    F = load_vector(dofmap, problem.source, quad_degree)
    return A.tocsr(), F


def _facet_sides(dofmap: DofMap, facets: np.ndarray, rule):
    """Quadrature points and physical basis gradients on both sides of facets."""
    mesh = dofmap.mesh
    a = mesh.vertices[mesh.facets[facets, 0]]
    b = mesh.vertices[mesh.facets[facets, 1]]
    xq = a[:, None, :] + rule.points[None, :, None] * (b - a)[:, None, :]
    grads = []
    for side in (0, 1):
        cells = mesh.facet_cells[facets, side]
        ref = mesh.map_to_reference(cells[:, None], xq)
        g_ref = dofmap.element.gradients(ref)
        grads.append(np.einsum("fqlb,fba->fqla", g_ref, mesh.inv_jacobians[cells]))
    return xq, grads


def _cip_blocks(dofmap: DofMap, convection: Callable, stab: StabConfig, quad_degree: int | None, chunk: int):
    """Weighted jump operators of the interior facets, chunk by chunk.

    Yields ``(dofs, B)`` where ``B[f, q, c, i]`` maps the local coefficients
    ``dofs[f]`` to component ``c`` of the penalized jump at quadrature point
    ``q``, scaled so that ``J(u, u) = sum |B u|^2``.
    """
    if stab.variant == "none":
        raise ValueError("CIP assembly requested with variant 'none'")
    mesh = dofmap.mesh
    rule = quadrature("interval", dofmap.default_quadrature_degree if quad_degree is None else quad_degree)
    interior = mesh.interior_facets
    coef_scale = stab.gamma if stab.variant == "normal" else stab.gamma_beta
    if coef_scale == 0.0 or len(interior) == 0:
        return
    for start in range(0, len(interior), chunk):
        facets = interior[start:start + chunk]
        xq, (gl, gr) = _facet_sides(dofmap, facets, rule)
        jump = np.concatenate([gl, -gr], axis=2)
        beta = _sample(convection, xq, (2,))
        beta_inf = pointwise_norm(beta, stab.beta_norm).max(axis=1)
        cells = mesh.facet_cells[facets]
        if stab.facet_size == "length":
            hF = mesh.facet_lengths[facets]
        else:
            hF = mesh.diameters[cells].mean(axis=1)
        wq = rule.weights[None, :] * mesh.facet_lengths[facets][:, None]
        if stab.variant == "normal":
            coef = stab.gamma * beta_inf * hF**2
            B = np.transpose(jump, (0, 1, 3, 2))
        else:
            with np.errstate(divide="ignore"):
                coef = np.where(beta_inf > 0, stab.gamma_beta * hF**2 / beta_inf, 0.0)
            B = np.einsum("fqa,fqia->fqi", beta, jump)[:, :, None, :]
        B = B * np.sqrt(coef[:, None] * wq)[:, :, None, None]
        dofs = np.concatenate([dofmap.cell_dofs[cells[:, 0]], dofmap.cell_dofs[cells[:, 1]]], axis=1)
        yield dofs, B


def assemble_cip(dofmap: DofMap, convection: Callable, stab: StabConfig, quad_degree: int | None = None,
                 chunk: int = 4096) -> sp.csr_matrix:
    """Continuous interior penalty matrix on the interior facets.

    ``normal``: ``gamma * |beta|_F * h_F^2 * int_F [grad u] . [grad v]``.
    ``upwind``: ``gamma_beta / |beta|_F * h_F^2 * int_F [beta . grad u] [beta . grad v]``;
    facets with ``|beta|_F = 0`` contribute nothing.
    ``|beta|_F`` is the largest pointwise norm (``stab.beta_norm``) of beta
    over the facet quadrature points; ``h_F`` follows ``stab.facet_size``.
    """
    n = dofmap.n_dofs
    J = sp.csr_matrix((n, n))
    for dofs, B in _cip_blocks(dofmap, convection, stab, quad_degree, chunk):
        local = np.einsum("fqci,fqcj->fij", B, B, optimize=True)
        nl = dofs.shape[1]
        rows = np.repeat(dofs, nl, axis=1).ravel()
        cols = np.tile(dofs, (1, nl)).ravel()
        J = J + sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))
    return J.tocsr()


def cip_energy(dofmap: DofMap, u, convection: Callable, stab: StabConfig, quad_degree: int | None = None,
               chunk: int = 4096) -> float:
    """``J(u, u)`` summed from squared facet jumps.

    Agrees with ``u @ J @ u`` but avoids the cancellation of that quadratic
    form when ``u`` is large and its jumps are small.
    """
    if stab.variant == "none":
        return 0.0
    u = np.asarray(u, dtype=float)
    total = 0.0
    for dofs, B in _cip_blocks(dofmap, convection, stab, quad_degree, chunk):
        total += float(np.sum(np.einsum("fqci,fi->fqc", B, u[dofs]) ** 2))
    return total


def nodal_mesh_function(dofmap: DofMap, hfun: np.ndarray | None = None) -> np.ndarray:
    """Mesh function at every Lagrange node.

    Vertex values are the cell-diameter averages; other nodes get the
    piecewise linear (bilinear on quads) interpolant of those values.
    """
    mesh = dofmap.mesh
    if hfun is None:
        hfun = mesh_function(mesh)
    linear = reference_element(ElementSpec(dofmap.spec.family, 1))
    weights = linear.values(dofmap.element.nodes)
    local = hfun[mesh.cells] @ weights.T
    out = np.empty(dofmap.n_dofs)
    out[dofmap.cell_dofs] = local
    return out


def assemble_s_diag(dofmap: DofMap, problem: ProblemSpec, hfun: np.ndarray | None = None,
                    alpha: float = 1.0, beta_norm: str = "euclidean") -> np.ndarray:
    """Diagonal weights of the stabilization form ``s`` for every dof.

    ``sigma_i = alpha * (|D|_{w_i} + |beta|_{w_i} h_i + mu h_i^2)`` where the
    patch suprema are sampled at cell quadrature points, ``|D|`` is the largest
    absolute tensor entry and ``|beta|`` the pointwise ``beta_norm``.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    rule = dofmap.cell_quadrature()
    dmax = np.empty(dofmap.mesh.n_cells)
    bmax = np.empty(dofmap.mesh.n_cells)
    for cells in dofmap.cell_chunks():
        xq = dofmap.quadrature_points(rule, cells)
        D = _sample(problem.diffusion, xq, (2, 2))
        beta = _sample(problem.convection, xq, (2,))
        dmax[cells] = np.abs(D).max(axis=(1, 2, 3))
        bmax[cells] = pointwise_norm(beta, beta_norm).max(axis=1)
    node_d = np.full(dofmap.n_dofs, -np.inf)
    node_b = np.full(dofmap.n_dofs, -np.inf)
    nl = dofmap.cell_dofs.shape[1]
    np.maximum.at(node_d, dofmap.cell_dofs.ravel(), np.repeat(dmax, nl))
    np.maximum.at(node_b, dofmap.cell_dofs.ravel(), np.repeat(bmax, nl))
    assert np.all(np.isfinite(node_d)), "empty node patch"
    hn = nodal_mesh_function(dofmap, hfun)
    return alpha * (node_d + node_b * hn + problem.reaction * hn**2)


def lumped_product(dofmap: DofMap, hfun: np.ndarray | None, u, v) -> float:
    """Mass-lumped inner product ``sum_i h_i^2 u_i v_i`` over interior dofs."""
    hn = nodal_mesh_function(dofmap, hfun)
    i = dofmap.interior
    return float(np.sum(hn[i] ** 2 * np.asarray(u)[i] * np.asarray(v)[i]))


def dirichlet_mask(dofmap: DofMap, dirichlet: Callable | None = None) -> np.ndarray:
    """Boundary dofs on the Dirichlet part of the boundary."""
    mask = dofmap.boundary.copy()
    if dirichlet is not None:
        x, y = dofmap.coords[:, 0], dofmap.coords[:, 1]
        mask &= np.asarray(dirichlet(x, y), dtype=bool)
    return mask


def dirichlet_extension(dofmap: DofMap, g: Callable, dirichlet: Callable | None = None) -> np.ndarray:
    """Coefficient vector equal to ``g`` at Dirichlet nodes and zero elsewhere."""
    mask = dirichlet_mask(dofmap, dirichlet)
    ug = np.zeros(dofmap.n_dofs)
    pts = dofmap.coords[mask]
    vals = np.broadcast_to(np.asarray(g(pts[:, 0], pts[:, 1]), dtype=float), (len(pts),))
    if not np.all(np.isfinite(vals)):
        raise ValueError("boundary data returned non-finite values")
    ug[mask] = vals
    return ug


def reduce_system(A, F, u_g, unknown):
    """Restrict to the unknowns and lift the Dirichlet extension to the right-hand side."""
    unknown = np.asarray(unknown, dtype=bool)
    F = np.asarray(F, dtype=float)
    u_g = np.asarray(u_g, dtype=float)
    if not (A.shape[0] == A.shape[1] == len(F) == len(u_g) == len(unknown)):
        raise ValueError("dimension mismatch in reduce_system")
    A = sp.csr_matrix(A)
    idx = np.flatnonzero(unknown)
    A_red = A[idx][:, idx].tocsr()
    F_red = (F - A @ u_g)[idx]
    return A_red, F_red


@dataclass
class Discretization:
    """Everything assembled for one problem, mesh, element and stabilization."""

    dofmap: DofMap
    problem: ProblemSpec
    stab: StabConfig
    A: sp.csr_matrix
    J: sp.csr_matrix
    F: np.ndarray
    sigma: np.ndarray
    u_g: np.ndarray
    unknown: np.ndarray
    hfun: np.ndarray = field(repr=False)

    @cached_property
    def A_J(self) -> sp.csr_matrix:
        return (self.A + self.J).tocsr()

    @cached_property
    def M(self) -> sp.csr_matrix:
        return mass_matrix(self.dofmap)

    @cached_property
    def unknown_idx(self) -> np.ndarray:
        return np.flatnonzero(self.unknown)

    @cached_property
    def reduced(self):
        """``(A_J, F, sigma, M)`` restricted to the unknowns."""
        A_red, F_red = reduce_system(self.A_J, self.F, self.u_g, self.unknown)
        idx = self.unknown_idx
        M_red = self.M[idx][:, idx].tocsr()
        return A_red, F_red, self.sigma[idx], M_red

    def expand(self, u_red) -> np.ndarray:
        """Embed a vector on the unknowns into the full dof vector (zeros elsewhere)."""
        out = np.zeros(self.dofmap.n_dofs)
        out[self.unknown_idx] = u_red
        return out


def discretize(problem: ProblemSpec, mesh: Mesh, element: ElementSpec | str, stab: StabConfig) -> Discretization:
    dofmap = build_dof_map(mesh, element)
    A, F = assemble_galerkin(problem, dofmap)
    if stab.variant == "none":
        J = sp.csr_matrix(A.shape)
    else:
        J = assemble_cip(dofmap, problem.convection, stab)
    hfun = mesh_function(mesh, stab.cell_size)
    sigma = assemble_s_diag(dofmap, problem, hfun, stab.alpha, stab.beta_norm)
    u_g = dirichlet_extension(dofmap, problem.boundary, problem.dirichlet)
    unknown = ~dirichlet_mask(dofmap, problem.dirichlet)
    return Discretization(dofmap, problem, stab, A, J, F, sigma, u_g, unknown, hfun)
