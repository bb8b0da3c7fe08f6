from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bpfem.fe_space import (
    ELEMENTS,
    ElementSpec,
    build_dof_map,
    evaluate,
    interpolate,
    l2_norm,
    l2_project,
    load_vector,
    mass_matrix,
    quadrature,
    reference_basis,
    reference_element,
)
from bpfem.mesh import build_structured_mesh

SIMPLEX = ["p1", "p2", "p3"]
TENSOR = ["q1", "q2"]


def mesh_for(name, N):
    family = "quad" if name.startswith("q") else "tri-perturbed"
    return build_structured_mesh(family, N)


def reference_points(shape, rng, n):
    p = rng.uniform(0, 1, size=(n, 2))
    if shape == "triangle":
        flip = p.sum(axis=1) > 1
        p[flip] = 1 - p[flip]
    return p


# -- dof maps ------------------------------------------------------------------


@pytest.mark.parametrize(
    "name, family, N, total, interior",
    [
        ("p1", "tri-uniform", 5, 25, 9),
        ("p2", "tri-uniform", 3, 25, 9),
        ("q2", "quad", 3, 25, 9),
        ("p3", "tri-uniform", 3, 49, 25),
        ("q1", "quad", 5, 25, 9),
    ],
)
def test_dof_counts(name, family, N, total, interior):
    dm = build_dof_map(build_structured_mesh(family, N), name)
    assert dm.n_dofs == total
    assert dm.n_interior == interior


def test_family_mismatch():
    with pytest.raises(ValueError):
        build_dof_map(build_structured_mesh("quad", 3), "p1")
    with pytest.raises(ValueError):
        ElementSpec.from_name("p4")


@pytest.mark.parametrize("name", sorted(ELEMENTS))
def test_numbering_lexicographic_and_unique(name):
    dm = build_dof_map(mesh_for(name, 5), name)
    keys = np.round(dm.coords / 1e-12).astype(np.int64)
    order = np.lexsort((keys[:, 0], keys[:, 1]))
    np.testing.assert_array_equal(order, np.arange(dm.n_dofs))
    assert len(np.unique(keys, axis=0)) == dm.n_dofs
    assert np.all(dm.cell_dofs.max(axis=0) < dm.n_dofs)


def test_p1_numbering_matches_vertices():
    mesh = build_structured_mesh("tri-alt", 5)
    dm = build_dof_map(mesh, "p1")
    np.testing.assert_array_equal(dm.cell_dofs, mesh.cells)
    np.testing.assert_allclose(dm.coords, mesh.vertices)


@pytest.mark.parametrize("name", sorted(ELEMENTS))
def test_boundary_flags(name):
    dm = build_dof_map(mesh_for(name, 5), name)
    k = ElementSpec.from_name(name).degree
    assert dm.boundary.sum() == 4 * 4 * k
    x, y = dm.coords.T
    on = (x == 0) | (x == 1) | (y == 0) | (y == 1)
    np.testing.assert_array_equal(on, dm.boundary)


def test_reference_node_layout():
    nodes = reference_element(ElementSpec.from_name("p3")).nodes
    np.testing.assert_allclose(nodes[:3], [[0, 0], [1, 0], [0, 1]])
    np.testing.assert_allclose(nodes[3:5], [[1 / 3, 0], [2 / 3, 0]])
    np.testing.assert_allclose(nodes[-1], [1 / 3, 1 / 3])
    nodes = reference_element(ElementSpec.from_name("q2")).nodes
    np.testing.assert_allclose(nodes[:4], [[0, 0], [1, 0], [1, 1], [0, 1]])
    np.testing.assert_allclose(nodes[-1], [0.5, 0.5])


# -- basis ---------------------------------------------------------------------


def test_basis_examples():
    vals, _ = reference_basis(ElementSpec.from_name("p1"), np.array([[1 / 3, 1 / 3]]))
    np.testing.assert_allclose(vals, [[1 / 3, 1 / 3, 1 / 3]])
    vals, _ = reference_basis(ElementSpec.from_name("q1"), np.array([[0.5, 0.5]]))
    np.testing.assert_allclose(vals, [[0.25, 0.25, 0.25, 0.25]])


@pytest.mark.parametrize("name", sorted(ELEMENTS))
def test_basis_delta_property(name):
    ref = reference_element(ElementSpec.from_name(name))
    np.testing.assert_allclose(ref.values(ref.nodes), np.eye(ref.n_local), atol=1e-12)


@settings(max_examples=1000)
@given(name=st.sampled_from(sorted(ELEMENTS)), seed=st.integers(0, 2**32 - 1))
def test_partition_of_unity(name, seed):
    spec = ElementSpec.from_name(name)
    pts = reference_points(spec.shape, np.random.default_rng(seed), 4)
    vals, grads = reference_basis(spec, pts)
    np.testing.assert_allclose(vals.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(grads.sum(axis=1), 0.0, atol=1e-10)


@pytest.mark.parametrize("name", sorted(ELEMENTS))
def test_gradients_match_finite_differences(name):
    ref = reference_element(ElementSpec.from_name(name))
    pts = reference_points(ref.spec.shape, np.random.default_rng(3), 5) * 0.9 + 0.02
    step = 1e-6
    g = ref.gradients(pts)
    for a in range(2):
        e = np.zeros(2)
        e[a] = step
        fd = (ref.values(pts + e) - ref.values(pts - e)) / (2 * step)
        np.testing.assert_allclose(g[..., a], fd, atol=1e-7)


# -- quadrature ----------------------------------------------------------------


def exact_monomial(shape, a, b):
    if shape == "triangle":
        return factorial(a) * factorial(b) / factorial(a + b + 2)
    if shape == "quadrilateral":
        return 1.0 / ((a + 1) * (b + 1))
    return 1.0 / (a + 1)


@settings(max_examples=1000)
@given(
    shape=st.sampled_from(["triangle", "quadrilateral", "interval"]),
    degree=st.integers(0, 12),
    data=st.data(),
)
def test_quadrature_exactness(shape, degree, data):
    rule = quadrature(shape, degree)
    a = data.draw(st.integers(0, degree))
    b = 0 if shape == "interval" else data.draw(st.integers(0, degree - a if shape == "triangle" else degree))
    x = rule.points if rule.points.ndim == 1 else rule.points[:, 0]
    y = np.zeros_like(x) if rule.points.ndim == 1 else rule.points[:, 1]
    approx = np.sum(rule.weights * x**a * y**b)
    assert approx == pytest.approx(exact_monomial(shape, a, b), rel=1e-12, abs=1e-15)


def test_quadrature_examples():
    rule = quadrature("triangle", 2)
    assert len(rule.weights) == 3
    assert rule.weights.sum() == pytest.approx(0.5)
    x, y = rule.points.T
    assert np.sum(rule.weights * x * y) == pytest.approx(1 / 24)
    assert len(quadrature("quadrilateral", 3).weights) == 4
    with pytest.raises(ValueError):
        quadrature("triangle", 13)


# -- interpolation, projection, evaluation ------------------------------------


def poly(k):
    def f(x, y):
        return 1.0 + 0.5 * x**k - 2.0 * y**k + 0.3 * x * y ** (k - 1)

    return f


@pytest.mark.parametrize("name", sorted(ELEMENTS))
def test_polynomial_reproduction(name):
    k = ElementSpec.from_name(name).degree
    dm = build_dof_map(mesh_for(name, 5), name)
    f = poly(k)
    c = interpolate(dm, f)
    pts = np.random.default_rng(0).uniform(0, 1, size=(200, 2))
    np.testing.assert_allclose(evaluate(dm, c, pts), f(*pts.T), atol=1e-12)


def test_interpolate_constant():
    dm = build_dof_map(build_structured_mesh("tri-alt", 5), "p2")
    np.testing.assert_array_equal(interpolate(dm, lambda x, y: np.ones_like(x)), 1.0)


def test_interpolate_rejects_nonfinite():
    dm = build_dof_map(build_structured_mesh("quad", 3), "q1")
    with pytest.raises(ValueError):
        interpolate(dm, lambda x, y: np.full_like(x, np.nan))


def test_interpolation_rate_p1():
    def u(x, y):
        return 100 * np.sin(np.pi * x) * np.sin(np.pi * y)

    errs = []
    for N in (33, 65):
        dm = build_dof_map(build_structured_mesh("tri-uniform", N), "p1")
        from bpfem.analysis import error_l2

        errs.append(error_l2(dm, interpolate(dm, u), u))
    rate = np.log(errs[0] / errs[1]) / np.log(65 / 33)
    assert 1.9 < rate < 2.1


@pytest.mark.parametrize("name", ["p1", "p2", "q1"])
def test_l2_projection(name):
    dm = build_dof_map(mesh_for(name, 5), name)
    # identity on the space
    f = poly(ElementSpec.from_name(name).degree)
    np.testing.assert_allclose(l2_project(dm, f), interpolate(dm, f), atol=1e-11)

    def g(x, y):
        return np.exp(x) * np.cos(3 * y)

    c = l2_project(dm, g)
    M = mass_matrix(dm)
    np.testing.assert_allclose(M @ c, load_vector(dm, g), atol=1e-12)
    from bpfem.analysis import error_l2

    assert error_l2(dm, c, g) <= error_l2(dm, interpolate(dm, g), g)


def test_mass_matrix_total():
    for name in sorted(ELEMENTS):
        dm = build_dof_map(mesh_for(name, 5), name)
        M = mass_matrix(dm)
        assert M.sum() == pytest.approx(1.0, abs=1e-12)
        assert abs(M - M.T).max() <= 1e-14 * abs(M).max()
        assert l2_norm(dm, np.ones(dm.n_dofs)) == pytest.approx(1.0)


@pytest.mark.parametrize("name", sorted(ELEMENTS))
def test_evaluate_at_nodes_and_continuity(name):
    dm = build_dof_map(mesh_for(name, 5), name)
    c = np.random.default_rng(1).normal(size=dm.n_dofs)
    np.testing.assert_allclose(evaluate(dm, c, dm.coords), c, atol=1e-12)
    # both sides of every interior facet give the same trace
    mesh = dm.mesh
    f = mesh.interior_facets
    a, b = mesh.vertices[mesh.facets[f, 0]], mesh.vertices[mesh.facets[f, 1]]
    p = a + 0.37 * (b - a)
    vals = []
    for side in (0, 1):
        cells = mesh.facet_cells[f, side]
        ref = mesh.map_to_reference(cells, p)
        vals.append(np.einsum("pl,pl->p", dm.element.values(ref), c[dm.cell_dofs[cells]]))
    np.testing.assert_allclose(vals[0], vals[1], atol=1e-12)


def test_evaluate_gradient_linear():
    dm = build_dof_map(build_structured_mesh("tri-perturbed", 5), "p1")
    c = interpolate(dm, lambda x, y: 2 * x - 3 * y + 1)
    pts = np.random.default_rng(2).uniform(0, 1, size=(50, 2))
    v, g = evaluate(dm, c, pts, gradient=True)
    np.testing.assert_allclose(v, 2 * pts[:, 0] - 3 * pts[:, 1] + 1, atol=1e-12)
    np.testing.assert_allclose(g, np.tile([2.0, -3.0], (50, 1)), atol=1e-11)


def test_evaluate_outside_raises():
    dm = build_dof_map(build_structured_mesh("quad", 3), "q1")
    with pytest.raises(ValueError):
        evaluate(dm, np.zeros(dm.n_dofs), [[-0.1, 0.5]])
