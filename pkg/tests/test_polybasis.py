"""Quadrature and scaled-monomial tools: exactness, batching, projections.

Monomial integrals over polygons are cross-checked against an independent
divergence-theorem evaluation that only uses numpy's Gauss-Legendre nodes.
"""

import numpy as np
import pytest

from pseudovem.mesh import MeshError, all_geometries, element_geometry
from pseudovem.meshgen import generate_mesh
from pseudovem.polybasis import (
    MeshQuadrature,
    ScaledMonomialBasis,
    edge_rule,
    element_basis,
    l2_project,
    monomial_exponents,
    polygon_rule,
    triangle_rule,
)

PENTAGON = np.array(
    [[0.02, 0.01], [0.13, 0.03], [0.16, 0.11], [0.08, 0.17], [0.00, 0.10]]
)
L_SHAPE = np.array(
    [[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]]
)


def monomial_integral(coords, a, b):
    """Exact integral of x^a y^b over a polygon via the divergence theorem.

    Uses the flux of (x^(a+1) y^b / (a+1), 0) through each edge with a 1-D
    Gauss rule, exact for the polynomial integrand.
    """
    t, w = np.polynomial.legendre.leggauss((a + b + 2) // 2 + 2)
    total = 0.0
    m = len(coords)
    for i in range(m):
        p0, p1 = coords[i], coords[(i + 1) % m]
        x = 0.5 * (p0[0] + p1[0]) + 0.5 * t * (p1[0] - p0[0])
        y = 0.5 * (p0[1] + p1[1]) + 0.5 * t * (p1[1] - p0[1])
        nx_ds = 0.5 * (p1[1] - p0[1])
        total += float(np.sum(w * x ** (a + 1) * y**b)) * nx_ds / (a + 1)
    return total


class TestTriangleRule:
    @pytest.mark.parametrize("degree", [1, 2, 4, 6, 10, 14])
    def test_monomial_exactness(self, degree):
        v0, v1, v2 = np.array([0.1, -0.2]), np.array([1.3, 0.1]), np.array([0.4, 1.1])
        rule = triangle_rule(v0, v1, v2, degree)
        coords = np.stack([v0, v1, v2])
        for a in range(degree + 1):
            for b in range(degree + 1 - a):
                got = float(np.sum(rule.weights * rule.points[:, 0] ** a
                                   * rule.points[:, 1] ** b))
                want = monomial_integral(coords, a, b)
                assert np.allclose(got, want, rtol=1e-12, atol=1e-15)

    def test_weights_positive_and_sum_to_area(self):
        rule = triangle_rule(
            np.array([0.0, 0.0]), np.array([2.0, 0.0]), np.array([0.0, 2.0]), 8
        )
        assert np.all(rule.weights > 0.0)
        assert np.allclose(np.sum(rule.weights), 2.0, rtol=1e-14)


class TestPolygonRule:
    @pytest.mark.parametrize("coords", [PENTAGON, L_SHAPE], ids=["pentagon", "L"])
    @pytest.mark.parametrize("degree", [0, 2, 5, 9])
    def test_monomial_exactness(self, coords, degree):
        rule = polygon_rule(coords, degree)
        for a in range(degree + 1):
            for b in range(degree + 1 - a):
                got = float(np.sum(rule.weights * rule.points[:, 0] ** a
                                   * rule.points[:, 1] ** b))
                want = monomial_integral(coords, a, b)
                assert np.allclose(got, want, rtol=1e-12, atol=1e-15)

    def test_weights_sum_to_area(self):
        rule = polygon_rule(L_SHAPE, 4)
        assert np.allclose(np.sum(rule.weights), 3.0, rtol=1e-13)

    def test_degenerate_polygon_raises(self):
        bowtie = np.array([[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(MeshError, match="not positive"):
            polygon_rule(bowtie, 2)


class TestEdgeRule:
    @pytest.mark.parametrize("degree", [1, 3, 7, 11])
    def test_polynomial_exactness_along_segment(self, degree):
        p0, p1 = np.array([0.2, -0.1]), np.array([1.1, 0.7])
        rule = edge_rule(p0, p1, degree)
        rng = np.random.default_rng(0)
        coeff = rng.standard_normal(degree + 1)
        got = float(np.sum(rule.weights * np.polyval(coeff, rule.points[:, 0])))
        t, w = np.polynomial.legendre.leggauss(degree + 2)
        x = 0.5 * (p0[0] + p1[0]) + 0.5 * t * (p1[0] - p0[0])
        want = float(np.sum(w * np.polyval(coeff, x))) * 0.5 * np.hypot(
            *(p1 - p0)
        )
        assert np.allclose(got, want, rtol=1e-13)

    def test_weights_sum_to_length(self):
        p0, p1 = np.array([0.0, 0.0]), np.array([3.0, 4.0])
        rule = edge_rule(p0, p1, 5)
        assert np.allclose(np.sum(rule.weights), 5.0, rtol=1e-14)


class TestScaledMonomials:
    def test_exponent_count(self):
        assert len(monomial_exponents(0)) == 1
        assert len(monomial_exponents(1)) == 3
        assert len(monomial_exponents(2)) == 6

    def test_center_values(self):
        mesh = generate_mesh("T6", 20, seed=6)
        geom = element_geometry(mesh, 3)
        basis = element_basis(geom, 2)
        vals = basis.evaluate(geom.centroid[None, :])
        expected = np.zeros(6)
        expected[0] = 1.0
        assert np.allclose(vals[0], expected, atol=1e-15)

    def test_diameter_scaling(self):
        center = np.array([0.5, 0.25])
        basis = ScaledMonomialBasis(center=center, diameter=0.2, degree=1)
        pts = np.array([[0.7, 0.25]])  # one diameter to the right
        vals = basis.evaluate(pts)
        assert np.allclose(vals[0], [1.0, 1.0, 0.0], atol=1e-15)


class TestL2Project:
    def test_reproduces_polynomial(self):
        mesh = generate_mesh("T5", 5)
        geom = element_geometry(mesh, 7)

        def field(x, y):
            return 2.0 - x + 3.0 * y + 0.5 * x * y - y**2

        coeff, basis = l2_project(field, geom, degree=2)
        rng = np.random.default_rng(1)
        pts = geom.centroid + 0.3 * geom.diameter * (rng.random((40, 2)) - 0.5)
        assert np.allclose(
            basis.evaluate(pts) @ coeff, field(pts[:, 0], pts[:, 1]), rtol=1e-12
        )

    def test_vector_valued_field(self):
        mesh = generate_mesh("T2", 3)
        geom = element_geometry(mesh, 0)

        def field(x, y):
            return np.stack([x + y, x - y], axis=-1)

        coeff, basis = l2_project(field, geom, degree=1)
        assert coeff.shape == (3, 2)
        pts = np.array([[0.1, 0.2], [0.25, 0.3]])
        vals = np.einsum("pb,bc->pc", basis.evaluate(pts), coeff)
        assert np.allclose(vals, field(pts[:, 0], pts[:, 1]), rtol=1e-12)


class TestMeshQuadrature:
    def test_matches_per_cell_rules(self):
        mesh = generate_mesh("T3", 5)
        geoms = all_geometries(mesh)
        quad = MeshQuadrature(geoms, 6)

        def f(x, y):
            return np.sin(x) * np.cos(2.0 * y) + x * y

        batched = float(quad.integrate(f(quad.x, quad.y)))
        loop = 0.0
        for g in geoms:
            rule = polygon_rule(g.coords, 6)
            loop += float(np.sum(rule.weights * f(rule.points[:, 0],
                                                  rule.points[:, 1])))
        assert np.allclose(batched, loop, rtol=1e-13)

    def test_cell_integrals_sum_to_total(self):
        mesh = generate_mesh("T6", 30, seed=2)
        geoms = all_geometries(mesh)
        quad = MeshQuadrature(geoms, 4)
        vals = quad.x**2 + quad.y
        per_cell = quad.cell_integrals(vals)
        assert per_cell.shape == (mesh.n_cells,)
        assert np.allclose(np.sum(per_cell), float(quad.integrate(vals)),
                           rtol=1e-13)

    def test_expand_broadcasts_cell_values(self):
        mesh = generate_mesh("T2", 4)
        geoms = all_geometries(mesh)
        quad = MeshQuadrature(geoms, 2)
        cell_vals = np.arange(mesh.n_cells, dtype=float)
        expanded = quad.expand(cell_vals)
        assert expanded.shape[0] == quad.weights.size
        # Integrating the expanded indicator of one cell gives its area.
        one = quad.expand(np.eye(mesh.n_cells)[5])
        assert np.allclose(float(quad.integrate(one)), geoms[5].area, rtol=1e-13)

    def test_total_weight_is_domain_area(self):
        mesh = generate_mesh("T4", 6, seed=8)
        geoms = all_geometries(mesh)
        quad = MeshQuadrature(geoms, 3)
        assert np.allclose(np.sum(quad.weights), 1.0, rtol=1e-12)
