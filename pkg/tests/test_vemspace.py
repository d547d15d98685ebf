"""Tensor virtual space: DOF maps, constant projector, commuting identities.

The projector checks run on pools of perturbed-quad and Voronoi elements so
that every identity faces irregular polygon shapes, not just squares.
"""

import numpy as np
import pytest

from pseudovem.mesh import all_geometries, element_geometry
from pseudovem.meshgen import generate_mesh
from pseudovem.vemspace import (
    UnsupportedDegreeError,
    VirtualTensorField,
    cell_dof_ids,
    div_from_dofs,
    dof_matrix_of_constants,
    dofs_of_constant,
    element_mean_div,
    interpolate_tensor,
    local_dof_set,
    n_sigma_dofs,
    pi_matrix,
    pi_projection,
    pi_projection_all,
    trace_integral,
    trace_row,
)


def smooth_tensor(x, y):
    """A generic smooth 2x2 tensor field used across the identity checks."""
    out = np.empty(np.shape(x) + (2, 2))
    out[..., 0, 0] = np.sin(x) * np.cos(y)
    out[..., 0, 1] = x * y + 0.5 * y**2
    out[..., 1, 0] = np.exp(0.3 * x - 0.2 * y)
    out[..., 1, 1] = x**2 - y
    return out


def smooth_tensor_div(x, y):
    """Row-wise divergence of `smooth_tensor`."""
    dx_00 = np.cos(x) * np.cos(y)
    dy_01 = x + y
    dx_10 = 0.3 * np.exp(0.3 * x - 0.2 * y)
    dy_11 = -np.ones_like(np.asarray(y, dtype=float))
    return np.stack([dx_00 + dy_01, dx_10 + dy_11], axis=-1)


class TestDofLayout:
    def test_two_dofs_per_edge(self):
        mesh = generate_mesh("T5", 4)
        assert n_sigma_dofs(mesh) == 2 * mesh.n_edges

    def test_cell_dof_ids_interleave_edge_rows(self):
        mesh = generate_mesh("T2", 3)
        ids = cell_dof_ids(mesh, 4)
        eids = mesh.cell_edges[4]
        expected = np.ravel(np.stack([2 * eids, 2 * eids + 1], axis=1))
        assert np.array_equal(ids, expected)

    def test_only_lowest_order_supported(self):
        mesh = generate_mesh("T2", 2)
        with pytest.raises(UnsupportedDegreeError, match="k = 0"):
            local_dof_set(mesh, 0, degree=1)

    def test_local_dof_set_signs_match_mesh(self):
        mesh = generate_mesh("T6", 15, seed=3)
        dofset = local_dof_set(mesh, 2)
        eids = mesh.cell_edges[2]
        signs = mesh.cell_edge_signs[2]
        assert np.array_equal(dofset.edge_dofs[::2, 0], eids)
        assert np.array_equal(dofset.edge_dofs[::2, 3], signs)


class TestConstantTensors:
    def test_projection_recovers_constants(self, random_geoms):
        rng = np.random.default_rng(11)
        for geom in random_geoms[:250]:
            C = rng.standard_normal((2, 2))
            dofs = dofs_of_constant(geom, C)
            assert np.allclose(pi_projection(dofs, geom), C, atol=1e-12)

    def test_dof_matrix_matches_function(self, random_geoms):
        rng = np.random.default_rng(12)
        for geom in random_geoms[:50]:
            C = rng.standard_normal((2, 2))
            D = dof_matrix_of_constants(geom)
            assert np.allclose(D @ C.ravel(), dofs_of_constant(geom, C),
                               rtol=1e-13, atol=1e-15)

    def test_pi_matrix_is_left_inverse_on_constants(self, random_geoms):
        for geom in random_geoms[:50]:
            P = pi_matrix(geom)
            D = dof_matrix_of_constants(geom)
            assert np.allclose(P @ D, np.eye(4), atol=1e-12)

    def test_constant_divergence_is_zero(self, random_geoms):
        for geom in random_geoms[:50]:
            dofs = dofs_of_constant(geom, np.array([[1.0, 2.0], [3.0, 4.0]]))
            assert np.allclose(div_from_dofs(dofs, geom), 0.0, atol=1e-12)


class TestDivergenceTheorem:
    def test_two_code_paths_agree_on_random_dofs(self, random_geoms):
        """|E|*(div tau)_r equals the signed sum of row-r edge DOFs."""
        rng = np.random.default_rng(21)
        for geom in random_geoms[:250]:
            dofs = rng.standard_normal(2 * geom.edge_ids.size)
            got = div_from_dofs(dofs, geom)
            signed = geom.edge_signs[:, None] * dofs.reshape(-1, 2)
            want = signed.sum(axis=0) / geom.area
            assert np.allclose(got, want, rtol=1e-13, atol=1e-13)

    def test_coordinate_rows_have_unit_divergence(self):
        """Rows (x, 0) and (0, y) interpolated on the unit square."""
        vertices = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        from pseudovem.mesh import build_polymesh

        mesh = build_polymesh(vertices, [[0, 1, 2, 3]])
        geom = element_geometry(mesh, 0)

        def field(x, y):
            out = np.zeros(np.shape(x) + (2, 2))
            out[..., 0, 0] = x
            out[..., 1, 1] = y
            return out

        dofs = interpolate_tensor(field, mesh, degree=3).cell_dofs(0)
        assert np.allclose(div_from_dofs(dofs, geom), [1.0, 1.0], rtol=1e-14)


class TestCommutingDiagram:
    def test_interpolant_divergence_is_mean_divergence(self):
        """div(interpolate(sigma)) matches the exact cell mean of div sigma."""
        mesh = generate_mesh("T4", 8, seed=3)
        geoms = all_geometries(mesh)
        field = interpolate_tensor(smooth_tensor, mesh, degree=15)
        for cell in range(mesh.n_cells):
            geom = geoms[cell]
            got = div_from_dofs(field.cell_dofs(cell), geom)
            want = element_mean_div(smooth_tensor_div, geom, degree=15)
            assert np.allclose(got, want, rtol=1e-11, atol=1e-12)

    def test_exact_pseudostress_on_voronoi_cells(self):
        """Holds for a manufactured pseudostress on irregular cells."""
        from pseudovem.problems import build_case

        case = build_case("test1")
        mesh = generate_mesh("T6", 30, domain=case.domain, seed=5)
        geoms = all_geometries(mesh)
        field = interpolate_tensor(case.sigma, mesh, degree=15)

        def div_sigma(x, y):
            # Momentum balance with constant convection: div sigma = kappa u - f.
            u = np.asarray(case.u(x, y))
            f = np.asarray(case.f(x, y))
            return case.params.kappa * u - f

        for cell in range(0, mesh.n_cells, 3):
            geom = geoms[cell]
            got = div_from_dofs(field.cell_dofs(cell), geom)
            want = element_mean_div(div_sigma, geom, degree=12)
            assert np.allclose(got, want, rtol=1e-10, atol=1e-10)

    def test_interpolating_constant_is_exact(self):
        mesh = generate_mesh("T3", 4)
        geoms = all_geometries(mesh)
        C = np.array([[0.7, -0.3], [0.1, 1.9]])
        field = interpolate_tensor(lambda x, y: np.broadcast_to(
            C, np.shape(x) + (2, 2)), mesh, degree=3)
        for cell in range(mesh.n_cells):
            want = dofs_of_constant(geoms[cell], C)
            assert np.allclose(field.cell_dofs(cell), want, rtol=1e-13,
                               atol=1e-14)


class TestPiProjection:
    def test_orthogonality_against_boundary_formula(self, random_geoms):
        """|E| Pi_{rc} = sum_e sign * dof(e, r) * (midpoint_c - centroid_c).

        Independent re-derivation: test tau_h : G against the integration by
        parts formula with linear weights, for all four constant directions.
        """
        rng = np.random.default_rng(22)
        for geom in random_geoms[:250]:
            dofs = rng.standard_normal(2 * geom.edge_ids.size)
            pi = pi_projection(dofs, geom)
            signed = geom.edge_signs[:, None] * dofs.reshape(-1, 2)
            rel = geom.edge_midpoints - geom.centroid
            want = np.einsum("er,ec->rc", signed, rel) / geom.area
            assert np.allclose(pi, want, rtol=1e-12, atol=1e-12)

    @staticmethod
    def _linear_field():
        A = np.array([[0.5, -1.0], [2.0, 0.25]])
        B = np.array([[1.0, 0.5], [-0.5, 2.0]])
        C = np.array([[-0.75, 1.5], [1.0, -2.0]])

        def field(x, y):
            x = np.asarray(x, dtype=float)[..., None, None]
            y = np.asarray(y, dtype=float)[..., None, None]
            return A + B * x + C * y

        return field

    def _centroid_gap(self, family, n, seed):
        field = self._linear_field()
        mesh = generate_mesh(family, n, seed=seed)
        geoms = all_geometries(mesh)
        interp = interpolate_tensor(field, mesh, degree=3)
        total = 0.0
        for cell in range(mesh.n_cells):
            geom = geoms[cell]
            want = field(geom.centroid[0], geom.centroid[1])
            got = pi_projection(interp.cell_dofs(cell), geom)
            total += float(np.max(np.abs(got - want)))
        return total / mesh.n_cells

    def test_linear_field_projects_to_centroid_value_on_parallelograms(self):
        """Exact on square cells: opposite parallel edges cancel the
        edge-mean decorrelation error."""
        assert self._centroid_gap("T2", 8, seed=0) < 1e-14

    def test_linear_field_projection_tends_to_centroid_value(self):
        """On general cells the match is first order in h, not exact: the
        interpolant replaces a linear normal trace by its edge mean."""
        gaps = [self._centroid_gap("T4", n, seed=13) for n in (4, 8, 16, 32)]
        assert gaps[0] < 0.05
        for coarse, fine in zip(gaps, gaps[1:]):
            assert fine < 0.72 * coarse
        assert gaps[-1] < 5e-3


class TestBatchedProjection:
    def test_matches_per_cell_projection(self):
        mesh = generate_mesh("T6", 80, seed=7)
        geoms = all_geometries(mesh)
        rng = np.random.default_rng(8)
        dofs = rng.standard_normal(n_sigma_dofs(mesh))
        batched = pi_projection_all(geoms, dofs)
        assert batched.shape == (mesh.n_cells, 2, 2)
        field = VirtualTensorField(mesh, dofs)
        for cell in range(mesh.n_cells):
            single = pi_projection(field.cell_dofs(cell), geoms[cell])
            assert np.allclose(batched[cell], single, rtol=1e-13, atol=1e-14)


class TestTraceFunctional:
    def test_trace_row_equals_trace_integral(self):
        mesh = generate_mesh("T4", 6, seed=9)
        geoms = all_geometries(mesh)
        rng = np.random.default_rng(10)
        dofs = rng.standard_normal(n_sigma_dofs(mesh))
        row = trace_row(mesh, geoms)
        field = VirtualTensorField(mesh, dofs)
        assert np.allclose(float(row @ dofs), trace_integral(field, geoms),
                           rtol=1e-12)

    def test_trace_of_identity_is_domain_area_times_two(self):
        mesh = generate_mesh("T5", 5)
        geoms = all_geometries(mesh)
        dofs = np.zeros(n_sigma_dofs(mesh))
        field = VirtualTensorField(mesh, dofs)
        for cell in range(mesh.n_cells):
            ids = cell_dof_ids(mesh, cell)
            local = dofs_of_constant(geoms[cell], np.eye(2))
            # Shared edges receive the same value from both sides.
            dofs[ids] = local
        assert np.allclose(trace_integral(field, geoms), 2.0, rtol=1e-12)

    def test_deviatoric_constant_has_zero_trace(self):
        mesh = generate_mesh("T2", 4)
        geoms = all_geometries(mesh)
        dofs = np.zeros(n_sigma_dofs(mesh))
        C = np.array([[1.0, 0.4], [-0.2, -1.0]])  # trace-free
        for cell in range(mesh.n_cells):
            dofs[cell_dof_ids(mesh, cell)] = dofs_of_constant(geoms[cell], C)
        field = VirtualTensorField(mesh, dofs)
        assert np.allclose(trace_integral(field, geoms), 0.0, atol=1e-13)
