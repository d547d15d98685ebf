"""Lowest-order H(div)-conforming tensor virtual element space.

Degrees of freedom are edge moments of the normal trace: two per edge,
dof_(e,r) = integral over e of (tau n_e)_r, with n_e the globally oriented
unit normal.  The normal trace is constant per edge, so the divergence of a
virtual field is the exact per-element constant obtained from the divergence
theorem, and the L2 projection onto constant tensors is computable from the
same data via integration by parts:

    |E| Pi_rc = sum_e s_e dof_(e,r) (mid_e - centroid)_c

where s_e = +-1 flips the global normal outward.  Velocities are piecewise
constant vectors, two per cell.  Interior moment degrees of freedom appear
in the data model for completeness but only degree 0 is constructible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .polybasis import polygon_rule


class UnsupportedDegreeError(Exception):
    """Raised for space degrees this implementation does not build."""


EDGE_QUAD_DEGREE = 11


@dataclass(frozen=True)
class LocalDofSet:
    """Degree-of-freedom descriptors of one element.

    `edge_dofs` has one row (edge, row, global_dof, sign) per local DOF in
    edge-major order.  The gradient/rotor interior moment descriptor tuples
    are part of the data model for higher degrees and stay empty at k = 0.
    """

    cell: int
    degree: int
    edge_dofs: np.ndarray
    gradient_moments: tuple = field(default_factory=tuple)
    rotor_moments: tuple = field(default_factory=tuple)

    @property
    def n_dofs(self):
        return self.edge_dofs.shape[0] + len(self.gradient_moments) + len(self.rotor_moments)

    @property
    def global_dofs(self):
        return self.edge_dofs[:, 2]


def local_dof_set(mesh, cell, degree=0):
    if degree != 0:
        raise UnsupportedDegreeError(
            f"unsupported degree {degree}: only the lowest-order space (k = 0) is built"
        )
    eids = mesh.cell_edges[cell]
    signs = mesh.cell_edge_signs[cell]
    rows = []
    for e, s in zip(eids, signs):
        rows.append((e, 0, 2 * e, s))
        rows.append((e, 1, 2 * e + 1, s))
    return LocalDofSet(cell=cell, degree=0, edge_dofs=np.asarray(rows, dtype=np.int64))


def n_sigma_dofs(mesh):
    return 2 * mesh.n_edges


def cell_dof_ids(mesh, cell):
    """Global tensor DOF ids of a cell, edge-major, rows interleaved."""
    eids = mesh.cell_edges[cell]
    out = np.empty(2 * eids.size, dtype=np.int64)
    out[0::2] = 2 * eids
    out[1::2] = 2 * eids + 1
    return out


@dataclass(frozen=True)
class VirtualTensorField:
    """Global DOF vector of the tensor space (2 per edge)."""

    mesh: object
    dofs: np.ndarray

    def cell_dofs(self, cell):
        return self.dofs[cell_dof_ids(self.mesh, cell)]


@dataclass(frozen=True)
class PiecewiseVectorField:
    """Piecewise-constant vector field (one 2-vector per cell)."""

    mesh: object
    values: np.ndarray


def interpolate_tensor(sigma, mesh, degree=EDGE_QUAD_DEGREE):
    """DOF interpolant of a smooth tensor field: per-edge normal moments.

    `sigma(x, y)` returns (..., 2, 2) arrays.  Edge integrals use Gauss
    rules exact to `degree`, evaluated in one vectorized sweep.
    """
    p0 = mesh.vertices[mesh.edges[:, 0]]
    p1 = mesh.vertices[mesh.edges[:, 1]]
    npts = max(1, (degree + 2) // 2)
    t, w = leggauss(npts)
    # (ne, npts, 2) points along every edge.
    pts = 0.5 * (p0 + p1)[:, None, :] + 0.5 * t[None, :, None] * (p1 - p0)[:, None, :]
    vals = np.asarray(sigma(pts[..., 0], pts[..., 1]), dtype=float)
    flux = np.einsum("egrc,ec->egr", vals, mesh.edge_normals)
    moments = 0.5 * mesh.edge_lengths[:, None] * np.einsum("g,egr->er", w, flux)
    return VirtualTensorField(mesh, moments.reshape(-1).copy())


def dofs_of_constant(geom, C):
    """Local DOF values (global orientation) of a constant tensor on a cell."""
    C = np.asarray(C, dtype=float)
    n_global = geom.edge_signs[:, None] * geom.edge_normals
    flux = n_global @ C.T
    dofs = geom.edge_lengths[:, None] * flux
    return dofs.reshape(-1)


def div_from_dofs(dofs, geom):
    """Exact element divergence (a constant 2-vector) from local DOFs."""
    d = np.asarray(dofs, dtype=float).reshape(-1, 2)
    return (geom.edge_signs[:, None] * d).sum(0) / geom.area


def pi_matrix(geom):
    """Matrix of the constant-tensor projector: (4, 2m) mapping local DOFs
    (global orientation, edge-major) to the flattened projected tensor."""
    m = geom.n_edges
    rel = geom.edge_midpoints - geom.centroid[None, :]
    coef = geom.edge_signs[:, None] * rel / geom.area
    P = np.zeros((4, 2 * m))
    # Flattened tensor layout: [11, 12, 21, 22]; local dof (edge e, row r)
    # sits at column 2e + r and feeds entries (r, c) for c = 0, 1.
    P[0, 0::2] = coef[:, 0]
    P[1, 0::2] = coef[:, 1]
    P[2, 1::2] = coef[:, 0]
    P[3, 1::2] = coef[:, 1]
    return P


def pi_projection(dofs, geom):
    """L2 projection onto constant tensors of a virtual field on one cell."""
    return (pi_matrix(geom) @ np.asarray(dofs, dtype=float)).reshape(2, 2)


def pi_projection_all(geoms, dofs):
    """Projected constant tensors of every cell at once, shape (n_cells, 2, 2).

    Bulk version of `pi_projection` over a global DOF vector, grouping
    cells by edge count so each group reduces in one vectorized sweep.
    """
    dofs = np.asarray(dofs, dtype=float)
    out = np.empty((len(geoms), 2, 2))
    by_m = {}
    for k, g in enumerate(geoms):
        by_m.setdefault(g.n_edges, []).append(k)
    for cells in by_m.values():
        idx = np.array(cells)
        eids = np.stack([geoms[k].edge_ids for k in cells])
        signs = np.stack([geoms[k].edge_signs for k in cells])
        mids = np.stack([geoms[k].edge_midpoints for k in cells])
        cents = np.stack([geoms[k].centroid for k in cells])
        areas = np.array([geoms[k].area for k in cells])
        coef = signs[:, :, None] * (mids - cents[:, None, :]) / areas[:, None, None]
        dx = dofs[2 * eids]
        dy = dofs[2 * eids + 1]
        out[idx, 0, 0] = (dx * coef[:, :, 0]).sum(axis=1)
        out[idx, 0, 1] = (dx * coef[:, :, 1]).sum(axis=1)
        out[idx, 1, 0] = (dy * coef[:, :, 0]).sum(axis=1)
        out[idx, 1, 1] = (dy * coef[:, :, 1]).sum(axis=1)
    return out


def dof_matrix_of_constants(geom):
    """(2m, 4) matrix taking a flattened constant tensor to its local DOFs."""
    m = geom.n_edges
    n_global = geom.edge_signs[:, None] * geom.edge_normals
    T = np.zeros((2 * m, 4))
    hn = geom.edge_lengths[:, None] * n_global
    T[0::2, 0] = hn[:, 0]
    T[0::2, 1] = hn[:, 1]
    T[1::2, 2] = hn[:, 0]
    T[1::2, 3] = hn[:, 1]
    return T


def trace_integral(field, geoms):
    """Integral of the trace of the projected field over the mesh."""
    total = 0.0
    for g in geoms:
        P = pi_projection(field.cell_dofs(g.cell), g)
        total += g.area * (P[0, 0] + P[1, 1])
    return total


def trace_row(mesh, geoms):
    """Global row vector t with t_j = integral of tr(Pi phi_j)."""
    t = np.zeros(n_sigma_dofs(mesh))
    for g in geoms:
        P = pi_matrix(g)
        np.add.at(t, cell_dof_ids(mesh, g.cell), g.area * (P[0] + P[3]))
    return t


def element_mean_div(fn_div, geom, degree=6):
    """Element average of an analytic divergence, for commuting checks."""
    rule = polygon_rule(geom.coords, degree, center=geom.centroid)
    vals = np.asarray(fn_div(rule.points[:, 0], rule.points[:, 1]), dtype=float)
    return rule.integrate(vals) / geom.area
