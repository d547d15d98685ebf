"""Scaled monomial bases and quadrature on edges and polygons.

Monomials are scaled and centered, m_alpha(x) = ((x - x_E)/h_E)^alpha, so
Gram matrices stay well conditioned under refinement.  Polygon quadrature
sub-triangulates from the centroid (falling back to ear clipping for cells
whose centroid does not see the whole boundary) and uses a collapsed tensor
Gauss rule on each triangle, exact to the requested degree.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

from .mesh import polygon_area_centroid


class GeometryError(Exception):
    """Raised when a polygon cannot be sub-triangulated."""


@dataclass(frozen=True)
class QuadratureRule:
    """Points (m, 2), weights (m,) and the polynomial degree integrated exactly."""

    points: np.ndarray
    weights: np.ndarray
    degree: int

    def integrate(self, values):
        """Sum weighted values; `values` has leading axis over points."""
        values = np.asarray(values)
        return np.tensordot(self.weights, values, axes=(0, 0))


def edge_rule(p0, p1, degree):
    """Gauss-Legendre rule along the segment p0 -> p1."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    npts = max(1, (int(degree) + 2) // 2)
    t, w = leggauss(npts)
    pts = 0.5 * (p0 + p1)[None, :] + 0.5 * t[:, None] * (p1 - p0)[None, :]
    length = float(np.hypot(*(p1 - p0)))
    return QuadratureRule(pts, 0.5 * length * w, degree)


def triangle_rule(v0, v1, v2, degree):
    """Tensor Gauss rule collapsed onto a triangle, exact to `degree`."""
    # The Duffy Jacobian adds one polynomial degree in the collapsed
    # direction, so the 1-D rule must cover degree + 1.
    npts = max(1, (int(degree) + 3) // 2)
    g, w = leggauss(npts)
    a = 0.5 * (g + 1.0)
    wa = 0.5 * w
    # Duffy map (a, b) in [0,1]^2 -> v0 + a (v1 - v0) + a b (v2 - v1),
    # Jacobian 2|T| a; the extra factor a is absorbed into the weights.
    A, B = np.meshgrid(a, a, indexing="ij")
    WA, WB = np.meshgrid(wa, wa, indexing="ij")
    v0 = np.asarray(v0, dtype=float)
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    pts = (
        v0[None, :]
        + A.ravel()[:, None] * (v1 - v0)[None, :]
        + (A * B).ravel()[:, None] * (v2 - v1)[None, :]
    )
    det = (v1[0] - v0[0]) * (v2[1] - v0[1]) - (v2[0] - v0[0]) * (v1[1] - v0[1])
    wts = (WA * WB * A).ravel() * det
    return QuadratureRule(pts, wts, degree)


@lru_cache(maxsize=32)
def _reference_triangle_rule(degree):
    """Duffy rule on the triangle (0,0)-(1,0)-(0,1); weights sum to 1/2."""
    npts = max(1, (int(degree) + 3) // 2)
    g, w = leggauss(npts)
    a = 0.5 * (g + 1.0)
    wa = 0.5 * w
    A, B = np.meshgrid(a, a, indexing="ij")
    WA, WB = np.meshgrid(wa, wa, indexing="ij")
    X = (A - A * B).ravel()
    Y = (A * B).ravel()
    W = (WA * WB * A).ravel()
    X.setflags(write=False)
    Y.setflags(write=False)
    W.setflags(write=False)
    return X, Y, W


def _fan_triangles(coords, center):
    m = coords.shape[0]
    nxt = np.roll(np.arange(m), -1)
    t = coords[nxt] - coords
    rel = center[None, :] - coords
    cross = t[:, 0] * rel[:, 1] - t[:, 1] * rel[:, 0]
    if np.all(cross > 0.0):
        return [(center, coords[i], coords[nxt[i]]) for i in range(m)]
    return None


def _ear_clip(coords):
    idx = list(range(coords.shape[0]))
    tris = []
    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 10000:
            raise GeometryError("ear clipping failed; polygon may be non-simple")
        m = len(idx)
        scale = max(np.ptp(coords[:, 0]), np.ptp(coords[:, 1]))
        for k in range(m):
            ia, ib, ic = idx[(k - 1) % m], idx[k], idx[(k + 1) % m]
            a, b, c = coords[ia], coords[ib], coords[ic]
            u, v = b - a, c - b
            if u[0] * v[1] - u[1] * v[0] <= 0.0:
                continue
            # No remaining vertex may lie inside the candidate ear.
            others = [coords[j] for j in idx if j not in (ia, ib, ic)]
            if others and _any_inside(np.asarray(others), a, b, c, 1e-14 * scale**2):
                continue
            tris.append((a, b, c))
            del idx[k]
            break
        else:
            raise GeometryError("no ear found; polygon may be non-simple")
    ia, ib, ic = idx
    tris.append((coords[ia], coords[ib], coords[ic]))
    return tris


def _any_inside(pts, a, b, c, tol):
    def side(p, q):
        return (q[0] - p[0]) * (pts[:, 1] - p[1]) - (q[1] - p[1]) * (pts[:, 0] - p[0])

    return bool(np.all(
        np.column_stack((side(a, b), side(b, c), side(c, a))) > tol, axis=1
    ).any())


def polygon_rule(coords, degree, center=None):
    """Quadrature over a simple CCW polygon, exact to `degree`.

    Sub-triangulates as a fan around `center` (default: centroid) when every
    fan triangle is positively oriented, otherwise ear-clips.
    """
    coords = np.asarray(coords, dtype=float)
    if center is None:
        _, center = polygon_area_centroid(coords)
    else:
        center = np.asarray(center, dtype=float)
    tris = _fan_triangles(coords, center)
    if tris is None:
        tris = _ear_clip(coords)
    pts = []
    wts = []
    for v0, v1, v2 in tris:
        rule = triangle_rule(v0, v1, v2, degree)
        pts.append(rule.points)
        wts.append(rule.weights)
    return QuadratureRule(np.vstack(pts), np.concatenate(wts), degree)


class MeshQuadrature:
    """Concatenated per-element polygon rules for vectorized field evaluation.

    Attributes: `points` (m, 2), `weights` (m,), and `offsets` (n_cells + 1,)
    delimiting each element's slice.
    """

    def __init__(self, geoms, degree):
        X, Y, W = _reference_triangle_rule(degree)
        q = W.size
        nc = len(geoms)
        edge_counts = np.array([g.n_edges for g in geoms])

        # Sub-triangle vertices per cell: a fan around the centroid when the
        # centroid sees every edge (checked in bulk per edge-count group),
        # otherwise the ear-clip triangles of that cell.
        tri_counts = np.empty(nc, dtype=np.int64)
        tri_counts[:] = edge_counts
        cell_tris = [None] * nc
        by_m = {}
        for k, g in enumerate(geoms):
            by_m.setdefault(g.n_edges, []).append(k)
        for m, cells in by_m.items():
            idx = np.array(cells)
            coords = np.stack([geoms[k].coords for k in cells])
            centers = np.stack([geoms[k].centroid for k in cells])
            t = np.roll(coords, -1, axis=1) - coords
            rel = centers[:, None, :] - coords
            cross = t[:, :, 0] * rel[:, :, 1] - t[:, :, 1] * rel[:, :, 0]
            star = np.all(cross > 0.0, axis=1)
            a = np.broadcast_to(centers[:, None, :], coords.shape)
            tris = np.stack((a, coords, np.roll(coords, -1, axis=1)), axis=2)
            for j, k in enumerate(idx):
                if star[j]:
                    cell_tris[k] = tris[j]
                else:
                    ear = np.asarray(_ear_clip(geoms[k].coords))
                    cell_tris[k] = ear
                    tri_counts[k] = ear.shape[0]

        tri = np.concatenate(cell_tris, axis=0)
        a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
        e1, e2 = b - a, c - a
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        pts = (
            a[:, None, :]
            + X[None, :, None] * e1[:, None, :]
            + Y[None, :, None] * e2[:, None, :]
        )
        self.points = pts.reshape(-1, 2)
        self.weights = (det[:, None] * W[None, :]).ravel()
        self.offsets = np.concatenate(([0], np.cumsum(tri_counts * q)))
        self.degree = degree

    @property
    def x(self):
        return self.points[:, 0]

    @property
    def y(self):
        return self.points[:, 1]

    def cell_integrals(self, values):
        """Per-element integrals of point values (leading axis = points)."""
        values = np.asarray(values)
        weighted = self.weights.reshape(
            (-1,) + (1,) * (values.ndim - 1)
        ) * values
        sums = np.add.reduceat(weighted, self.offsets[:-1], axis=0)
        # reduceat would misbehave on empty slices; rules are never empty.
        return sums

    def integrate(self, values):
        """Integral over the whole mesh."""
        values = np.asarray(values)
        return np.tensordot(self.weights, values, axes=(0, 0))

    def expand(self, cell_values):
        """Repeat per-cell values onto quadrature points."""
        reps = np.diff(self.offsets)
        return np.repeat(np.asarray(cell_values), reps, axis=0)


def monomial_exponents(degree):
    """Exponent pairs of the 2D monomials up to `degree`, graded order."""
    return [(d - j, j) for d in range(degree + 1) for j in range(d + 1)]


@dataclass(frozen=True)
class ScaledMonomialBasis:
    """Monomials ((x - x_E)/h_E)^a ((y - y_E)/h_E)^b up to a total degree."""

    center: np.ndarray
    diameter: float
    degree: int

    @property
    def exponents(self):
        return monomial_exponents(self.degree)

    def __len__(self):
        return (self.degree + 1) * (self.degree + 2) // 2

    def evaluate(self, points):
        """Basis values at points (m, 2), returned as (m, n_basis)."""
        points = np.asarray(points, dtype=float)
        xi = (points[:, 0] - self.center[0]) / self.diameter
        eta = (points[:, 1] - self.center[1]) / self.diameter
        cols = [xi**a * eta**b for a, b in self.exponents]
        return np.column_stack(cols)


def element_basis(geom, degree):
    return ScaledMonomialBasis(geom.centroid, geom.diameter, degree)


def l2_project(field, geom, degree, quad_degree=None):
    """L2-orthogonal projection of a field onto polynomials on one element.

    `field(x, y)` maps coordinate arrays to values with any trailing
    component shape.  Returns (coefficients, basis) with coefficients of
    shape (n_basis,) + component shape.
    """
    if quad_degree is None:
        quad_degree = 2 * degree + 4
    basis = element_basis(geom, degree)
    rule = polygon_rule(geom.coords, quad_degree, center=geom.centroid)
    V = basis.evaluate(rule.points)
    G = V.T @ (rule.weights[:, None] * V)
    vals = np.asarray(field(rule.points[:, 0], rule.points[:, 1]), dtype=float)
    rhs = np.tensordot(V * rule.weights[:, None], vals, axes=(0, 0))
    coeff = np.linalg.solve(G, rhs.reshape(len(basis), -1))
    return coeff.reshape((len(basis),) + vals.shape[1:]), basis
