"""Element-local discrete forms and the global saddle-point system.

Per element with N = 2 * (#edges) tensor DOFs the local blocks are

    A_c      = (|E|/nu) (Dev Pi)^T (Dev Pi)
    A_h      = A_c + s_nu (tr A_c / N) (I - T Pi)^T (I - T Pi)
    B[r, j]  = s_e  (divergence theorem; row r picks DOFs of that row)
    C[:, m]  = c_nu Pi^T vec(dev(e_m (x) int_E beta))
    D        = kappa |E| I
    F_E      = -int_E f
    G_E[j]   = (1/h_e) int_e g_r  on boundary edges

where Pi maps DOFs to the projected constant tensor, T maps a constant
tensor to its DOFs, and Dev takes the deviator.  The DOF-product
stabilizer is rescaled by the mean diagonal of the consistency block
(tr A_c / N), so its strength tracks the consistency term across cell
shapes and viscosities; the multipliers s_nu and c_nu depend on the
configured variants.  The global system couples the blocks with one
extra row/column enforcing the zero-trace constraint on the
pseudostress.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .polybasis import MeshQuadrature, edge_rule, polygon_rule
from .vemspace import cell_dof_ids, dof_matrix_of_constants, n_sigma_dofs, pi_matrix


class AssemblyError(Exception):
    """Raised on inconsistent local/global DOF data."""


STAB_VARIANTS = ("paper5", "scaled")

# Flattened-tensor deviator: subtracts half the trace from the diagonal.
DEV = np.array(
    [
        [0.5, 0.0, 0.0, -0.5],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [-0.5, 0.0, 0.0, 0.5],
    ]
)

BOUNDARY_EDGE_DEGREE = 11


def stab_weight(variant, nu):
    """Multiplier s_nu applied on top of the trace-rescaled DOF product."""
    if variant == "paper5":
        return 1.0
    if variant == "scaled":
        return 1.0 / nu
    raise AssemblyError(f"unknown stabilization variant {variant!r}; known: {STAB_VARIANTS}")


@dataclass(frozen=True)
class LocalForms:
    """Local matrices and load vectors of one element; `dofs` are the global
    tensor DOF ids (edge-major) the rows/columns refer to."""

    cell: int
    dofs: np.ndarray
    A: np.ndarray
    S: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    F: np.ndarray
    G: np.ndarray
    pi: np.ndarray
    area: float


@dataclass(frozen=True)
class SaddleSystem:
    """Sparse saddle system [[A + C-cols, B^T, t^T], [B, -D, 0], [t, 0, 0]]."""

    matrix: sp.csc_matrix
    rhs: np.ndarray
    n_sigma: int
    n_u: int
    trace_row: np.ndarray

    @property
    def dimension(self):
        return self.n_sigma + self.n_u + 1


def _dev_outer(b):
    """vec(dev(e_m (x) b)) for m = 0, 1, stacked as columns of a (4, 2) array."""
    b0, b1 = b
    return np.array(
        [
            [0.5 * b0, -0.5 * b1],
            [b1, 0.0],
            [0.0, b0],
            [-0.5 * b0, 0.5 * b1],
        ]
    )


def _forms_kernel(geom, case, stab, c_nu_off, f_int, beta_int, g_moments):
    nu = case.params.nu
    P = pi_matrix(geom)
    T = dof_matrix_of_constants(geom)
    n = P.shape[1]

    DP = DEV @ P
    A_cons = (geom.area / nu) * (DP.T @ DP)
    R = np.eye(n) - T @ P
    S = (stab_weight(stab, nu) * np.trace(A_cons) / n) * (R.T @ R)

    B = np.zeros((2, n))
    B[0, 0::2] = geom.edge_signs
    B[1, 1::2] = geom.edge_signs

    c_nu = 1.0 if c_nu_off else 1.0 / nu
    C = c_nu * (P.T @ _dev_outer(beta_int))

    D = case.params.kappa * geom.area * np.eye(2)
    F = -np.asarray(f_int, dtype=float)

    G = np.zeros(n)
    if g_moments is not None:
        for j, val in g_moments:
            G[j] = val

    return LocalForms(
        cell=geom.cell,
        dofs=cell_dof_ids_from_geom(geom),
        A=A_cons + S,
        S=S,
        B=B,
        C=C,
        D=D,
        F=F,
        G=G,
        pi=P,
        area=geom.area,
    )


def cell_dof_ids_from_geom(geom):
    out = np.empty(2 * geom.n_edges, dtype=np.int64)
    out[0::2] = 2 * geom.edge_ids
    out[1::2] = 2 * geom.edge_ids + 1
    return out


def _boundary_moments(mesh, geom, case):
    """[(local dof, (1/h_e) int_e g_r)] over this element's boundary edges."""
    moments = []
    for i, e in enumerate(geom.edge_ids):
        if mesh.boundary_marker[e] == 0:
            continue
        a, b = mesh.edges[e]
        rule = edge_rule(mesh.vertices[a], mesh.vertices[b], BOUNDARY_EDGE_DEGREE)
        gvals = np.asarray(case.g(rule.points[:, 0], rule.points[:, 1]), dtype=float)
        integral = rule.integrate(gvals) / mesh.edge_lengths[e]
        s = geom.edge_signs[i]
        moments.append((2 * i, s * integral[0]))
        moments.append((2 * i + 1, s * integral[1]))
    return moments


def local_forms(geom, case, stab="paper5", c_nu_off=False, mesh=None):
    """Build the LocalForms of one element.

    Load and convective integrals use a polygon rule of the case's volume
    degree.  `mesh` is needed only when the element touches the boundary
    (for the Dirichlet moments of g).
    """
    rule = polygon_rule(geom.coords, case.volume_degree, center=geom.centroid)
    f_int = rule.integrate(np.asarray(case.f(rule.points[:, 0], rule.points[:, 1])))
    beta_int = rule.integrate(np.asarray(case.params.beta(rule.points[:, 0], rule.points[:, 1])))
    g_moments = None
    if mesh is not None and np.any(mesh.boundary_marker[geom.edge_ids] != 0):
        g_moments = _boundary_moments(mesh, geom, case)
    return _forms_kernel(geom, case, stab, c_nu_off, f_int, beta_int, g_moments)


def build_all_local_forms(mesh, geoms, case, stab="paper5", c_nu_off=False, quad=None):
    """LocalForms for every element, computed in bulk.

    Load integrals come from one sweep over a concatenated mesh quadrature,
    and the matrix blocks are batched per edge-count group (one stacked
    einsum chain per group), so large meshes avoid per-cell Python work.
    The result matches `local_forms` cell by cell.
    """
    if len(geoms) != mesh.n_cells:
        raise AssemblyError("geometry list does not match the mesh")
    if quad is None:
        quad = MeshQuadrature(geoms, case.volume_degree)
    f_ints = quad.cell_integrals(np.asarray(case.f(quad.x, quad.y)))
    b_ints = quad.cell_integrals(np.asarray(case.params.beta(quad.x, quad.y)))
    boundary_cells = set(mesh.edge_cells[mesh.boundary_edges, 0].tolist())

    nu = case.params.nu
    kappa = case.params.kappa
    s_nu = stab_weight(stab, nu)
    c_nu = 1.0 if c_nu_off else 1.0 / nu

    by_m = {}
    for k, g in enumerate(geoms):
        by_m.setdefault(g.n_edges, []).append(k)

    out = [None] * mesh.n_cells
    for m, cells in by_m.items():
        idx = np.array(cells)
        n = 2 * m
        eids = np.stack([geoms[k].edge_ids for k in cells])
        signs = np.stack([geoms[k].edge_signs for k in cells]).astype(float)
        mids = np.stack([geoms[k].edge_midpoints for k in cells])
        normals = np.stack([geoms[k].edge_normals for k in cells])
        lengths = np.stack([geoms[k].edge_lengths for k in cells])
        cents = np.stack([geoms[k].centroid for k in cells])
        areas = np.array([geoms[k].area for k in cells])
        kk = idx.size

        coef = signs[:, :, None] * (mids - cents[:, None, :]) / areas[:, None, None]
        P = np.zeros((kk, 4, n))
        P[:, 0, 0::2] = coef[:, :, 0]
        P[:, 1, 0::2] = coef[:, :, 1]
        P[:, 2, 1::2] = coef[:, :, 0]
        P[:, 3, 1::2] = coef[:, :, 1]

        hn = lengths[:, :, None] * signs[:, :, None] * normals
        T = np.zeros((kk, n, 4))
        T[:, 0::2, 0] = hn[:, :, 0]
        T[:, 0::2, 1] = hn[:, :, 1]
        T[:, 1::2, 2] = hn[:, :, 0]
        T[:, 1::2, 3] = hn[:, :, 1]

        DP = np.matmul(DEV, P)
        A_cons = (areas / nu)[:, None, None] * np.matmul(DP.transpose(0, 2, 1), DP)
        R = np.eye(n)[None, :, :] - np.matmul(T, P)
        alpha = s_nu * np.trace(A_cons, axis1=1, axis2=2) / n
        S = alpha[:, None, None] * np.matmul(R.transpose(0, 2, 1), R)
        A = A_cons + S

        B = np.zeros((kk, 2, n))
        B[:, 0, 0::2] = signs
        B[:, 1, 1::2] = signs

        b0, b1 = b_ints[idx, 0], b_ints[idx, 1]
        dev_outer = np.zeros((kk, 4, 2))
        dev_outer[:, 0, 0] = 0.5 * b0
        dev_outer[:, 0, 1] = -0.5 * b1
        dev_outer[:, 1, 0] = b1
        dev_outer[:, 2, 1] = b0
        dev_outer[:, 3, 0] = -0.5 * b0
        dev_outer[:, 3, 1] = 0.5 * b1
        C = c_nu * np.matmul(P.transpose(0, 2, 1), dev_outer)

        gdofs = np.empty((kk, n), dtype=np.int64)
        gdofs[:, 0::2] = 2 * eids
        gdofs[:, 1::2] = 2 * eids + 1

        eye2 = np.eye(2)
        for j, k in enumerate(cells):
            G = np.zeros(n)
            if k in boundary_cells:
                for col, val in _boundary_moments(mesh, geoms[k], case):
                    G[col] = val
            out[k] = LocalForms(
                cell=k,
                dofs=gdofs[j],
                A=A[j],
                S=S[j],
                B=B[j],
                C=C[j],
                D=kappa * areas[j] * eye2,
                F=-f_ints[k],
                G=G,
                pi=P[j],
                area=areas[j],
            )
    return out


def assemble_global(mesh, case, locals_):
    """Scatter local forms into the global sparse saddle system.

    Row/column layout: tensor DOFs (2 per edge), then velocity DOFs (2 per
    cell), then the single trace multiplier.  The scatter is sequential in
    cell order, so the assembled matrix is bit-reproducible.
    """
    ns = n_sigma_dofs(mesh)
    nu_dofs = 2 * mesh.n_cells
    dim = ns + nu_dofs + 1
    if len(locals_) != mesh.n_cells:
        raise AssemblyError(
            f"expected {mesh.n_cells} local form sets, got {len(locals_)}"
        )

    rows, cols, vals = [], [], []
    rhs = np.zeros(dim)
    trace = np.zeros(ns)

    for k, lf in enumerate(locals_):
        if lf.cell != k:
            raise AssemblyError(f"local forms out of order at cell {k}")
        d = lf.dofs
        if d.min() < 0 or d.max() >= ns:
            raise AssemblyError(f"cell {k} references tensor DOFs outside the mesh")
        n = d.size
        urow = ns + 2 * k

        rows.append(np.repeat(d, n))
        cols.append(np.tile(d, n))
        vals.append(lf.A.reshape(-1))

        # First-equation coupling to u: B^T plus the convective block.
        coup = lf.B.T + lf.C
        rows.append(np.repeat(d, 2))
        cols.append(np.tile([urow, urow + 1], n))
        vals.append(coup.reshape(-1))

        rows.append(np.repeat([urow, urow + 1], n))
        cols.append(np.tile(d, 2))
        vals.append(lf.B.reshape(-1))

        rows.append(np.array([urow, urow, urow + 1, urow + 1]))
        cols.append(np.array([urow, urow + 1, urow, urow + 1]))
        vals.append(-lf.D.reshape(-1))

        rhs[d] += lf.G
        rhs[urow:urow + 2] += lf.F
        trace[d] += lf.area * (lf.pi[0] + lf.pi[3])

    tdofs = np.nonzero(trace)[0]
    last = dim - 1
    rows.append(tdofs)
    cols.append(np.full(tdofs.size, last))
    vals.append(trace[tdofs])
    rows.append(np.full(tdofs.size, last))
    cols.append(tdofs)
    vals.append(trace[tdofs])

    matrix = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dim, dim),
    ).tocsc()
    return SaddleSystem(
        matrix=matrix, rhs=rhs, n_sigma=ns, n_u=nu_dofs, trace_row=trace
    )


def dump_system(system, path):
    """Write the matrix in coordinate text form, one `row col value` per line."""
    coo = system.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write("%d %d %.17g\n" % (r, c, v))
