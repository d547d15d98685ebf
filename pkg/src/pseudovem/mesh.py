"""Polygonal mesh data model, per-element geometry, quality checks and file I/O.

A mesh is a flat collection of vertices plus counterclockwise cells.  Edges
are derived, not stored by the caller: every edge carries a global orientation
(its unit normal is the traversal direction rotated by -90 degrees) chosen so
that the normal points out of the lower-indexed incident cell, and outward on
the boundary.  Incident cells see the edge through per-cell signs, +1 when the
global normal is outward for that cell and -1 otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class MeshError(Exception):
    """Raised when mesh construction or validation finds invalid input."""


class MeshFormatError(MeshError):
    """Raised on malformed mesh files; carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


AREA_RTOL = 1e-12


@dataclass(frozen=True)
class PolyMesh:
    """Conforming polygonal mesh of an axis-aligned rectangle.

    Attributes
    ----------
    vertices : (nv, 2) float array
    cells : tuple of int arrays, each listing a cell's vertices in CCW order
    edges : (ne, 2) int array, oriented endpoint pairs (a, b)
    edge_cells : (ne, 2) int array, [owner, neighbor]; neighbor -1 on boundary
    edge_normals : (ne, 2) float array, unit normals (outward for the owner)
    edge_lengths : (ne,) float array
    boundary_marker : (ne,) int array, 0 interior / 1 Dirichlet boundary
    cell_edges : tuple of int arrays, edge ids in traversal order per cell
    cell_edge_signs : tuple of int arrays, +1/-1 against the global normal
    bbox : (xmin, xmax, ymin, ymax)
    """

    vertices: np.ndarray
    cells: tuple
    edges: np.ndarray
    edge_cells: np.ndarray
    edge_normals: np.ndarray
    edge_lengths: np.ndarray
    boundary_marker: np.ndarray
    cell_edges: tuple
    cell_edge_signs: tuple
    bbox: tuple

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_edges(self):
        return self.edges.shape[0]

    @property
    def boundary_edges(self):
        return np.nonzero(self.boundary_marker != 0)[0]


def _freeze(arr):
    arr.setflags(write=False)
    return arr


def build_polymesh(vertices, cells, domain=None):
    """Assemble a PolyMesh from vertices and CCW cell loops.

    Derives the edge table, orientations and boundary markers, and enforces
    the structural invariants: positive cell areas, counterclockwise
    orientation, conforming edges (shared by at most two cells, traversed in
    opposite directions), and, when `domain` is given, that cell areas sum to
    the rectangle area within 1e-12 relative.

    Parameters
    ----------
    vertices : (nv, 2) array_like
    cells : sequence of int sequences
    domain : optional (xmin, xmax, ymin, ymax) tuple; enables the area cover
        check and is stored as the bounding box.
    """
    vertices = np.ascontiguousarray(vertices, dtype=float)
    if vertices.ndim != 2 or vertices.shape[1] != 2:
        raise MeshError(f"vertices must be (nv, 2), got {vertices.shape}")
    nv = vertices.shape[0]

    cell_arrays = []
    for k, cell in enumerate(cells):
        idx = np.asarray(cell, dtype=np.int64)
        if idx.size < 3:
            raise MeshError(f"cell {k} has fewer than 3 vertices")
        if idx.min() < 0 or idx.max() >= nv:
            raise MeshError(f"cell {k} references vertex out of range")
        if np.any(idx == np.roll(idx, -1)):
            raise MeshError(f"cell {k} repeats a vertex consecutively")
        cell_arrays.append(idx)

    # Orientation and area checks (shoelace).
    total_area = 0.0
    for k, idx in enumerate(cell_arrays):
        pts = vertices[idx]
        x, y = pts[:, 0], pts[:, 1]
        area2 = np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)
        if not area2 > 0.0:
            raise MeshError(f"cell {k} is not counterclockwise (2*area={area2:g})")
        total_area += 0.5 * area2

    # Edge table: first incident cell owns the edge and fixes its direction.
    edge_index = {}
    edges = []
    edge_cells = []
    cell_edges = []
    cell_edge_signs = []
    for k, idx in enumerate(cell_arrays):
        m = idx.size
        eids = np.empty(m, dtype=np.int64)
        signs = np.empty(m, dtype=np.int64)
        for i in range(m):
            a = int(idx[i])
            b = int(idx[(i + 1) % m])
            key = (a, b) if a < b else (b, a)
            e = edge_index.get(key)
            if e is None:
                e = len(edges)
                edge_index[key] = e
                edges.append((a, b))
                edge_cells.append([k, -1])
                signs[i] = 1
            else:
                ea, eb = edges[e]
                if edge_cells[e][1] != -1:
                    raise MeshError(f"edge {key} shared by more than two cells")
                if (ea, eb) != (b, a):
                    raise MeshError(
                        f"edge {key} traversed twice in the same direction; "
                        f"cells {edge_cells[e][0]} and {k} are inconsistently oriented"
                    )
                edge_cells[e][1] = k
                signs[i] = -1
            eids[i] = e
        cell_edges.append(_freeze(eids))
        cell_edge_signs.append(_freeze(signs))

    edges = np.asarray(edges, dtype=np.int64)
    edge_cells = np.asarray(edge_cells, dtype=np.int64)

    tang = vertices[edges[:, 1]] - vertices[edges[:, 0]]
    lengths = np.hypot(tang[:, 0], tang[:, 1])
    if np.any(lengths <= 0.0):
        raise MeshError("zero-length edge")
    normals = np.column_stack((tang[:, 1], -tang[:, 0])) / lengths[:, None]

    boundary = (edge_cells[:, 1] == -1).astype(np.int64)

    if domain is not None:
        xmin, xmax, ymin, ymax = map(float, domain)
        if not (xmax > xmin and ymax > ymin):
            raise MeshError(f"degenerate domain {domain}")
        dom_area = (xmax - xmin) * (ymax - ymin)
        # Summation roundoff grows with the number of cells.
        rtol = AREA_RTOL + len(cell_arrays) * np.finfo(float).eps
        if abs(total_area - dom_area) > rtol * dom_area:
            raise MeshError(
                f"cell areas sum to {total_area!r}, domain area is {dom_area!r}"
            )
        bbox = (xmin, xmax, ymin, ymax)
    else:
        bbox = (
            float(vertices[:, 0].min()),
            float(vertices[:, 0].max()),
            float(vertices[:, 1].min()),
            float(vertices[:, 1].max()),
        )

    return PolyMesh(
        vertices=_freeze(vertices),
        cells=tuple(_freeze(c) for c in cell_arrays),
        edges=_freeze(edges),
        edge_cells=_freeze(edge_cells),
        edge_normals=_freeze(normals),
        edge_lengths=_freeze(lengths),
        boundary_marker=_freeze(boundary),
        cell_edges=tuple(cell_edges),
        cell_edge_signs=tuple(cell_edge_signs),
        bbox=bbox,
    )


@dataclass(frozen=True)
class ElementGeometry:
    """Per-element geometric data, with edge quantities in traversal order.

    `edge_normals` are outward unit normals for this element (global normal
    times the element's sign).
    """

    cell: int
    coords: np.ndarray
    area: float
    centroid: np.ndarray
    diameter: float
    edge_ids: np.ndarray
    edge_signs: np.ndarray
    edge_lengths: np.ndarray
    edge_midpoints: np.ndarray
    edge_normals: np.ndarray

    @property
    def n_edges(self):
        return self.edge_ids.size


def polygon_area_centroid(coords):
    """Shoelace area and first-moment centroid of a simple CCW polygon."""
    x, y = coords[:, 0], coords[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    if not area > 0.0:
        raise MeshError(f"polygon area {area:g} is not positive")
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return area, np.array([cx, cy])


def element_geometry(mesh, cell):
    """Compute ElementGeometry for one cell of a mesh."""
    idx = mesh.cells[cell]
    coords = mesh.vertices[idx]
    area, centroid = polygon_area_centroid(coords)
    diff = coords[:, None, :] - coords[None, :, :]
    diameter = float(np.sqrt((diff ** 2).sum(-1).max()))
    eids = mesh.cell_edges[cell]
    signs = mesh.cell_edge_signs[cell]
    mids = 0.5 * (coords + np.roll(coords, -1, axis=0))
    return ElementGeometry(
        cell=cell,
        coords=coords,
        area=area,
        centroid=centroid,
        diameter=diameter,
        edge_ids=eids,
        edge_signs=signs,
        edge_lengths=mesh.edge_lengths[eids],
        edge_midpoints=mids,
        edge_normals=signs[:, None] * mesh.edge_normals[eids],
    )


def all_geometries(mesh):
    """ElementGeometry for every cell, in cell order."""
    return [element_geometry(mesh, k) for k in range(mesh.n_cells)]


def mesh_size(geoms):
    """Largest element diameter."""
    return max(g.diameter for g in geoms)


@dataclass
class ValidationReport:
    """Mesh quality summary. Violations are reported, never raised."""

    n_cells: int
    min_edge_ratio: float
    min_star_margin: float
    edge_ratio_violations: list = field(default_factory=list)
    star_violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.edge_ratio_violations and not self.star_violations


def validate_mesh(mesh, min_edge_ratio=0.01, star_radius_ratio=0.01):
    """Check mesh regularity: edge-length ratios and star-shapedness.

    Per element this flags `min_e h_e < min_edge_ratio * h_E`, and flags
    elements whose kernel does not contain the disk of radius
    `star_radius_ratio * h_E` around the centroid.  A point z lies in the
    kernel of a CCW polygon iff it is on the left of every directed edge; the
    clearance of that disk is the minimum signed distance of z to the edge
    lines.  Results are reported, not raised.
    """
    worst_ratio = np.inf
    worst_margin = np.inf
    ratio_bad = []
    star_bad = []
    for k in range(mesh.n_cells):
        g = element_geometry(mesh, k)
        ratio = g.edge_lengths.min() / g.diameter
        worst_ratio = min(worst_ratio, ratio)
        if ratio < min_edge_ratio:
            ratio_bad.append((k, float(ratio)))

        a = g.coords
        b = np.roll(a, -1, axis=0)
        t = b - a
        rel = g.centroid[None, :] - a
        dist = (t[:, 0] * rel[:, 1] - t[:, 1] * rel[:, 0]) / np.hypot(t[:, 0], t[:, 1])
        margin = float(dist.min() / g.diameter)
        worst_margin = min(worst_margin, margin)
        if margin < star_radius_ratio:
            star_bad.append((k, margin))
    return ValidationReport(
        n_cells=mesh.n_cells,
        min_edge_ratio=float(worst_ratio),
        min_star_margin=float(worst_margin),
        edge_ratio_violations=ratio_bad,
        star_violations=star_bad,
    )


FORMAT_HEADER = "pseudovem-mesh v1"


def save_mesh(mesh, path):
    """Write a mesh as versioned structured text.

    Layout: a header line, a `vertices` block (`index x y`), a `cells` block
    (`index count v1 ... vk`), and a `boundary` block (`edge v_a v_b marker`).
    Floats use %.17g so a save/load round trip is bit-exact.
    """
    lines = [FORMAT_HEADER]
    lines.append(f"vertices {mesh.n_vertices}")
    for i, (x, y) in enumerate(mesh.vertices):
        lines.append("%d %.17g %.17g" % (i, x, y))
    lines.append(f"cells {mesh.n_cells}")
    for k, idx in enumerate(mesh.cells):
        lines.append("%d %d %s" % (k, idx.size, " ".join(str(v) for v in idx)))
    bedges = mesh.boundary_edges
    lines.append(f"boundary {bedges.size}")
    for e in bedges:
        a, b = mesh.edges[e]
        lines.append("%d %d %d %d" % (e, a, b, mesh.boundary_marker[e]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_block_header(tok, name, lineno):
    if len(tok) != 2 or tok[0] != name:
        raise MeshFormatError(f"expected '{name} <count>'", lineno)
    try:
        return int(tok[1])
    except ValueError:
        raise MeshFormatError(f"bad {name} count {tok[1]!r}", lineno) from None


def load_mesh(path):
    """Read a mesh written by save_mesh; errors carry line numbers."""
    with open(path) as fh:
        raw = fh.read().splitlines()
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(raw) if ln.strip()]
    if not lines or lines[0][1] != FORMAT_HEADER:
        raise MeshFormatError(f"missing header {FORMAT_HEADER!r}", 1)
    pos = 1

    def next_line(what):
        nonlocal pos
        if pos >= len(lines):
            raise MeshFormatError(f"unexpected end of file, wanted {what}", len(raw))
        lineno, ln = lines[pos]
        pos += 1
        return lineno, ln.split()

    lineno, tok = next_line("vertices block")
    nv = _parse_block_header(tok, "vertices", lineno)
    vertices = np.empty((nv, 2))
    for i in range(nv):
        lineno, tok = next_line("vertex line")
        if len(tok) != 3:
            raise MeshFormatError("vertex line needs 'index x y'", lineno)
        try:
            j, x, y = int(tok[0]), float(tok[1]), float(tok[2])
        except ValueError:
            raise MeshFormatError(f"bad vertex line {tok}", lineno) from None
        if j != i:
            raise MeshFormatError(f"vertex index {j}, expected {i}", lineno)
        vertices[i] = (x, y)

    lineno, tok = next_line("cells block")
    nc = _parse_block_header(tok, "cells", lineno)
    cells = []
    for k in range(nc):
        lineno, tok = next_line("cell line")
        try:
            vals = [int(t) for t in tok]
        except ValueError:
            raise MeshFormatError(f"bad cell line {tok}", lineno) from None
        if len(vals) < 3 or vals[0] != k or vals[1] != len(vals) - 2:
            raise MeshFormatError("cell line needs 'index count v1 ... vk'", lineno)
        idx = vals[2:]
        if min(idx) < 0 or max(idx) >= nv:
            raise MeshFormatError(f"cell {k} references vertex out of range", lineno)
        cells.append(idx)

    lineno, tok = next_line("boundary block")
    nb = _parse_block_header(tok, "boundary", lineno)
    markers = []
    for _ in range(nb):
        lineno, tok = next_line("boundary line")
        if len(tok) != 4:
            raise MeshFormatError("boundary line needs 'edge v_a v_b marker'", lineno)
        try:
            e, a, b, m = (int(t) for t in tok)
        except ValueError:
            raise MeshFormatError(f"bad boundary line {tok}", lineno) from None
        markers.append((lineno, e, a, b, m))

    try:
        mesh = build_polymesh(vertices, cells)
    except MeshError as exc:
        raise MeshFormatError(str(exc)) from exc

    pair_to_edge = {}
    for e, (a, b) in enumerate(mesh.edges):
        pair_to_edge[(min(a, b), max(a, b))] = e
    marker = np.array(mesh.boundary_marker)
    listed = set()
    for lineno, e, a, b, m in markers:
        eid = pair_to_edge.get((min(a, b), max(a, b)))
        if eid is None or eid != e:
            raise MeshFormatError(f"boundary entry ({e}, {a}, {b}) matches no edge", lineno)
        if mesh.edge_cells[eid, 1] != -1:
            raise MeshFormatError(f"edge ({a}, {b}) is interior, cannot carry a marker", lineno)
        marker[eid] = m
        listed.add(eid)
    missing = set(mesh.boundary_edges.tolist()) - listed
    if missing:
        raise MeshFormatError(f"boundary edges {sorted(missing)} missing from boundary block")

    return PolyMesh(
        vertices=mesh.vertices,
        cells=mesh.cells,
        edges=mesh.edges,
        edge_cells=mesh.edge_cells,
        edge_normals=mesh.edge_normals,
        edge_lengths=mesh.edge_lengths,
        boundary_marker=_freeze(marker),
        cell_edges=mesh.cell_edges,
        cell_edge_signs=mesh.cell_edge_signs,
        bbox=mesh.bbox,
    )
