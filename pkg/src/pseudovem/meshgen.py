"""Generators for the six mesh families used in the convergence studies.

T1  structured right triangles (squares split along one diagonal)
T2  uniform squares
T3  notched squares: every cell is non-convex through one reflex vertex
T4  randomly jittered quadrilaterals (interior vertices moved up to 0.2 h)
T5  regular hexagonal tiling clipped to the rectangle
T6  Lloyd-relaxed Voronoi polygons (3 relaxation sweeps)

All generators return a PolyMesh covering the requested rectangle exactly;
the randomized families (T4, T6) are deterministic for a given seed.
"""

from __future__ import annotations

import enum

import numpy as np
from scipy.spatial import Voronoi, cKDTree

from .mesh import MeshError, build_polymesh, polygon_area_centroid

DEFAULT_SEED = 20240811

# T3/T4 midpoint and vertex displacements as a fraction of the cell side.
NOTCH_DEPTH = 0.2
JITTER = 0.2

LLOYD_SWEEPS = 3


class MeshFamily(enum.Enum):
    T1 = "triangles"
    T2 = "squares"
    T3 = "notched squares"
    T4 = "jittered quads"
    T5 = "hexagons"
    T6 = "voronoi"


def generate_mesh(family, n, domain=(0.0, 1.0, 0.0, 1.0), seed=None):
    """Generate an `n`-indexed mesh of one family over a rectangle.

    `n` controls resolution: cells per side for T1-T4, hexagon columns for
    T5, and the number of Voronoi seeds (= cells) for T6.  `seed` feeds the
    randomized families and defaults to DEFAULT_SEED so runs reproduce.
    """
    if isinstance(family, str):
        try:
            family = MeshFamily[family.upper()]
        except KeyError:
            raise MeshError(f"unknown mesh family {family!r}") from None
    n = int(n)
    if n < 1:
        raise MeshError(f"resolution index must be >= 1, got {n}")
    xmin, xmax, ymin, ymax = map(float, domain)
    if not (xmax > xmin and ymax > ymin):
        raise MeshError(f"degenerate domain {domain}")
    domain = (xmin, xmax, ymin, ymax)
    if seed is None:
        seed = DEFAULT_SEED

    builder = {
        MeshFamily.T1: _triangles,
        MeshFamily.T2: _squares,
        MeshFamily.T3: _notched_squares,
        MeshFamily.T4: _jittered_quads,
        MeshFamily.T5: _hexagons,
        MeshFamily.T6: _voronoi_lloyd,
    }[family]
    vertices, cells = builder(n, domain, seed)
    return build_polymesh(vertices, cells, domain=domain)


def _grid_vertices(n, domain):
    xmin, xmax, ymin, ymax = domain
    xs = np.linspace(xmin, xmax, n + 1)
    ys = np.linspace(ymin, ymax, n + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack((X.ravel(), Y.ravel()))


def _gid(i, j, n):
    # Grid corner (i, j) in the (n+1) x (n+1) lattice, i-major.
    return i * (n + 1) + j


def _triangles(n, domain, seed):
    vertices = _grid_vertices(n, domain)
    cells = []
    for i in range(n):
        for j in range(n):
            v00 = _gid(i, j, n)
            v10 = _gid(i + 1, j, n)
            v11 = _gid(i + 1, j + 1, n)
            v01 = _gid(i, j + 1, n)
            cells.append([v00, v10, v11])
            cells.append([v00, v11, v01])
    return vertices, cells


def _squares(n, domain, seed):
    vertices = _grid_vertices(n, domain)
    cells = []
    for i in range(n):
        for j in range(n):
            cells.append(
                [_gid(i, j, n), _gid(i + 1, j, n), _gid(i + 1, j + 1, n), _gid(i, j + 1, n)]
            )
    return vertices, cells


def _notched_squares(n, domain, seed):
    """Square grid where each interior edge midpoint is displaced sideways.

    The displacement pattern is a perfect matching between cells and interior
    edges: every cell receives exactly one midpoint pushed into it, which
    makes that midpoint a reflex vertex of the cell (and a convex bump of the
    donor neighbor).  For n = 1 there are no interior edges and the mesh
    degenerates to a single square.
    """
    xmin, xmax, ymin, ymax = domain
    sx = (xmax - xmin) / n
    sy = (ymax - ymin) / n
    verts = [tuple(v) for v in _grid_vertices(n, domain)]
    mid_id = {}

    def add_mid(key, x, y):
        mid_id[key] = len(verts)
        verts.append((x, y))

    # Horizontal interior edge (i, level j): pushed down into the cell below,
    # except the edge above cell (0, n-2), pushed up into the top-left cell.
    for j in range(1, n):
        for i in range(n):
            x = xmin + (i + 0.5) * sx
            y = ymin + j * sy
            delta = NOTCH_DEPTH * sy
            if i == 0 and j == n - 1 and n >= 2:
                add_mid(("h", i, j), x, y + delta)
            else:
                add_mid(("h", i, j), x, y - delta)
    # Vertical interior edges: along the top row pushed right, plus the edge
    # right of cell (0, n-2) pushed left (its top edge was taken above).
    if n >= 2:
        for i in range(1, n):
            x = xmin + i * sx
            y = ymin + (n - 0.5) * sy
            add_mid(("v", i, n - 1), x + NOTCH_DEPTH * sx, y)
        add_mid(("v", 1, n - 2), xmin + sx - NOTCH_DEPTH * sx, ymin + (n - 1.5) * sy)

    cells = []
    for i in range(n):
        for j in range(n):
            loop = [_gid(i, j, n)]
            if ("h", i, j) in mid_id:
                loop.append(mid_id[("h", i, j)])
            loop.append(_gid(i + 1, j, n))
            if ("v", i + 1, j) in mid_id:
                loop.append(mid_id[("v", i + 1, j)])
            loop.append(_gid(i + 1, j + 1, n))
            if ("h", i, j + 1) in mid_id:
                loop.append(mid_id[("h", i, j + 1)])
            loop.append(_gid(i, j + 1, n))
            if ("v", i, j) in mid_id:
                loop.append(mid_id[("v", i, j)])
            cells.append(loop)
    return np.asarray(verts), cells


def _jittered_quads(n, domain, seed):
    xmin, xmax, ymin, ymax = domain
    sx = (xmax - xmin) / n
    sy = (ymax - ymin) / n
    vertices = _grid_vertices(n, domain)
    rng = np.random.default_rng(seed)
    shift = rng.uniform(-JITTER, JITTER, size=(n + 1, n + 1, 2))
    shift[:, :, 0] *= sx
    shift[:, :, 1] *= sy
    interior = np.zeros((n + 1, n + 1), dtype=bool)
    interior[1:n, 1:n] = True
    grid = vertices.reshape(n + 1, n + 1, 2)
    grid[interior] += shift[interior]
    _, cells = _squares(n, domain, seed)
    return grid.reshape(-1, 2), cells


def _hexagons(n, domain, seed):
    """Pointy-top hexagon tiling clipped to the rectangle.

    Hexagon vertices live on a half-step integer lattice, so shared vertices
    of neighboring cells are computed once and compare bit-equal; clip points
    on the rectangle sides are computed from lexicographically ordered
    segment endpoints for the same reason.  This keeps the clipped tiling
    conforming without any coordinate snapping.
    """
    xmin, xmax, ymin, ymax = domain
    R = (xmax - xmin) / (np.sqrt(3.0) * n)
    dx = np.sqrt(3.0) * R
    half_dx = 0.5 * dx
    half_r = 0.5 * R

    # CCW from the top vertex: offsets in (half_dx, half_r) units.
    m_off = (0, -1, -1, 0, 1, 1)
    p_off = (2, 1, -1, -2, -1, 1)

    lattice_xy = {}

    def lattice(mi, pi):
        pt = lattice_xy.get((mi, pi))
        if pt is None:
            pt = (xmin + mi * half_dx, ymin + pi * half_r)
            lattice_xy[(mi, pi)] = pt
        return pt

    j_top = int(np.ceil((ymax - ymin) / (1.5 * R))) + 1
    polygons = []
    for j in range(0, j_top + 1):
        odd = j & 1
        for i in range(-1, n + 1):
            m0 = 2 * i + odd
            p0 = 3 * j
            hexagon = [lattice(m0 + dm, p0 + dp) for dm, dp in zip(m_off, p_off)]
            clipped = _clip_rectangle(hexagon, xmin, xmax, ymin, ymax)
            if len(clipped) >= 3:
                polygons.append(clipped)

    return _index_shared_vertices(polygons)


def _clip_rectangle(poly, xmin, xmax, ymin, ymax):
    # Sutherland-Hodgman against the four half-planes.  Intersections are
    # computed from canonically ordered endpoints so that the two cells
    # sharing a segment obtain bit-identical clip points.
    def clip(points, inside, cut):
        out = []
        for k, cur in enumerate(points):
            nxt = points[(k + 1) % len(points)]
            if inside(nxt):
                if not inside(cur):
                    out.append(cut(cur, nxt))
                out.append(nxt)
            elif inside(cur):
                out.append(cut(cur, nxt))
        return out

    def cut_x(level):
        def cut(p, q):
            if q < p:
                p, q = q, p
            t = (level - p[0]) / (q[0] - p[0])
            return (level, p[1] + t * (q[1] - p[1]))

        return cut

    def cut_y(level):
        def cut(p, q):
            if q < p:
                p, q = q, p
            t = (level - p[1]) / (q[1] - p[1])
            return (p[0] + t * (q[0] - p[0]), level)

        return cut

    poly = clip(poly, lambda p: p[0] >= xmin, cut_x(xmin))
    if poly:
        poly = clip(poly, lambda p: p[0] <= xmax, cut_x(xmax))
    if poly:
        poly = clip(poly, lambda p: p[1] >= ymin, cut_y(ymin))
    if poly:
        poly = clip(poly, lambda p: p[1] <= ymax, cut_y(ymax))
    # Collapse exact duplicates (vertices that landed on a clip line).
    out = []
    for pt in poly:
        if not out or pt != out[-1]:
            out.append(pt)
    if len(out) > 1 and out[0] == out[-1]:
        out.pop()
    return out


def _index_shared_vertices(polygons):
    # Exact-coordinate vertex table; degenerate (zero-area) cells dropped.
    vert_id = {}
    verts = []
    cells = []
    for poly in polygons:
        coords = np.asarray(poly)
        x, y = coords[:, 0], coords[:, 1]
        area2 = np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)
        scale = max(np.ptp(x), np.ptp(y))
        if area2 <= 1e-14 * scale * scale:
            continue
        loop = []
        for pt in poly:
            vid = vert_id.get(pt)
            if vid is None:
                vid = len(verts)
                vert_id[pt] = vid
                verts.append(pt)
            loop.append(vid)
        cells.append(loop)
    if not cells:
        raise MeshError("tiling produced no cells inside the domain")
    return np.asarray(verts), cells


def _voronoi_lloyd(n, domain, seed):
    xmin, xmax, ymin, ymax = domain
    rng = np.random.default_rng(seed)
    seeds = np.column_stack(
        (rng.uniform(xmin, xmax, n), rng.uniform(ymin, ymax, n))
    )
    for _ in range(LLOYD_SWEEPS):
        polys, _ = _bounded_voronoi(seeds, domain)
        seeds = np.array([polygon_area_centroid(p)[1] for p in polys])
    polys, regions = _bounded_voronoi(seeds, domain)
    return _merge_voronoi_vertices(polys, regions, domain)


def _bounded_voronoi(seeds, domain):
    """Voronoi cells exactly clipped to the rectangle via mirrored seeds.

    Reflecting every seed across the four sides makes each original cell
    bounded, with the rectangle sides appearing as cell boundaries.
    """
    xmin, xmax, ymin, ymax = domain
    n = seeds.shape[0]
    mirrors = [seeds]
    for axis, level in ((0, xmin), (0, xmax), (1, ymin), (1, ymax)):
        m = seeds.copy()
        m[:, axis] = 2.0 * level - m[:, axis]
        mirrors.append(m)
    vor = Voronoi(np.vstack(mirrors))
    polys = []
    regions = []
    for i in range(n):
        region = vor.regions[vor.point_region[i]]
        if -1 in region or len(region) < 3:
            raise MeshError("unbounded Voronoi cell; seeds may be degenerate")
        pts = vor.vertices[region]
        ang = np.arctan2(pts[:, 1] - seeds[i, 1], pts[:, 0] - seeds[i, 0])
        order = np.argsort(ang)
        polys.append(pts[order])
        regions.append(np.asarray(region, dtype=np.int64)[order])
    return polys, regions


def _merge_voronoi_vertices(polys, regions, domain):
    xmin, xmax, ymin, ymax = domain
    scale = max(xmax - xmin, ymax - ymin)
    tol = 1e-12 * scale

    used = np.unique(np.concatenate(regions))
    remap = {int(v): k for k, v in enumerate(used)}
    coords = np.empty((used.size, 2))
    for poly, region in zip(polys, regions):
        for pt, v in zip(poly, region):
            coords[remap[int(v)]] = pt

    # Mirrored seeds place cell vertices on the rectangle sides only up to
    # round-off; snap them exactly onto the sides before merging.
    for axis, level in ((0, xmin), (0, xmax), (1, ymin), (1, ymax)):
        near = np.abs(coords[:, axis] - level) < tol
        coords[near, axis] = level

    # Near-coincident Voronoi vertices (degenerate quadruples produced by the
    # mirror construction) are merged via union-find.
    parent = np.arange(coords.shape[0])

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in cKDTree(coords).query_pairs(tol):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    roots = np.array([find(a) for a in range(coords.shape[0])])
    unique_roots, root_index = np.unique(roots, return_inverse=True)
    verts = coords[unique_roots]
    cells = []
    for region in regions:
        loop = []
        for v in region:
            vid = int(root_index[remap[int(v)]])
            if not loop or (vid != loop[-1] and vid != loop[0]):
                loop.append(vid)
        if len(loop) < 3:
            raise MeshError("Voronoi cell degenerated to fewer than 3 vertices")
        cells.append(loop)
    return verts, cells
