"""Closed surface meshes for the boundary-element solver.

A mesh is a list of flat elements (triangles or planar quads) carrying a
centroid, an outward unit normal, an area and a set of sub-element
quadrature points used for near-field integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull

from .units import ParameterError

__all__ = [
    "SurfaceMesh",
    "MeshFormatError",
    "build_triangle_mesh",
    "build_sphere_mesh",
    "rounded_triangle_area",
    "rounded_triangle_perimeter",
    "save_mesh",
    "load_mesh",
]

# sub-division level of the per-element quadrature: 4**level points per element
_QUAD_LEVEL = 3


class MeshFormatError(ValueError):
    """A mesh file could not be parsed."""


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    centroids: np.ndarray  # (n, 3) nm
    normals: np.ndarray  # (n, 3)
    areas: np.ndarray  # (n,) nm^2
    quad_points: np.ndarray | None = None  # (n, k, 3)
    quad_weights: np.ndarray | None = None  # (n, k)
    vertices: np.ndarray | None = None  # (n, 4, 3); triangles repeat their last vertex
    provenance: str = "unknown"
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        for a in (self.centroids, self.normals, self.areas, self.quad_points, self.quad_weights,
                  self.vertices):
            if a is not None:
                a.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.areas)

    def __len__(self) -> int:
        return self.n

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())

    @property
    def element_radius(self) -> np.ndarray:
        """Radius of the disk with the same area as each element."""
        return np.sqrt(self.areas / math.pi)

    def closure_defect(self) -> float:
        """|sum_j a_j n_j| / sum_j a_j, zero for a closed surface."""
        v = (self.areas[:, None] * self.normals).sum(axis=0)
        return float(np.linalg.norm(v) / self.total_area)

    def mirror_permutation(self, axis: int = 1, tol: float = 1e-6) -> np.ndarray | None:
        """Element permutation induced by the reflection ``x_axis -> -x_axis``.

        Returns None when the mesh is not symmetric under that reflection.
        """
        from scipy.spatial import cKDTree

        flip = np.ones(3)
        flip[axis] = -1.0
        tree = cKDTree(self.centroids)
        dist, perm = tree.query(self.centroids * flip)
        scale = float(np.sqrt(self.areas.mean()))
        if np.max(dist) > tol * max(scale, 1.0):
            return None
        if len(np.unique(perm)) != self.n:
            return None
        if not np.allclose(self.areas[perm], self.areas, rtol=1e-6):
            return None
        if not np.allclose(self.normals[perm], self.normals * flip, atol=1e-6):
            return None
        return perm


# ---------------------------------------------------------------- quadrature


def _triangle_subpoints(tri: np.ndarray, level: int) -> np.ndarray:
    """Centroids of the 4**level congruent sub-triangles of ``tri`` (..., 3, 3)."""
    tris = tri[..., None, :, :]
    for _ in range(level):
        a, b, c = tris[..., 0, :], tris[..., 1, :], tris[..., 2, :]
        ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
        children = [
            np.stack([a, ab, ca], axis=-2),
            np.stack([ab, b, bc], axis=-2),
            np.stack([ca, bc, c], axis=-2),
            np.stack([ab, bc, ca], axis=-2),
        ]
        tris = np.concatenate(children, axis=-3)
    return tris.mean(axis=-2)


def _quad_subpoints(quad: np.ndarray, level: int) -> np.ndarray:
    """Cell centres of a (2**level)^2 bilinear subdivision of ``quad`` (..., 4, 3)."""
    m = 2**level
    t = (np.arange(m) + 0.5) / m
    u, v = np.meshgrid(t, t, indexing="ij")
    u, v = u.ravel(), v.ravel()
    p0, p1, p2, p3 = (quad[..., i, None, :] for i in range(4))
    uu, vv = u[:, None], v[:, None]
    return (1 - uu) * (1 - vv) * p0 + uu * (1 - vv) * p1 + uu * vv * p2 + (1 - uu) * vv * p3


def _from_polygons(tris: np.ndarray, quads: np.ndarray, provenance: str, params: dict) -> SurfaceMesh:
    cents, norms, areas, qp = [], [], [], []
    verts = []
    if len(tris):
        verts.append(np.concatenate([tris, tris[:, 2:3]], axis=1))
        cr = np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])
        a = 0.5 * np.linalg.norm(cr, axis=1)
        cents.append(tris.mean(axis=1))
        norms.append(cr / (2 * a[:, None]))
        areas.append(a)
        qp.append(_triangle_subpoints(tris, _QUAD_LEVEL))
    if len(quads):
        verts.append(quads)
        cr = np.cross(quads[:, 2] - quads[:, 0], quads[:, 3] - quads[:, 1])
        a = 0.5 * np.linalg.norm(cr, axis=1)
        cents.append(quads.mean(axis=1))
        norms.append(cr / (2 * a[:, None]))
        areas.append(a)
        qp.append(_quad_subpoints(quads, _QUAD_LEVEL))
    centroids = np.concatenate(cents)
    normals = np.concatenate(norms)
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    areas = np.concatenate(areas)
    quad_points = np.concatenate(qp)
    quad_weights = np.repeat(areas[:, None] / quad_points.shape[1], quad_points.shape[1], axis=1)
    vertices = np.concatenate(verts)
    return SurfaceMesh(centroids, normals, areas, quad_points, quad_weights, vertices, provenance,
                       dict(params))


# ---------------------------------------------------------------- sphere


def build_sphere_mesh(radius: float, elements_target: int = 1000) -> SurfaceMesh:
    """Quasi-uniform triangulation of a sphere centred at the origin.

    Vertices are a Fibonacci lattice of ``elements_target/2 + 2`` points;
    their convex hull yields ``elements_target`` (rounded to even) triangles.
    The polyhedron is inflated slightly so its total area equals 4 pi r^2.
    """
    if not radius > 0:
        raise ParameterError(f"radius must be positive, got {radius}")
    if elements_target < 8:
        raise ParameterError("a sphere needs at least 8 elements")
    nv = int(elements_target) // 2 + 2
    i = np.arange(nv) + 0.5
    z = 1 - 2 * i / nv
    phi = math.pi * (1 + math.sqrt(5)) * i
    r = np.sqrt(1 - z**2)
    pts = radius * np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    hull = ConvexHull(pts)
    tris = pts[hull.simplices]
    # inflate so that the polyhedron area equals the sphere area
    cr = np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])
    flat_area = 0.5 * np.linalg.norm(cr, axis=1).sum()
    tris = tris * math.sqrt(4 * math.pi * radius**2 / flat_area)
    # orient counter-clockwise seen from outside
    cr = np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])
    flip = np.einsum("ij,ij->i", cr, tris.mean(axis=1)) < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return _from_polygons(tris, np.empty((0, 4, 3)), "sphere",
                          {"radius": float(radius), "elements_target": int(elements_target)})


# ---------------------------------------------------------------- rounded triangular prism


def rounded_triangle_area(side: float, rounding: float) -> float:
    """Area of an equilateral triangle of ``side`` with corners rounded by arcs of ``rounding``."""
    s_in = side - 2 * math.sqrt(3) * rounding
    return math.sqrt(3) / 4 * s_in**2 + 3 * s_in * rounding + math.pi * rounding**2


def rounded_triangle_perimeter(side: float, rounding: float) -> float:
    s_in = side - 2 * math.sqrt(3) * rounding
    return 3 * s_in + 2 * math.pi * rounding


def _rounded_boundary_distance(theta: np.ndarray, side: float, rounding: float) -> np.ndarray:
    """Distance from the centroid to the rounded-triangle outline along ``theta``.

    One corner points along +x.
    """
    h = side / (2 * math.sqrt(3))  # inradius
    s_in = side - 2 * math.sqrt(3) * rounding
    r_in = s_in / math.sqrt(3)  # circumradius of the inner (arc-centre) triangle
    u = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    # outward edge normals sit between the corners at 0, 120, 240 degrees
    edge_dirs = np.deg2rad([60.0, 180.0, 300.0])
    edge_n = np.stack([np.cos(edge_dirs), np.sin(edge_dirs)], axis=-1)
    un = u @ edge_n.T
    with np.errstate(divide="ignore"):
        t_edge = np.where(un > 1e-15, h / np.where(un > 1e-15, un, 1.0), np.inf)
    k = np.argmin(t_edge, axis=-1)
    t = t_edge[np.arange(len(theta)), k]
    if rounding == 0:
        return t
    p = u * t[:, None]
    tang = np.stack([-edge_n[k, 1], edge_n[k, 0]], axis=-1)
    along = np.einsum("ij,ij->i", p, tang)
    corner = np.abs(along) > s_in / 2 + 1e-12
    if np.any(corner):
        # nearest arc centre: inner-triangle vertex on the side of the overshoot
        corner_angles = np.deg2rad([0.0, 120.0, 240.0])
        c = r_in * np.stack([np.cos(corner_angles), np.sin(corner_angles)], axis=-1)
        uc = u[corner] @ c.T  # (m, 3)
        j = np.argmax(uc, axis=-1)
        ucj = uc[np.arange(len(j)), j]
        t[corner] = ucj + np.sqrt(ucj**2 - r_in**2 + rounding**2)
    return t


def _sharp_boundary_distance(theta: np.ndarray, side: float) -> np.ndarray:
    return _rounded_boundary_distance(theta, side, 0.0)


def build_triangle_mesh(
    side: float = 10.0,
    thickness: float = 2.0,
    elements_target: int = 1500,
    corner_rounding: float = 0.5,
) -> SurfaceMesh:
    """Closed triangular prism (two faces plus side walls) with rounded corners.

    The faces are a regular n x n subdivision of an equilateral triangle
    mapped radially onto the rounded outline, so the mesh keeps the full
    C3v x mirror-z symmetry.  Side walls are planar quads.  One corner
    points along +x and the prism is centred at z = 0.
    """
    if not (side > 0 and thickness > 0):
        raise ParameterError("side and thickness must be positive")
    if not 0 <= corner_rounding < side / 4:
        raise ParameterError(f"corner rounding must lie in [0, side/4), got {corner_rounding}")
    if 2 * math.sqrt(3) * corner_rounding >= side:
        raise ParameterError("corner rounding consumes the whole side")
    # elements: 2 n^2 (faces) + 3 n m (walls), m ~ thickness / (side / n)
    n = 2
    while True:
        m = max(1, int(round(thickness * n / side)))
        if 2 * n * n + 3 * n * m >= elements_target or n > 400:
            break
        n += 1
    m = max(1, int(round(thickness * n / side)))

    rv = side / math.sqrt(3)
    corners = rv * np.array([[1.0, 0.0], [-0.5, math.sqrt(3) / 2], [-0.5, -math.sqrt(3) / 2]])
    # barycentric lattice points
    pts, lookup = [], {}
    for i in range(n + 1):
        for j in range(n + 1 - i):
            k = n - i - j
            lookup[(i, j)] = len(pts)
            pts.append((i * corners[0] + j * corners[1] + k * corners[2]) / n)
    pts = np.array(pts)
    rho = np.hypot(pts[:, 0], pts[:, 1])
    theta = np.arctan2(pts[:, 1], pts[:, 0])
    scale = np.ones_like(rho)
    nz = rho > 1e-12
    scale[nz] = _rounded_boundary_distance(theta[nz], side, corner_rounding) / _sharp_boundary_distance(
        theta[nz], side
    )
    pts = pts * scale[:, None]

    faces = []
    for i in range(n):
        for j in range(n - i):
            faces.append((lookup[(i, j)], lookup[(i + 1, j)], lookup[(i, j + 1)]))
            if i + j < n - 1:
                faces.append((lookup[(i + 1, j)], lookup[(i + 1, j + 1)], lookup[(i, j + 1)]))
    faces = np.array(faces)
    z0 = thickness / 2
    top = np.concatenate([pts[faces], np.full(faces.shape + (1,), z0)], axis=-1)
    # make top normals point +z
    cr = np.cross(top[:, 1] - top[:, 0], top[:, 2] - top[:, 0])
    bad = cr[:, 2] < 0
    top[bad] = top[bad][:, [0, 2, 1]]
    bottom = top[:, [0, 2, 1]].copy()
    bottom[..., 2] = -z0

    # outline in counter-clockwise order: edges corner2->corner0 (j=0), corner0->corner1 (k=0), corner1->corner2 (i=0)
    ring = []
    for s in range(n):
        ring.append(lookup[(s, 0)])  # from corner2 (i=0,j=0) to corner0 (i=n)
    for s in range(n):
        ring.append(lookup[(n - s, s)])  # corner0 -> corner1
    for s in range(n):
        ring.append(lookup[(0, n - s)])  # corner1 -> corner2
    ring = np.array(ring)
    outline = pts[ring]
    signed = 0.5 * np.sum(outline[:, 0] * np.roll(outline[:, 1], -1) - np.roll(outline[:, 0], -1) * outline[:, 1])
    if signed < 0:
        outline = outline[::-1]
    zs = np.linspace(-z0, z0, m + 1)
    quads = []
    nb = len(outline)
    for b in range(nb):
        p, q = outline[b], outline[(b + 1) % nb]
        for layer in range(m):
            za, zb = zs[layer], zs[layer + 1]
            quads.append([[p[0], p[1], za], [q[0], q[1], za], [q[0], q[1], zb], [p[0], p[1], zb]])
    quads = np.array(quads)
    tris = np.concatenate([top, bottom])
    return _from_polygons(
        tris,
        quads,
        "triangle-prism",
        {
            "side": float(side),
            "thickness": float(thickness),
            "corner_rounding": float(corner_rounding),
            "elements_target": int(elements_target),
            "n_subdiv": n,
            "n_layers": m,
        },
    )


# ---------------------------------------------------------------- text I/O


def save_mesh(mesh: SurfaceMesh, path) -> None:
    """Write ``Sx Sy sz nx ny nz area`` lines after an element-count header."""
    path = Path(path)
    rows = np.column_stack([mesh.centroids, mesh.normals, mesh.areas])
    with path.open("w") as fh:
        fh.write(f"{mesh.n}\n")
        np.savetxt(fh, rows, fmt="%.17g")


def load_mesh(path) -> SurfaceMesh:
    """Read a mesh written by :func:`save_mesh`.

    Loaded meshes carry no sub-element quadrature; near-field integrals
    then fall back to centroid collocation.
    """
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines:
        raise MeshFormatError(f"{path}: empty mesh file")
    try:
        count = int(lines[0].split()[0])
    except (ValueError, IndexError) as exc:
        raise MeshFormatError(f"{path}:1: expected element count header") from exc
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 7:
            raise MeshFormatError(f"{path}:{lineno}: expected 7 columns, got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise MeshFormatError(f"{path}:{lineno}: {exc}") from exc
    if len(rows) != count:
        raise MeshFormatError(f"{path}: header announces {count} elements, found {len(rows)}")
    arr = np.array(rows)
    normals = arr[:, 3:6] / np.linalg.norm(arr[:, 3:6], axis=1, keepdims=True)
    if np.any(arr[:, 6] <= 0):
        raise MeshFormatError(f"{path}: non-positive element area")
    return SurfaceMesh(arr[:, :3].copy(), normals, arr[:, 6].copy(), provenance=f"file:{path.name}")
