"""Criss-cross triangulations of rectangles.

The generator subdivides an nx-by-ny grid of rectangular cells, splitting each
cell into four triangles by its centroid.  All connectivity is precomputed:
edge endpoints, the two incident triangles (plus/minus sides), edge lengths and
canonical unit normals.  The plus side of an edge is the incident triangle with
the smaller index; the canonical normal points from plus to minus (outward on
the boundary, where there is no minus triangle).
"""
from __future__ import annotations

import csv
import pathlib
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Edge:
    index: int
    vertices: tuple[int, int]  # ascending vertex indices
    plus: int
    minus: int  # -1 on the boundary
    length: float
    normal: np.ndarray  # unit, plus -> minus


@dataclass(frozen=True)
class Mesh:
    vertices: np.ndarray       # (V, 2)
    triangles: np.ndarray      # (T, 3) CCW vertex indices
    edge_vertices: np.ndarray  # (E, 2) ascending
    edge_plus: np.ndarray      # (E,)
    edge_minus: np.ndarray     # (E,) -1 on boundary
    edge_normal: np.ndarray    # (E, 2) unit, plus -> minus / outward
    edge_length: np.ndarray    # (E,)
    tri_edges: np.ndarray      # (T, 3) edge indices opposite local ordering
    areas: np.ndarray          # (T,)
    centroids: np.ndarray      # (T, 2)
    bbox: tuple[float, float, float, float]
    edges: list[Edge] = field(repr=False)

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def num_edges(self) -> int:
        return self.edge_vertices.shape[0]

    def internal_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_minus >= 0)

    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_minus < 0)


def build_crisscross_mesh(nx: int, ny: int,
                          bbox: tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0)) -> Mesh:
    """Mesh the rectangle bbox=(x0, y0, x1, y1) with 4*nx*ny triangles.

    Cells are enumerated row by row (y outer); the four triangles of a cell
    appear in the order bottom, right, top, left, each oriented CCW.
    """
    if nx < 1 or ny < 1:
        raise ValueError(f"need nx, ny >= 1, got ({nx}, {ny})")
    x0, y0, x1, y1 = bbox
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate bbox {bbox}")

    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    ncorner = (nx + 1) * (ny + 1)
    vertices = np.empty((ncorner + nx * ny, 2))
    gx, gy = np.meshgrid(xs, ys)  # row-major over iy
    vertices[:ncorner, 0] = gx.ravel()
    vertices[:ncorner, 1] = gy.ravel()
    cx = 0.5 * (xs[:-1] + xs[1:])
    cy = 0.5 * (ys[:-1] + ys[1:])
    gcx, gcy = np.meshgrid(cx, cy)
    vertices[ncorner:, 0] = gcx.ravel()
    vertices[ncorner:, 1] = gcy.ravel()

    def corner(ix: int, iy: int) -> int:
        return iy * (nx + 1) + ix

    triangles = np.empty((4 * nx * ny, 3), dtype=np.int64)
    t = 0
    for iy in range(ny):
        for ix in range(nx):
            bl, br = corner(ix, iy), corner(ix + 1, iy)
            tl, tr = corner(ix, iy + 1), corner(ix + 1, iy + 1)
            c = ncorner + iy * nx + ix
            for tri in ((bl, br, c), (br, tr, c), (tr, tl, c), (tl, bl, c)):
                triangles[t] = tri
                t += 1

    return _finish_mesh(vertices, triangles, bbox)


def _finish_mesh(vertices: np.ndarray, triangles: np.ndarray,
                 bbox: tuple[float, float, float, float]) -> Mesh:
    v = vertices[triangles]
    d1 = v[:, 1] - v[:, 0]
    d2 = v[:, 2] - v[:, 0]
    signed = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    if np.any(signed <= 0):
        raise ValueError("triangle orientation must be CCW")
    areas = signed
    centroids = v.mean(axis=1)

    # pair -> [edge index]; triangles visit edges opposite local vertex k
    pair_to_edge: dict[tuple[int, int], int] = {}
    edge_pairs: list[tuple[int, int]] = []
    incident: list[list[int]] = []
    tri_edges = np.empty_like(triangles)
    for t in range(triangles.shape[0]):
        a, b, c = triangles[t]
        for k, (p, q) in enumerate(((b, c), (c, a), (a, b))):
            key = (p, q) if p < q else (q, p)
            e = pair_to_edge.get(key)
            if e is None:
                e = len(edge_pairs)
                pair_to_edge[key] = e
                edge_pairs.append(key)
                incident.append([])
            incident[e].append(t)
            tri_edges[t, k] = e

    order = sorted(range(len(edge_pairs)), key=lambda e: edge_pairs[e])
    rank = np.empty(len(order), dtype=np.int64)
    rank[order] = np.arange(len(order))
    tri_edges = rank[tri_edges]

    E = len(order)
    edge_vertices = np.array([edge_pairs[e] for e in order], dtype=np.int64)
    edge_plus = np.empty(E, dtype=np.int64)
    edge_minus = np.empty(E, dtype=np.int64)
    for enew, eold in enumerate(order):
        tris = incident[eold]
        if len(tris) == 1:
            edge_plus[enew], edge_minus[enew] = tris[0], -1
        elif len(tris) == 2:
            edge_plus[enew], edge_minus[enew] = min(tris), max(tris)
        else:
            raise ValueError(f"edge shared by {len(tris)} triangles")

    tangent = vertices[edge_vertices[:, 1]] - vertices[edge_vertices[:, 0]]
    edge_length = np.hypot(tangent[:, 0], tangent[:, 1])
    normal = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1) / edge_length[:, None]
    midpoint = 0.5 * (vertices[edge_vertices[:, 0]] + vertices[edge_vertices[:, 1]])
    target = np.where((edge_minus >= 0)[:, None],
                      centroids[edge_minus] - centroids[edge_plus],
                      midpoint - centroids[edge_plus])
    flip = np.einsum("ei,ei->e", normal, target) < 0
    normal[flip] *= -1.0

    edges = [Edge(e, (int(edge_vertices[e, 0]), int(edge_vertices[e, 1])),
                  int(edge_plus[e]), int(edge_minus[e]),
                  float(edge_length[e]), normal[e])
             for e in range(E)]

    for arr in (vertices, triangles, edge_vertices, edge_plus, edge_minus,
                normal, edge_length, tri_edges, areas, centroids):
        arr.setflags(write=False)
    return Mesh(vertices, triangles, edge_vertices, edge_plus, edge_minus,
                normal, edge_length, tri_edges, areas, centroids, bbox, edges)


def classify_edges(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Indices of (internal, boundary) edges; boundary means one incident triangle."""
    return mesh.internal_edges(), mesh.boundary_edges()


def mesh_to_csv(mesh: Mesh, directory: str | pathlib.Path) -> None:
    """Write vertices.csv (x, y), triangles.csv (v0, v1, v2) and
    edges.csv (v0, v1, plus, minus, length, nx, ny)."""
    directory = pathlib.Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "vertices.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["x", "y"])
        for p in mesh.vertices:
            w.writerow([f"{p[0]:.17g}", f"{p[1]:.17g}"])
    with open(directory / "triangles.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["v0", "v1", "v2"])
        for tri in mesh.triangles:
            w.writerow([int(tri[0]), int(tri[1]), int(tri[2])])
    with open(directory / "edges.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["v0", "v1", "plus", "minus", "length", "nx", "ny"])
        for e in mesh.edges:
            w.writerow([e.vertices[0], e.vertices[1], e.plus, e.minus,
                        f"{e.length:.17g}", f"{e.normal[0]:.17g}", f"{e.normal[1]:.17g}"])
