"""Conforming triangulations of a rectangular space-time domain.

Coordinates are ``(x, t)``.  Every triangle is stored counter-clockwise as
``(a, b, c)`` where ``(a, b)`` is its refinement edge and ``c`` its newest
vertex; newest-vertex bisection splits ``(a, b)`` at its midpoint.
"""

from __future__ import annotations

import enum
from functools import cached_property

import numpy as np

from .errors import InvalidArgument, InvalidMesh


class BoundaryTag(enum.IntEnum):
    INITIAL_TIME = 0
    FINAL_TIME = 1
    SPATIAL_INFLOW = 2
    SPATIAL_OUTFLOW = 3


# local edge i runs from vertex i to vertex (i + 1) % 3
LOCAL_EDGES = np.array([[0, 1], [1, 2], [2, 0]])


class SpaceTimeMesh:
    """Immutable triangle mesh with tagged boundary edges.

    Parameters
    ----------
    vertices : (N, 2) array of ``(x, t)`` coordinates.
    triangles : (M, 3) int array, counter-clockwise, refinement edge first.
    boundary_edges : (B, 2) int array of vertex pairs on the boundary.
    boundary_tags : (B,) int array of :class:`BoundaryTag` values.
    parent : (M,) index of the parent triangle in the mesh this one was
        refined from, ``-1`` for roots.
    level : (M,) bisection depth of each triangle.
    """

    def __init__(self, vertices, triangles, boundary_edges, boundary_tags,
                 parent=None, level=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        be = np.sort(np.asarray(boundary_edges, dtype=np.int64).reshape(-1, 2), axis=1)
        self.boundary_edges = be
        self.boundary_tags = np.asarray(boundary_tags, dtype=np.int64).reshape(-1)
        m = len(self.triangles)
        self.parent = np.full(m, -1, dtype=np.int64) if parent is None else np.asarray(parent)
        self.level = np.zeros(m, dtype=np.int64) if level is None else np.asarray(level)
        for arr in (self.vertices, self.triangles, self.boundary_edges,
                    self.boundary_tags, self.parent, self.level):
            arr.setflags(write=False)
        if np.any(self.signed_areas <= 0.0):
            bad = int(np.argmin(self.signed_areas))
            raise InvalidMesh(f"triangle {bad} has non-positive area {self.signed_areas[bad]:g}")

    def __repr__(self):
        return (f"SpaceTimeMesh(n_vertices={self.n_vertices}, "
                f"n_triangles={self.n_triangles}, n_edges={self.n_edges})")

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def n_edges(self):
        return len(self.edges)

    @cached_property
    def signed_areas(self):
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def areas(self):
        return self.signed_areas

    @cached_property
    def _edge_table(self):
        pairs = self.triangles[:, LOCAL_EDGES].reshape(-1, 2)
        keys = np.sort(pairs, axis=1)
        edges, inverse = np.unique(keys, axis=0, return_inverse=True)
        tri_edges = inverse.reshape(-1, 3)
        edge_tris = np.full((len(edges), 2), -1, dtype=np.int64)
        flat_tri = np.repeat(np.arange(self.n_triangles), 3)
        # first occurrence goes to column 0, second to column 1
        order = np.argsort(inverse, kind="stable")
        sorted_e = inverse[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = sorted_e[1:] != sorted_e[:-1]
        edge_tris[sorted_e[first], 0] = flat_tri[order[first]]
        second = ~first
        if np.any(np.bincount(sorted_e, minlength=len(edges)) > 2):
            raise InvalidMesh("edge shared by more than two triangles")
        edge_tris[sorted_e[second], 1] = flat_tri[order[second]]
        return edges, tri_edges, edge_tris

    @property
    def edges(self):
        """(E, 2) sorted vertex pairs."""
        return self._edge_table[0]

    @property
    def tri_edges(self):
        """(M, 3) edge id of each local edge."""
        return self._edge_table[1]

    @property
    def edge_triangles(self):
        """(E, 2) adjacent triangles; ``-1`` marks a boundary side."""
        return self._edge_table[2]

    @cached_property
    def edge_tag_map(self):
        """Dict ``(lo, hi) -> BoundaryTag`` for tagged boundary edges."""
        return {(int(a), int(b)): BoundaryTag(int(t))
                for (a, b), t in zip(self.boundary_edges, self.boundary_tags)}

    @cached_property
    def local_edge_tags(self):
        """(M, 3) tag of each local edge, ``-1`` for interior edges."""
        out = np.full((self.n_triangles, 3), -1, dtype=np.int64)
        if len(self.boundary_edges) == 0:
            return out
        edges = self.edges
        # locate each boundary edge in the edge table
        idx = _row_lookup(edges, self.boundary_edges)
        edge_tag = np.full(len(edges), -1, dtype=np.int64)
        edge_tag[idx] = self.boundary_tags
        return edge_tag[self.tri_edges]

    @cached_property
    def diameters(self):
        p = self.vertices[self.triangles]
        lengths = np.linalg.norm(p[:, [1, 2, 0]] - p, axis=2)
        return lengths.max(axis=1)

    @cached_property
    def edge_lengths_local(self):
        """(M, 3) length of each local edge."""
        p = self.vertices[self.triangles]
        return np.linalg.norm(p[:, [1, 2, 0]] - p, axis=2)

    @cached_property
    def local_normals(self):
        """(M, 3, 2) outward unit normals ``(n_x, n_t)`` of the local edges."""
        p = self.vertices[self.triangles]
        tang = p[:, [1, 2, 0]] - p
        length = np.linalg.norm(tang, axis=2, keepdims=True)
        return np.stack([tang[..., 1], -tang[..., 0]], axis=-1) / length

    @cached_property
    def centroids(self):
        return self.vertices[self.triangles].mean(axis=1)

    @property
    def bounds(self):
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return (lo[0], hi[0]), (lo[1], hi[1])

    def element_geometry(self, k):
        """Return ``(area, diameter, normals)`` of triangle ``k``.

        ``normals`` is a (3, 2) array of outward unit normals, one per local
        edge ``(v0, v1), (v1, v2), (v2, v0)``.
        """
        if not 0 <= k < self.n_triangles:
            raise InvalidArgument(f"triangle index {k} out of range")
        return float(self.areas[k]), float(self.diameters[k]), self.local_normals[k].copy()

    def check_conforming(self):
        """Raise :class:`InvalidMesh` unless the edge table is conforming.

        Every edge must border one or two triangles, edges with one triangle
        must be exactly the tagged boundary edges, and no vertex may lie in
        the interior of another edge.
        """
        counts = (self.edge_triangles >= 0).sum(axis=1)
        bnd = self.edges[counts == 1]
        tagged = {tuple(e) for e in self.boundary_edges.tolist()}
        found = {tuple(e) for e in bnd.tolist()}
        if tagged != found:
            raise InvalidMesh("boundary tags do not match the one-sided edges")
        # hanging-node audit: no vertex strictly inside an edge
        a = self.vertices[self.edges[:, 0]]
        b = self.vertices[self.edges[:, 1]]
        per_chunk = max(1, 2_000_000 // max(1, self.n_edges))
        for chunk in np.array_split(np.arange(self.n_vertices), max(1, -(-self.n_vertices // per_chunk))):
            p = self.vertices[chunk][:, None, :]
            ab = (b - a)[None]
            ap = p - a[None]
            scale = np.maximum(np.abs(ab).max(axis=2), 1e-300)
            cross = (ab[..., 0] * ap[..., 1] - ab[..., 1] * ap[..., 0]) / scale**2
            s = (ap * ab).sum(axis=2) / (ab * ab).sum(axis=2)
            hit = (np.abs(cross) < 1e-12) & (s > 1e-12) & (s < 1 - 1e-12)
            if hit.any():
                raise InvalidMesh("hanging node detected")
        return True


def _row_lookup(table, rows):
    """Index of each row of ``rows`` inside the lexicographically sorted ``table``."""
    base = int(max(table.max(initial=0), rows.max(initial=0))) + 1
    tk = table[:, 0] * base + table[:, 1]
    rk = rows[:, 0] * base + rows[:, 1]
    idx = np.searchsorted(tk, rk)
    if np.any(idx >= len(tk)) or np.any(tk[np.minimum(idx, len(tk) - 1)] != rk):
        raise InvalidMesh("tagged edge is not an edge of the mesh")
    return idx


def build_structured(x_range, t_range, nx, nt, inflow_side="left"):
    """Crossed rectangular grid with ``2 * nx * nt`` triangles.

    Every cell is cut along its lower-left to upper-right diagonal; the
    diagonal is the refinement edge of both halves.
    """
    x0, x1 = map(float, x_range)
    t0, t1 = map(float, t_range)
    if not (x1 > x0 and t1 > t0):
        raise InvalidArgument("empty space or time interval")
    if nx < 1 or nt < 1:
        raise InvalidArgument("nx and nt must be at least 1")
    if inflow_side not in ("left", "right"):
        raise InvalidArgument(f"inflow_side must be 'left' or 'right', got {inflow_side!r}")
    xs = np.linspace(x0, x1, nx + 1)
    ts = np.linspace(t0, t1, nt + 1)
    X, T = np.meshgrid(xs, ts)
    vertices = np.column_stack([X.ravel(), T.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    i, j = np.meshgrid(np.arange(nx), np.arange(nt))
    i, j = i.ravel(), j.ravel()
    ll, lr, ur, ul = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
    lower = np.column_stack([ur, ll, lr])
    upper = np.column_stack([ll, ur, ul])
    triangles = np.empty((2 * len(i), 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    ii = np.arange(nx)
    jj = np.arange(nt)
    bottom = np.column_stack([vid(ii, 0), vid(ii + 1, 0)])
    top = np.column_stack([vid(ii, nt), vid(ii + 1, nt)])
    left = np.column_stack([vid(0, jj), vid(0, jj + 1)])
    right = np.column_stack([vid(nx, jj), vid(nx, jj + 1)])
    in_tag, out_tag = BoundaryTag.SPATIAL_INFLOW, BoundaryTag.SPATIAL_OUTFLOW
    if inflow_side == "right":
        in_tag, out_tag = out_tag, in_tag
    edges = np.vstack([bottom, top, left, right])
    tags = np.concatenate([
        np.full(nx, BoundaryTag.INITIAL_TIME), np.full(nx, BoundaryTag.FINAL_TIME),
        np.full(nt, in_tag), np.full(nt, out_tag),
    ])
    return SpaceTimeMesh(vertices, triangles, edges, tags)


def bisect(mesh, marked):
    """Newest-vertex bisection of ``marked`` triangles with conforming closure."""
    marked = np.unique(np.asarray(list(marked) if not isinstance(marked, np.ndarray) else marked,
                                  dtype=np.int64))
    if marked.size and (marked.min() < 0 or marked.max() >= mesh.n_triangles):
        raise InvalidArgument("marked triangle index out of range")
    if marked.size == 0:
        return mesh

    tri_edges = mesh.tri_edges
    n_edges = mesh.n_edges
    # local edge 0 is the refinement edge
    ref_edge = tri_edges[:, 0]
    edge_marked = np.zeros(n_edges, dtype=bool)
    edge_marked[ref_edge[marked]] = True
    # closure: a triangle with any marked edge needs its refinement edge marked
    while True:
        has_marked = edge_marked[tri_edges].any(axis=1)
        need = has_marked & ~edge_marked[ref_edge]
        if not need.any():
            break
        edge_marked[ref_edge[need]] = True

    verts = [mesh.vertices]
    n_v = mesh.n_vertices
    marked_ids = np.flatnonzero(edge_marked)
    mid_of_edge = np.full(n_edges, -1, dtype=np.int64)
    mid_of_edge[marked_ids] = n_v + np.arange(len(marked_ids))
    e = mesh.edges[marked_ids]
    verts.append(0.5 * (mesh.vertices[e[:, 0]] + mesh.vertices[e[:, 1]]))
    vertices = np.vstack(verts)
    edge_index = {(int(a), int(b)): k for k, (a, b) in enumerate(mesh.edges.tolist())}

    def midpoint(a, b):
        k = edge_index.get((a, b) if a < b else (b, a))
        if k is None:
            return -1
        return int(mid_of_edge[k])

    new_tris, parents, levels = [], [], []
    for k, (a, b, c) in enumerate(mesh.triangles.tolist()):
        stack = [(a, b, c, mesh.level[k])]
        while stack:
            a_, b_, c_, lev = stack.pop()
            m = midpoint(a_, b_)
            if m < 0:
                new_tris.append((a_, b_, c_))
                parents.append(k)
                levels.append(lev)
                continue
            # children: (c, a, m) and (b, c, m); their refinement edges are
            # parent edges, whose midpoints already exist if marked
            stack.append((b_, c_, m, lev + 1))
            stack.append((c_, a_, m, lev + 1))

    # boundary edges: split marked ones, children inherit the tag
    b_edges, b_tags = [], []
    for (a, b), tag in zip(mesh.boundary_edges.tolist(), mesh.boundary_tags.tolist()):
        stack = [(a, b)]
        while stack:
            p, q = stack.pop()
            m = midpoint(p, q)
            if m < 0:
                b_edges.append((p, q))
                b_tags.append(tag)
            else:
                stack.append((p, m))
                stack.append((m, q))
    return SpaceTimeMesh(vertices, np.array(new_tris), np.array(b_edges), np.array(b_tags),
                         parent=np.array(parents), level=np.array(levels))


def uniform_refine(mesh, times=1):
    """Split every triangle into four by two bisection sweeps, ``times`` times."""
    for _ in range(times):
        for _ in range(2):
            mesh = bisect(mesh, np.arange(mesh.n_triangles))
    return mesh
