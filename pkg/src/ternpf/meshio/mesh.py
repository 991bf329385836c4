"""Triangle meshes of phase interfaces and per-block marching cubes."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from skimage.measure import marching_cubes as _skimage_mc


@dataclass
class TriMesh:
    """Indexed triangle mesh in physical units.

    ``boundary`` flags vertices that lie on a block face shared with a
    neighbouring block (these must survive coarsening to allow stitching).
    ``regions`` lists the axis-aligned meshing boxes ``(lo, hi)`` the mesh
    covers and ``domain`` the global meshing box.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray | None = None
    phase_id: int = 0
    regions: tuple = ()
    domain: tuple | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        tri = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        nv = len(self.vertices)
        if tri.size and (tri.min() < 0 or tri.max() >= nv):
            raise ValueError("triangle index out of range")
        keep = (tri[:, 0] != tri[:, 1]) & (tri[:, 1] != tri[:, 2]) & (tri[:, 0] != tri[:, 2])
        self.triangles = tri[keep]
        if self.boundary is None:
            self.boundary = np.zeros(nv, dtype=bool)
        self.boundary = np.asarray(self.boundary, dtype=bool).reshape(-1)
        if len(self.boundary) != nv:
            raise ValueError("boundary flag count differs from vertex count")

    @classmethod
    def empty(cls, phase_id: int = 0, regions=(), domain=None) -> "TriMesh":
        return cls(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64), None, phase_id, regions, domain)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def copy(self) -> "TriMesh":
        return TriMesh(self.vertices.copy(), self.triangles.copy(), self.boundary.copy(), self.phase_id,
                       self.regions, self.domain, dict(self.meta))

    def compact(self) -> "TriMesh":
        """Drop vertices no triangle refers to."""
        used = np.zeros(self.n_vertices, dtype=bool)
        used[self.triangles.ravel()] = True
        remap = np.cumsum(used) - 1
        return TriMesh(self.vertices[used], remap[self.triangles], self.boundary[used], self.phase_id,
                       self.regions, self.domain, dict(self.meta))

    def area(self) -> float:
        a, b, c = (self.vertices[self.triangles[:, k]] for k in range(3))
        return float(0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1).sum())

    def volume(self) -> float:
        """Signed enclosed volume (positive for outward-oriented closed meshes)."""
        a, b, c = (self.vertices[self.triangles[:, k]] for k in range(3))
        return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique undirected edges (E, 2) and the number of triangles using each."""
        e = np.concatenate([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]], self.triangles[:, [2, 0]]])
        e.sort(axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        return uniq, counts

    def open_edges(self) -> np.ndarray:
        uniq, counts = self.edges()
        return uniq[counts != 2]

    def euler_characteristic(self) -> int:
        if self.n_triangles == 0:
            return 0
        uniq, _ = self.edges()
        n_used = np.unique(self.triangles).size
        return int(n_used - len(uniq) + self.n_triangles)

    def on_domain_boundary(self, points: np.ndarray | None = None) -> np.ndarray:
        """Whether each point lies on a face of the global meshing box."""
        pts = self.vertices if points is None else points
        if self.domain is None:
            return np.zeros(len(pts), dtype=bool)
        lo, hi = (np.asarray(v) for v in self.domain)
        return ((pts == lo) | (pts == hi)).any(axis=1)

    def is_watertight(self) -> bool:
        """Every edge not lying on the global meshing box is shared by exactly two triangles."""
        uniq, counts = self.edges()
        bad = uniq[counts != 2]
        if bad.size == 0:
            return True
        if self.domain is None:
            return False
        lo, hi = (np.asarray(v) for v in self.domain)
        p, q = self.vertices[bad[:, 0]], self.vertices[bad[:, 1]]
        # an edge on a box face has both ends on the same face plane
        same_face = (((p == lo) & (q == lo)) | ((p == hi) & (q == hi))).any(axis=1)
        return bool(np.all(same_face & (counts[counts != 2] == 1)))


def merge_meshes(meshes) -> TriMesh:
    """Concatenate meshes without welding."""
    meshes = list(meshes)
    if not meshes:
        return TriMesh.empty()
    verts, tris, flags, offset = [], [], [], 0
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + offset)
        flags.append(m.boundary)
        offset += m.n_vertices
    regions = tuple(r for m in meshes for r in m.regions)
    return TriMesh(np.concatenate(verts), np.concatenate(tris), np.concatenate(flags), meshes[0].phase_id,
                   regions, meshes[0].domain)


def marching_cubes(field: np.ndarray, iso: float = 0.5, dx: float = 1.0, origin=(0, 0, 0),
                   global_low=(True, True, True), global_high=(True, True, True), phase_id: int = 0,
                   domain: tuple | None = None) -> TriMesh:
    """Isosurface of one block's field including its ghost layer.

    ``field`` has shape (nz + 2, ny + 2, nx + 2); ``origin`` is the global
    (x, y, z) index of the first interior cell.  Samples sit at cell centres.
    The block meshes the dual cells from its low ghost layer up to its last
    interior cell, so neighbouring blocks tile space without overlap and share
    the vertices on their common planes.  On a global low face the ghost layer
    is skipped, so the global meshing box is [dx/2, (N - 1/2) dx] per axis.
    """
    field = np.asarray(field, dtype=np.float64)
    n = np.array(field.shape[::-1]) - 2  # (nx, ny, nz)
    start = np.array([1 if g else 0 for g in global_low])
    sub = field[start[2]:n[2] + 1, start[1]:n[1] + 1, start[0]:n[0] + 1]
    org = np.asarray(origin, dtype=np.float64)
    region = ((tuple((org + start - 0.5) * dx), tuple((org + n - 0.5) * dx)),)
    if min(sub.shape) < 2 or not sub.min() < iso < sub.max():
        return TriMesh.empty(phase_id, region, domain)
    verts, faces, _, _ = _skimage_mc(sub, iso, method="lewiner", allow_degenerate=False)
    if len(faces) == 0:
        return TriMesh.empty(phase_id, region, domain)
    # (z, y, x) -> (x, y, z); the swap mirrors the surface, which together with
    # skimage's descent convention leaves normals pointing down the gradient
    local = verts[:, ::-1].astype(np.float64)
    span = n - start
    flag = np.zeros(len(local), dtype=bool)
    for ax in range(3):
        if not global_low[ax]:
            flag |= local[:, ax] == 0.0
        if not global_high[ax]:
            flag |= local[:, ax] == span[ax]
    pos = (local + (org + start - 0.5)) * dx
    return TriMesh(pos, faces.astype(np.int64), flag, phase_id, region, domain).compact()


def grid_domain_box(grid) -> tuple:
    """Global meshing box of a grid's current window."""
    dx = grid.spec.dx
    nx, ny, nz = grid.spec.global_cells
    z0 = grid.window_origin_z
    return ((0.5 * dx, 0.5 * dx, (z0 + 0.5) * dx), ((nx - 0.5) * dx, (ny - 0.5) * dx, (z0 + nz - 0.5) * dx))


def block_mesh(grid, block, phase: int, iso: float = 0.5, which: int = 0) -> TriMesh:
    """Marching cubes of one phase on one block (ghost layers must be current).

    Periodic axes are meshed like bounded ones: the wrap-around seam is not
    part of the global meshing box.
    """
    nb = grid.spec.blocks
    low = [block.index[ax] == 0 for ax in range(3)]
    high = [block.index[ax] == nb[ax] - 1 for ax in range(3)]
    origin = (block.origin[0], block.origin[1], block.origin[2] + grid.window_origin_z)
    return marching_cubes(block.fields["phi"][which][phase], iso, grid.spec.dx, origin, low, high, phase,
                          grid_domain_box(grid))
