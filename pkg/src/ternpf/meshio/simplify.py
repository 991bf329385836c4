"""Quadric-error edge-collapse simplification with locked vertices.

Collapses are taken cheapest first.  A collapse is rejected when it would
violate the link condition (pinching the surface), flip a surviving
triangle, move a locked vertex, or touch an open border.  Quadrics are
unweighted, so the square root of an edge's cost bounds the distance of
the new vertex to every original plane merged into it.
"""
from __future__ import annotations

import heapq
import math

import numpy as np
from numba import njit

from .mesh import TriMesh

_FLIP_COS = 0.2


def _face_quadrics(pos: np.ndarray, tri: np.ndarray) -> np.ndarray:
    a, b, c = pos[tri[:, 0]], pos[tri[:, 1]], pos[tri[:, 2]]
    n = np.cross(b - a, c - a)
    norm = np.linalg.norm(n, axis=1)
    ok = norm > 0.0
    n[ok] /= norm[ok, None]
    n[~ok] = 0.0
    p = np.concatenate([n, -np.einsum("ij,ij->i", n, a)[:, None]], axis=1)
    return p[:, :, None] * p[:, None, :]


@njit(cache=True)
def _quad(q, x, y, z):
    v = (q[0, 0] * x * x + q[1, 1] * y * y + q[2, 2] * z * z + q[3, 3]
         + 2.0 * (q[0, 1] * x * y + q[0, 2] * x * z + q[1, 2] * y * z + q[0, 3] * x + q[1, 3] * y + q[2, 3] * z))
    return max(v, 0.0)


@njit(cache=True)
def _edge_target(Q, pos, u, v, lock_u, lock_v):
    """(cost, x, y, z) of the cheapest admissible position for collapsing u-v."""
    q = Q[u] + Q[v]
    if lock_u:
        return _quad(q, pos[u, 0], pos[u, 1], pos[u, 2]), pos[u, 0], pos[u, 1], pos[u, 2]
    if lock_v:
        return _quad(q, pos[v, 0], pos[v, 1], pos[v, 2]), pos[v, 0], pos[v, 1], pos[v, 2]
    best = np.inf
    bx = by = bz = 0.0
    cand = np.empty((4, 3))
    cand[0] = pos[u]
    cand[1] = pos[v]
    cand[2] = 0.5 * (pos[u] + pos[v])
    nc = 3
    A = q[:3, :3]
    if abs(np.linalg.det(A)) > 1e-12:
        p = np.linalg.solve(A, -q[:3, 3].copy())
        d2 = 0.0
        e2 = 0.0
        for k in range(3):
            d2 += (p[k] - cand[2, k]) ** 2
            e2 += (pos[u, k] - pos[v, k]) ** 2
        if d2 <= e2:
            cand[3] = p
            nc = 4
    for i in range(nc):
        c = _quad(q, cand[i, 0], cand[i, 1], cand[i, 2])
        if c < best:
            best = c
            bx, by, bz = cand[i, 0], cand[i, 1], cand[i, 2]
    return best, bx, by, bz


@njit(cache=True)
def _any_flip(pos, tri, faces, old, px, py, pz, cos_min):
    for f in faces:
        a = pos[tri[f, 0]]
        b = pos[tri[f, 1]]
        c = pos[tri[f, 2]]
        n0 = np.cross(b - a, c - a)
        pts = np.empty((3, 3))
        for k in range(3):
            x = tri[f, k]
            if x == old:
                pts[k, 0] = px
                pts[k, 1] = py
                pts[k, 2] = pz
            else:
                pts[k] = pos[x]
        n1 = np.cross(pts[1] - pts[0], pts[2] - pts[0])
        l0 = np.sqrt(n0 @ n0)
        l1 = np.sqrt(n1 @ n1)
        if l1 <= 1e-14 * max(l0, 1e-300):
            return True
        if l0 > 0.0 and n0 @ n1 < cos_min * l0 * l1:
            return True
    return False


class _Collapser:
    def __init__(self, mesh: TriMesh, locked: np.ndarray, active: np.ndarray | None):
        self.pos = mesh.vertices.copy()
        self.tri = mesh.triangles.copy()
        self.flag = mesh.boundary.copy()
        nv = len(self.pos)
        self.alive = np.ones(len(self.tri), dtype=bool)
        self.removed = np.zeros(nv, dtype=bool)
        self.version = np.zeros(nv, dtype=np.int64)
        self.locked = locked
        self.active = np.ones(nv, dtype=bool) if active is None else active
        kq = _face_quadrics(self.pos, self.tri)
        self.Q = np.zeros((nv, 4, 4))
        for k in range(3):
            np.add.at(self.Q, self.tri[:, k], kq)
        self.vf: list[set] = [set() for _ in range(nv)]
        for f, (i, j, k) in enumerate(self.tri):
            self.vf[i].add(f)
            self.vf[j].add(f)
            self.vf[k].add(f)
        self.n_alive = len(self.tri)
        self.heap: list = []
        self.tick = 0

    def neighbours(self, v: int) -> set:
        out = set()
        for f in self.vf[v]:
            out.update(int(x) for x in self.tri[f])
        out.discard(v)
        return out

    def collapsible(self, u: int, v: int) -> bool:
        return self.active[u] and self.active[v] and not (self.locked[u] and self.locked[v])

    def push(self, u: int, v: int) -> None:
        if not self.collapsible(u, v):
            return
        cost, x, y, z = _edge_target(self.Q, self.pos, u, v, self.locked[u], self.locked[v])
        self.tick += 1
        heapq.heappush(self.heap, (cost, self.tick, u, v, self.version[u], self.version[v], (x, y, z)))

    def flips(self, faces, old: int, p: np.ndarray) -> bool:
        if not faces:
            return False
        return _any_flip(self.pos, self.tri, np.fromiter(faces, np.int64, len(faces)), old,
                         p[0], p[1], p[2], _FLIP_COS)

    def try_collapse(self, u: int, v: int, p: np.ndarray) -> bool:
        keep, gone = (v, u) if self.locked[v] else (u, v)
        shared = self.vf[keep] & self.vf[gone]
        if len(shared) != 2:
            return False
        nk, ng = self.neighbours(keep), self.neighbours(gone)
        opposite = {int(x) for f in shared for x in self.tri[f]} - {keep, gone}
        if (nk & ng) != opposite:
            return False
        if len((nk | ng) - {keep, gone}) <= 2:
            return False
        if self.flips(self.vf[gone] - shared, gone, p):
            return False
        if not self.locked[keep] and self.flips(self.vf[keep] - shared, keep, p):
            return False

        for f in shared:
            self.alive[f] = False
            for x in self.tri[f]:
                self.vf[int(x)].discard(f)
        for f in self.vf[gone]:
            t = self.tri[f]
            t[t == gone] = keep
            self.vf[keep].add(f)
        self.vf[gone] = set()
        self.removed[gone] = True
        self.pos[keep] = p
        self.Q[keep] += self.Q[gone]
        self.flag[keep] |= self.flag[gone]
        self.version[keep] += 1
        self.version[gone] += 1
        self.n_alive -= len(shared)
        for n in self.neighbours(keep):
            self.push(keep, n)
        return True

    def run(self, target: int, max_cost: float) -> None:
        edges = TriMesh(self.pos, self.tri).edges()[0]
        for u, v in edges:
            self.push(int(u), int(v))
        while self.heap and self.n_alive > target:
            cost, _, u, v, vu, vv, p = heapq.heappop(self.heap)
            if cost > max_cost:
                break
            if self.removed[u] or self.removed[v] or self.version[u] != vu or self.version[v] != vv:
                continue
            self.try_collapse(u, v, np.array(p))

    def result(self, mesh: TriMesh) -> TriMesh:
        out = TriMesh(self.pos, self.tri[self.alive], self.flag, mesh.phase_id, mesh.regions, mesh.domain,
                      dict(mesh.meta))
        return out.compact()


def border_vertices(mesh: TriMesh) -> np.ndarray:
    """Vertices on an edge not shared by exactly two triangles."""
    uniq, counts = mesh.edges()
    out = np.zeros(mesh.n_vertices, dtype=bool)
    out[uniq[counts != 2].ravel()] = True
    return out


def coarsen_mesh(mesh: TriMesh, target_ratio: float, lock_boundary: bool = True,
                 max_error: float | None = None, active: np.ndarray | None = None) -> TriMesh:
    """Collapse edges until at most ``target_ratio`` of the triangles remain.

    With ``lock_boundary`` the flagged block-boundary vertices never move.
    Vertices on open or non-manifold edges are always kept in place.  ``max_error`` stops
    at the first collapse whose quadric distance exceeds it; ``active``
    restricts collapses to edges whose ends are both marked.
    """
    if not 0.0 < target_ratio <= 1.0:
        raise ValueError(f"target_ratio must lie in (0, 1], got {target_ratio!r}")
    if target_ratio == 1.0 or mesh.n_triangles == 0:
        return mesh.copy()
    target = int(math.floor(target_ratio * mesh.n_triangles))
    locked = border_vertices(mesh)
    if lock_boundary:
        locked |= mesh.boundary
    max_cost = math.inf if max_error is None else max_error * max_error
    c = _Collapser(mesh, locked, active)
    c.run(target, max_cost)
    return c.result(mesh)
