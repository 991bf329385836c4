"""Pairwise stitching of block meshes and the log2 reduction tree."""
from __future__ import annotations

import math

import numpy as np

from .mesh import TriMesh, merge_meshes
from .simplify import coarsen_mesh


class StitchingError(RuntimeError):
    """A boundary vertex on a shared block face has no coincident partner."""

    def __init__(self, message: str, face: str):
        super().__init__(message)
        self.face = face


def _boxes(regions):
    lo = np.array([r[0] for r in regions], dtype=np.float64).reshape(-1, 3)
    hi = np.array([r[1] for r in regions], dtype=np.float64).reshape(-1, 3)
    return lo, hi


def _in_closure(points: np.ndarray, regions) -> np.ndarray:
    """(P, R) membership of points in the closed boxes."""
    lo, hi = _boxes(regions)
    p = points[:, None, :]
    return np.all((p >= lo[None]) & (p <= hi[None]), axis=2)


def exposed(points: np.ndarray, regions, domain) -> np.ndarray:
    """Points on the outer surface of the union of ``regions`` that face another block.

    A point qualifies if stepping off one of its box faces leaves the union
    while staying inside the global box.
    """
    if len(points) == 0:
        return np.zeros(0, dtype=bool)
    lo, hi = _boxes(regions)
    dlo, dhi = (np.asarray(v, dtype=np.float64) for v in domain)
    delta = 1e-6 * float(np.min(hi - lo))
    out = np.zeros(len(points), dtype=bool)
    for ax in range(3):
        for sign in (-1.0, 1.0):
            q = points.copy()
            q[:, ax] += sign * delta
            inside_domain = np.all((q >= dlo) & (q <= dhi), axis=1)
            out |= inside_domain & ~_in_closure(q, regions).any(axis=1)
    return out


def _seam_name(p: np.ndarray, a_regions, b_regions) -> str:
    alo, ahi = _boxes(a_regions)
    blo, bhi = _boxes(b_regions)
    for ax, name in enumerate("xyz"):
        for v in (alo[:, ax], ahi[:, ax]):
            if np.any(v == p[ax]) and (np.any(blo[:, ax] == p[ax]) or np.any(bhi[:, ax] == p[ax])):
                return f"{name} = {p[ax]!r}"
    return "unknown face"


def reduce_pairwise(a: TriMesh, b: TriMesh, ratio: float = 1.0) -> tuple[TriMesh, int]:
    """Weld two neighbouring meshes along their shared faces.

    Returns the stitched mesh and the number of welded vertex pairs.  When
    ``ratio`` < 1 the newly stitched band (welded vertices and their direct
    neighbours) is coarsened towards ``ratio`` of the full-resolution count.
    """
    regions = a.regions + b.regions
    domain = a.domain if a.domain is not None else b.domain
    partner = {tuple(p): i for i, p in zip(np.flatnonzero(b.boundary), b.vertices[b.boundary])}

    b_to_a = {}
    a_idx = np.flatnonzero(a.boundary)
    if len(a_idx) and b.regions:
        on_b = _in_closure(a.vertices[a_idx], b.regions).any(axis=1)
        for i in a_idx[on_b]:
            key = tuple(a.vertices[i])
            j = partner.get(key)
            if j is None:
                face = _seam_name(a.vertices[i], a.regions, b.regions)
                raise StitchingError(f"no coincident partner for boundary vertex {key} on face {face}", face)
            b_to_a[j] = i
    b_idx = np.flatnonzero(b.boundary)
    if len(b_idx) and a.regions:
        on_a = _in_closure(b.vertices[b_idx], a.regions).any(axis=1)
        for j in b_idx[on_a]:
            if j not in b_to_a:
                key = tuple(b.vertices[j])
                face = _seam_name(b.vertices[j], b.regions, a.regions)
                raise StitchingError(f"no coincident partner for boundary vertex {key} on face {face}", face)

    keep_b = np.ones(b.n_vertices, dtype=bool)
    keep_b[list(b_to_a)] = False
    remap = np.empty(b.n_vertices, dtype=np.int64)
    remap[keep_b] = a.n_vertices + np.arange(int(keep_b.sum()))
    for j, i in b_to_a.items():
        remap[j] = i
    verts = np.concatenate([a.vertices, b.vertices[keep_b]])
    tris = np.concatenate([a.triangles, remap[b.triangles]])
    flags = np.concatenate([a.boundary, b.boundary[keep_b]])
    welded = np.zeros(len(verts), dtype=bool)
    welded[list(b_to_a.values())] = True
    if flags.any() and domain is not None:
        flags[flags] = exposed(verts[flags], regions, domain)
    full = a.meta.get("full_triangles", a.n_triangles) + b.meta.get("full_triangles", b.n_triangles)
    out = TriMesh(verts, tris, flags, a.phase_id, regions, domain, {"full_triangles": full})

    if ratio < 1.0 and welded.any() and out.n_triangles:
        band = welded.copy()
        touching = welded[out.triangles].any(axis=1)
        band[out.triangles[touching].ravel()] = True
        target = min(1.0, ratio * full / out.n_triangles)
        if target < 1.0:
            out = coarsen_mesh(out, target, lock_boundary=True, active=band)
            out.meta["full_triangles"] = full
    return out, len(b_to_a)


def reduce_tree(meshes, ratio: float = 1.0, levels: int | None = None, max_triangles: int | None = None,
                log: list | None = None) -> list[TriMesh]:
    """Run up to ``levels`` rounds of pairwise merging (default: until one mesh is left).

    A pair whose merged size would exceed ``max_triangles`` is left unmerged.
    ``log`` receives ``(level, left, right, welded)`` tuples.
    """
    meshes = list(meshes)
    if levels is None:
        levels = math.ceil(math.log2(len(meshes))) if len(meshes) > 1 else 0
    for level in range(1, levels + 1):
        if len(meshes) <= 1:
            break
        nxt = []
        for k in range(0, len(meshes) - 1, 2):
            left, right = meshes[k], meshes[k + 1]
            if max_triangles is not None and left.n_triangles + right.n_triangles > max_triangles:
                nxt.extend([left, right])
                continue
            merged, n = reduce_pairwise(left, right, ratio)
            if log is not None:
                log.append((level, k, k + 1, n))
            nxt.append(merged)
        if len(meshes) % 2:
            nxt.append(meshes[-1])
        if len(nxt) == len(meshes):
            break
        meshes = nxt
    return meshes


def hierarchical_reduce(meshes, ratio: float = 1.0, levels: int | None = None,
                        max_triangles: int | None = None, log: list | None = None) -> TriMesh:
    """Stitch block meshes into one mesh by ceil(log2 n) pairwise levels.

    If a memory budget or a level limit stops the tree early, the remaining
    partial meshes are concatenated unwelded and ``meta["complete"]`` is False.
    """
    meshes = list(meshes)
    if not meshes:
        return TriMesh.empty()
    rest = reduce_tree(meshes, ratio, levels, max_triangles, log)
    if len(rest) == 1:
        out = rest[0]
        out.meta["complete"] = True
        return out
    out = merge_meshes(rest)
    out.meta["complete"] = False
    return out
