"""Per-phase interface meshes of a whole grid."""
from __future__ import annotations

from .mesh import TriMesh, block_mesh
from .simplify import coarsen_mesh
from .stitch import hierarchical_reduce


def phase_mesh(grid, phase: int, ratio: float = 1.0, iso: float = 0.5, max_triangles: int | None = None,
               log: list | None = None) -> TriMesh:
    """Marching cubes on every block, per-block coarsening with locked seams, then stitching.

    Ghost layers of the phase field must be current.
    """
    meshes = []
    for b in grid:
        m = block_mesh(grid, b, phase, iso)
        full = m.n_triangles
        if ratio < 1.0:
            m = coarsen_mesh(m, ratio, lock_boundary=True)
        m.meta["full_triangles"] = full
        meshes.append(m)
    return hierarchical_reduce(meshes, ratio, max_triangles=max_triangles, log=log)
