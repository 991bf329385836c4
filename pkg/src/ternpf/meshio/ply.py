"""Binary little-endian PLY for triangle meshes."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .mesh import TriMesh

_FACE = np.dtype([("n", "u1"), ("idx", "<i4", (3,))])


class MeshIOError(OSError):
    pass


def write_mesh(mesh: TriMesh, path) -> Path:
    """Vertices as float32 x, y, z; faces as uchar count plus int32 indices."""
    path = Path(path)
    head = (
        "ply\n"
        "format binary_little_endian 1.0\n"
        f"comment phase {mesh.phase_id}\n"
        f"element vertex {mesh.n_vertices}\n"
        "property float x\nproperty float y\nproperty float z\n"
        f"element face {mesh.n_triangles}\n"
        "property list uchar int vertex_indices\n"
        "end_header\n"
    )
    faces = np.empty(mesh.n_triangles, dtype=_FACE)
    faces["n"] = 3
    faces["idx"] = mesh.triangles
    try:
        with open(path, "wb") as fh:
            fh.write(head.encode("ascii"))
            fh.write(mesh.vertices.astype("<f4").tobytes())
            fh.write(faces.tobytes())
    except OSError as exc:
        raise MeshIOError(f"cannot write mesh {path}: {exc.strerror or exc}") from exc
    return path


def read_mesh(path) -> TriMesh:
    """Reader for files written by :func:`write_mesh`."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise MeshIOError(f"cannot read mesh {path}: {exc.strerror or exc}") from exc
    end = raw.index(b"end_header\n") + len(b"end_header\n")
    counts, phase = {}, 0
    for line in raw[:end].decode("ascii").splitlines():
        parts = line.split()
        if parts[:1] == ["element"]:
            counts[parts[1]] = int(parts[2])
        elif parts[:2] == ["comment", "phase"]:
            phase = int(parts[2])
    nv, nf = counts.get("vertex", 0), counts.get("face", 0)
    verts = np.frombuffer(raw, dtype="<f4", count=3 * nv, offset=end).reshape(nv, 3)
    faces = np.frombuffer(raw, dtype=_FACE, count=nf, offset=end + 12 * nv)
    if nf and np.any(faces["n"] != 3):
        raise MeshIOError(f"{path}: non-triangle face")
    return TriMesh(verts.astype(np.float64), faces["idx"].astype(np.int64), phase_id=phase)
