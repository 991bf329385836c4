"""Single-precision checkpoint files.

Layout (little-endian): 8-byte magic ``PFCP0001``; u64 Nx, Ny, Nz; u32 phase
count and independent-component count; f64 dx and t; u64 step and
window_origin_z; then binary32 values, component-major (phi_1 .. phi_N,
mu_1 .. mu_K-1), each component z-slowest and x-fastest.
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..lattice import FIELDS

MAGIC = b"PFCP0001"
_HEADER = struct.Struct("<8s3Q2I2d2Q")
HEADER_SIZE = _HEADER.size
_BODY = np.dtype("<f4")


class CheckpointFormatError(ValueError):
    """Wrong magic or dimensions that do not match the target grid."""


class CheckpointIOError(OSError):
    """Unreadable or truncated checkpoint file."""


@dataclass(frozen=True)
class CheckpointHeader:
    cells: tuple[int, int, int]
    n_phases: int
    n_mu: int
    dx: float
    t: float
    step: int
    window_origin_z: int

    @property
    def body_bytes(self) -> int:
        nx, ny, nz = self.cells
        return (self.n_phases + self.n_mu) * nx * ny * nz * _BODY.itemsize

    @property
    def file_bytes(self) -> int:
        return HEADER_SIZE + self.body_bytes


def checkpoint_size(cells, n_phases: int = FIELDS["phi"], n_mu: int = FIELDS["mu"]) -> int:
    return CheckpointHeader(tuple(cells), n_phases, n_mu, 1.0, 0.0, 0, 0).file_bytes


def write_checkpoint(grid, path) -> Path:
    """Write the src copy of both fields; the file is replaced atomically."""
    path = Path(path)
    nx, ny, nz = grid.spec.global_cells
    head = _HEADER.pack(MAGIC, nx, ny, nz, FIELDS["phi"], FIELDS["mu"], float(grid.spec.dx), float(grid.t),
                        int(grid.step), int(grid.window_origin_z))
    tmp = path.with_name(path.name + ".part")
    try:
        with open(tmp, "wb") as fh:
            fh.write(head)
            for name in ("phi", "mu"):
                fh.write(grid.gather(name).astype(_BODY).tobytes())
        os.replace(tmp, path)
    except OSError as exc:
        raise CheckpointIOError(f"cannot write checkpoint {path}: {exc.strerror or exc}") from exc
    return path


def read_header(path) -> CheckpointHeader:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = fh.read(HEADER_SIZE)
    except OSError as exc:
        raise CheckpointIOError(f"cannot read checkpoint {path}: {exc.strerror or exc}") from exc
    if len(raw) < HEADER_SIZE:
        raise CheckpointIOError(f"checkpoint {path} is truncated inside the header")
    magic, nx, ny, nz, nphi, nmu, dx, t, step, wz = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise CheckpointFormatError(f"{path}: bad magic {magic!r}")
    return CheckpointHeader((nx, ny, nz), nphi, nmu, dx, t, step, wz)


def load_checkpoint(path) -> tuple[CheckpointHeader, np.ndarray, np.ndarray]:
    """Header plus phi (N, Nz, Ny, Nx) and mu (K-1, Nz, Ny, Nx) as binary32 arrays."""
    path = Path(path)
    head = read_header(path)
    nx, ny, nz = head.cells
    try:
        with open(path, "rb") as fh:
            fh.seek(HEADER_SIZE)
            body = fh.read(head.body_bytes + 1)
    except OSError as exc:
        raise CheckpointIOError(f"cannot read checkpoint {path}: {exc.strerror or exc}") from exc
    if len(body) < head.body_bytes:
        raise CheckpointIOError(f"checkpoint {path} is truncated: {len(body)} of {head.body_bytes} body bytes")
    if len(body) > head.body_bytes:
        raise CheckpointFormatError(f"{path}: trailing bytes after the body")
    data = np.frombuffer(body, dtype=_BODY).reshape(head.n_phases + head.n_mu, nz, ny, nx)
    return head, data[:head.n_phases], data[head.n_phases:]


def read_checkpoint(path, grid) -> CheckpointHeader:
    """Load a checkpoint into ``grid`` (src copies), restoring t, step and window origin."""
    head = read_header(path)
    want = tuple(grid.spec.global_cells)
    if head.cells != want:
        names = ", ".join(f"N{a}: file {f} vs grid {g}" for a, f, g in zip("xyz", head.cells, want) if f != g)
        raise CheckpointFormatError(f"{path}: dimension mismatch ({names})")
    if (head.n_phases, head.n_mu) != (FIELDS["phi"], FIELDS["mu"]):
        raise CheckpointFormatError(f"{path}: {head.n_phases} phases / {head.n_mu} potentials not supported")
    head, phi, mu = load_checkpoint(path)
    grid.scatter("phi", phi.astype(np.float64))
    grid.scatter("mu", mu.astype(np.float64))
    grid.t = head.t
    grid.step = head.step
    grid.window_origin_z = head.window_origin_z
    return head


class ScrollbackWriter:
    """Appends slices dropped by the moving window: u64 global z, then binary32 values."""

    def __init__(self, path):
        self.path = Path(path)
        self.count = 0

    def __call__(self, global_z: int, phi_slice: np.ndarray, mu_slice: np.ndarray) -> None:
        try:
            with open(self.path, "ab") as fh:
                fh.write(struct.pack("<Q", int(global_z)))
                fh.write(np.concatenate([phi_slice, mu_slice]).astype(_BODY).tobytes())
        except OSError as exc:
            raise CheckpointIOError(f"cannot append scrollback to {self.path}: {exc.strerror or exc}") from exc
        self.count += 1


def read_scrollback(path, cells_xy) -> list[tuple[int, np.ndarray, np.ndarray]]:
    nx, ny = cells_xy
    ncomp = FIELDS["phi"] + FIELDS["mu"]
    rec = 8 + ncomp * nx * ny * _BODY.itemsize
    raw = Path(path).read_bytes()
    if len(raw) % rec:
        raise CheckpointIOError(f"scrollback {path} has a partial record")
    out = []
    for off in range(0, len(raw), rec):
        (z,) = struct.unpack_from("<Q", raw, off)
        vals = np.frombuffer(raw, dtype=_BODY, count=ncomp * nx * ny, offset=off + 8).reshape(ncomp, ny, nx)
        out.append((z, vals[:FIELDS["phi"]], vals[FIELDS["phi"]:]))
    return out
