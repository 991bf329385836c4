"""Block-structured domain decomposition with one ghost layer.

Fields are stored structure-of-arrays: one float64 array of shape
``(components, nz + 2, ny + 2, nx + 2)`` per field copy, so every component
is a contiguous x-fastest, z-outermost slab.  Ghost exchange goes through an
explicit pack/unpack byte buffer (little-endian binary64, component-major).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .thermo import ConfigError

FIELDS = {"phi": 4, "mu": 2}
AXES = "xyz"
# 26 neighbour directions as (dx, dy, dz)
DIRECTIONS = [d for d in itertools.product((-1, 0, 1), repeat=3) if d != (0, 0, 0)]
FACES = ("x-", "x+", "y-", "y+", "z-", "z+")
WIRE_DTYPE = np.dtype("<f8")


@dataclass(frozen=True)
class DomainSpec:
    global_cells: tuple[int, int, int]
    dx: float
    blocks: tuple[int, int, int] = (1, 1, 1)
    ghost_width: int = 1

    def __post_init__(self):
        object.__setattr__(self, "global_cells", tuple(int(n) for n in self.global_cells))
        object.__setattr__(self, "blocks", tuple(int(b) for b in self.blocks))
        if self.ghost_width != 1:
            raise ConfigError("ghost_width is fixed to 1")
        if not self.dx > 0:
            raise ConfigError("dx must be positive")
        for ax, n, b in zip(AXES, self.global_cells, self.blocks):
            if n <= 0 or b <= 0:
                raise ConfigError(f"{ax}: cell and block counts must be positive")
            if n % b:
                raise ConfigError(f"{ax} not divisible: {n} cells over {b} blocks")

    @property
    def block_cells(self) -> tuple[int, int, int]:
        return tuple(n // b for n, b in zip(self.global_cells, self.blocks))

    @property
    def n_cells(self) -> int:
        nx, ny, nz = self.global_cells
        return nx * ny * nz


@dataclass
class BoundarySpec:
    """Per-face condition for each field.

    ``conditions[field][face]`` is one of "periodic", "neumann", "dirichlet";
    ``values[field][face]`` holds the Dirichlet component values.
    """

    conditions: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        for fname in FIELDS:
            self.conditions.setdefault(fname, {})
            self.values.setdefault(fname, {})
            for face in FACES:
                self.conditions[fname].setdefault(face, "periodic")
        self.validate()

    def validate(self):
        for fname, conds in self.conditions.items():
            if fname not in FIELDS:
                raise ConfigError(f"unknown field {fname!r} in boundary spec")
            for face, kind in conds.items():
                if face not in FACES:
                    raise ConfigError(f"unknown face {face!r}")
                if kind not in ("periodic", "neumann", "dirichlet"):
                    raise ConfigError(f"{fname} {face}: unknown condition {kind!r}")
                if kind == "dirichlet":
                    vals = self.values[fname].get(face)
                    if vals is None or len(vals) != FIELDS[fname]:
                        raise ConfigError(f"{fname} {face}: dirichlet needs {FIELDS[fname]} values")
            for ax in AXES:
                lo, hi = conds[ax + "-"], conds[ax + "+"]
                if (lo == "periodic") != (hi == "periodic"):
                    raise ConfigError(f"{fname}: periodic faces must be paired on axis {ax}")

    def periodic(self) -> tuple[bool, bool, bool]:
        """Topological periodicity per axis (must agree between the fields)."""
        out = []
        for ax in AXES:
            flags = {self.conditions[f][ax + "-"] == "periodic" for f in FIELDS}
            if len(flags) != 1:
                raise ConfigError(f"axis {ax}: fields disagree on periodicity")
            out.append(flags.pop())
        return tuple(out)

    @classmethod
    def directional(cls, mu_top) -> "BoundarySpec":
        """Periodic x/y, zero-gradient bottom, liquid melt supplied at the top."""
        cond = {
            "phi": {"x-": "periodic", "x+": "periodic", "y-": "periodic", "y+": "periodic",
                    "z-": "neumann", "z+": "neumann"},
            "mu": {"x-": "periodic", "x+": "periodic", "y-": "periodic", "y+": "periodic",
                   "z-": "neumann", "z+": "dirichlet"},
        }
        return cls(cond, {"mu": {"z+": [float(v) for v in mu_top]}})

    @classmethod
    def all_periodic(cls) -> "BoundarySpec":
        return cls()


class Block:
    """One equally sized subdomain with src/dst copies of both fields."""

    def __init__(self, index, origin, cells):
        self.index = tuple(index)
        self.origin = tuple(origin)  # global index of first interior cell (x, y, z)
        self.cells = tuple(cells)  # (nx, ny, nz)
        nx, ny, nz = self.cells
        self.fields = {}
        for name, ncomp in FIELDS.items():
            shape = (ncomp, nz + 2, ny + 2, nx + 2)
            self.fields[name] = [np.zeros(shape), np.zeros(shape)]
        self.neighbors: dict[tuple, "Block | None"] = {}
        self.counters = np.zeros(16, dtype=np.int64)
        self.mu_local_pending = False

    def __repr__(self):
        return f"Block(index={self.index}, origin={self.origin}, cells={self.cells})"

    # src/dst accessors ---------------------------------------------------
    def src(self, name: str) -> np.ndarray:
        return self.fields[name][0]

    def dst(self, name: str) -> np.ndarray:
        return self.fields[name][1]

    def swap(self, name: str) -> None:
        f = self.fields[name]
        f[0], f[1] = f[1], f[0]

    def component(self, name: str, comp: int, which: int = 0) -> np.ndarray:
        """Contiguous view of one component (SoA accessor)."""
        return self.fields[name][which][comp]

    def interior(self, arr: np.ndarray) -> np.ndarray:
        return arr[:, 1:-1, 1:-1, 1:-1]

    @property
    def n_cells(self) -> int:
        nx, ny, nz = self.cells
        return nx * ny * nz

    def cell_range(self):
        """Global (lo, hi) index box owned by the block, hi exclusive, (x, y, z)."""
        lo = self.origin
        return lo, tuple(o + n for o, n in zip(lo, self.cells))


def _region(direction, cells, ghost: bool):
    """Array slices (z, y, x order) for the ghost or the matching interior region."""
    out = []
    for d, n in zip(direction, cells):
        if d == 0:
            out.append(slice(1, n + 1))
        elif ghost:
            out.append(slice(0, 1) if d < 0 else slice(n + 1, n + 2))
        else:
            # interior cells adjacent to the face in that direction
            out.append(slice(1, 2) if d < 0 else slice(n, n + 1))
    sx, sy, sz = out
    return (slice(None), sz, sy, sx)


def pack(arr: np.ndarray, region) -> bytes:
    return np.ascontiguousarray(arr[region], dtype=WIRE_DTYPE).tobytes()


def unpack(buf: bytes, arr: np.ndarray, region) -> None:
    target = arr[region]
    arr[region] = np.frombuffer(buf, dtype=WIRE_DTYPE).reshape(target.shape)


class BlockGrid:
    """All blocks of a decomposition plus the neighbour table."""

    def __init__(self, spec: DomainSpec, periodic=(True, True, True)):
        self.spec = spec
        self.periodic = tuple(bool(p) for p in periodic)
        self.blocks: list[Block] = []
        self._by_index: dict[tuple, Block] = {}
        bc = spec.block_cells
        for bz in range(spec.blocks[2]):
            for by in range(spec.blocks[1]):
                for bx in range(spec.blocks[0]):
                    idx = (bx, by, bz)
                    b = Block(idx, (bx * bc[0], by * bc[1], bz * bc[2]), bc)
                    self.blocks.append(b)
                    self._by_index[idx] = b
        for b in self.blocks:
            for d in DIRECTIONS:
                b.neighbors[d] = self._neighbor_of(b.index, d)
        self.t = 0.0
        self.step = 0
        self.window_origin_z = 0

    def _neighbor_of(self, idx, d):
        out = []
        for i, di, nb, per in zip(idx, d, self.spec.blocks, self.periodic):
            j = i + di
            if j < 0 or j >= nb:
                if not per:
                    return None
                j %= nb
            out.append(j)
        return self._by_index[tuple(out)]

    def block(self, idx) -> Block:
        return self._by_index[tuple(idx)]

    def __iter__(self):
        return iter(self.blocks)

    def __len__(self):
        return len(self.blocks)

    def touches_global_face(self, block: Block, face: str) -> bool:
        ax = AXES.index(face[0])
        if face[1] == "-":
            return block.index[ax] == 0
        return block.index[ax] == self.spec.blocks[ax] - 1

    # global assembly --------------------------------------------------------
    def gather(self, name: str, which: int = 0) -> np.ndarray:
        """Assemble interiors into one (comp, Nz, Ny, Nx) array."""
        nx, ny, nz = self.spec.global_cells
        out = np.empty((FIELDS[name], nz, ny, nx))
        for b in self.blocks:
            (x0, y0, z0), (x1, y1, z1) = b.cell_range()
            out[:, z0:z1, y0:y1, x0:x1] = b.interior(b.fields[name][which])
        return out

    def scatter(self, name: str, data: np.ndarray, which: int = 0) -> None:
        for b in self.blocks:
            (x0, y0, z0), (x1, y1, z1) = b.cell_range()
            b.interior(b.fields[name][which])[...] = data[:, z0:z1, y0:y1, x0:x1]

    def swap(self) -> None:
        for b in self.blocks:
            b.swap("phi")
            b.swap("mu")


def build_block_grid(spec: DomainSpec, boundary: BoundarySpec | None = None) -> BlockGrid:
    periodic = boundary.periodic() if boundary is not None else (True, True, True)
    return BlockGrid(spec, periodic)


def exchange_ghost_layers(grid: BlockGrid, name: str, which: int = 0) -> None:
    """Copy neighbour interiors into ghost cells for all 26 directions.

    ``which`` selects the src (0) or dst (1) copy.  Ghosts across
    non-periodic global faces are left to :func:`apply_boundaries`.
    """
    messages = []
    for b in grid.blocks:
        for d in DIRECTIONS:
            nb = b.neighbors[d]
            if nb is None:
                continue
            # nb sends the interior layer facing b, i.e. in direction -d
            back = tuple(-c for c in d)
            buf = pack(nb.fields[name][which], _region(back, nb.cells, ghost=False))
            messages.append((b, d, buf))
    for b, d, buf in messages:
        unpack(buf, b.fields[name][which], _region(d, b.cells, ghost=True))


def apply_boundaries(grid: BlockGrid, name: str, spec: BoundarySpec, which: int = 0) -> None:
    """Fill ghost planes on non-periodic global faces.

    Whole ghost planes are written, including their edge and corner cells,
    in x, y, z order, so edge ghosts are consistent for any decomposition.
    """
    for ax_i, ax in enumerate(AXES):
        for side in "-+":
            face = ax + side
            kind = spec.conditions[name][face]
            if kind == "periodic":
                continue
            for b in grid.blocks:
                if not grid.touches_global_face(b, face):
                    continue
                arr = b.fields[name][which]
                n = b.cells[ax_i]
                ghost_i, inner_i = (0, 1) if side == "-" else (n + 1, n)
                axis = 3 - ax_i  # array axis: (comp, z, y, x)
                g = [slice(None)] * 4
                g[axis] = ghost_i
                if kind == "neumann":
                    s = [slice(None)] * 4
                    s[axis] = inner_i
                    arr[tuple(g)] = arr[tuple(s)]
                else:
                    vals = np.asarray(spec.values[name][face], dtype=np.float64)
                    arr[tuple(g)] = vals.reshape((-1,) + (1,) * 2)
