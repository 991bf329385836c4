import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ternpf.lattice import (DIRECTIONS, FIELDS, BoundarySpec, DomainSpec, apply_boundaries, build_block_grid,
                            exchange_ghost_layers, pack, unpack, _region)
from ternpf.thermo import ConfigError


def test_single_block_of_60_cubed():
    grid = build_block_grid(DomainSpec((60, 60, 60), 1.0))
    assert len(grid) == 1
    assert grid.blocks[0].n_cells == 60**3


def test_eight_blocks_each_with_26_neighbours():
    grid = build_block_grid(DomainSpec((64, 64, 64), 1.0, (2, 2, 2)))
    assert len(grid) == 8
    for b in grid:
        assert b.cells == (32, 32, 32)
        assert sum(nb is not None for nb in b.neighbors.values()) == 26


def test_non_divisible_axis_is_named():
    with pytest.raises(ConfigError, match="x not divisible"):
        DomainSpec((60, 60, 60), 1.0, (7, 1, 1))


def test_ghost_width_is_one():
    with pytest.raises(ConfigError):
        DomainSpec((8, 8, 8), 1.0, ghost_width=2)


def test_fields_are_structure_of_arrays():
    grid = build_block_grid(DomainSpec((8, 6, 4), 1.0))
    b = grid.blocks[0]
    for name, n in FIELDS.items():
        src, dst = b.src(name), b.dst(name)
        assert src.shape == dst.shape == (n, 6, 8, 10)
        for c in range(n):
            comp = b.component(name, c)
            assert comp.flags["C_CONTIGUOUS"]
            assert np.shares_memory(comp, src)


def test_every_cell_owned_once():
    grid = build_block_grid(DomainSpec((12, 8, 6), 1.0, (3, 2, 1)))
    owner = np.zeros((6, 8, 12), dtype=int)
    for b in grid:
        (x0, y0, z0), (x1, y1, z1) = b.cell_range()
        owner[z0:z1, y0:y1, x0:x1] += 1
    assert np.all(owner == 1)


def test_constant_block_fills_neighbour_ghosts():
    grid = build_block_grid(DomainSpec((8, 4, 4), 1.0, (2, 1, 1)))
    grid.blocks[0].interior(grid.blocks[0].src("mu"))[...] = 3.0
    exchange_ghost_layers(grid, "mu")
    b1 = grid.blocks[1]
    assert np.all(b1.src("mu")[:, 1:-1, 1:-1, 0] == 3.0)


def test_single_periodic_block_wraps():
    grid = build_block_grid(DomainSpec((5, 4, 3), 1.0))
    rng = np.random.default_rng(0)
    data = rng.random((4, 3, 4, 5))
    grid.scatter("phi", data)
    exchange_ghost_layers(grid, "phi")
    full = grid.blocks[0].src("phi")
    expect = np.pad(data, ((0, 0), (1, 1), (1, 1), (1, 1)), mode="wrap")
    assert np.array_equal(full, expect)


def test_multi_block_neighbourhoods_match_single_block():
    rng = np.random.default_rng(1)
    data = rng.random((2, 16, 16, 16))
    ref = build_block_grid(DomainSpec((16, 16, 16), 1.0))
    ref.scatter("mu", data)
    exchange_ghost_layers(ref, "mu")
    padded = ref.blocks[0].src("mu")
    grid = build_block_grid(DomainSpec((16, 16, 16), 1.0, (2, 2, 2)))
    grid.scatter("mu", data)
    exchange_ghost_layers(grid, "mu")
    for b in grid:
        x0, y0, z0 = b.origin
        nx, ny, nz = b.cells
        # global padded index = global index + 1
        want = padded[:, z0:z0 + nz + 2, y0:y0 + ny + 2, x0:x0 + nx + 2]
        assert np.array_equal(b.src("mu"), want)


def test_exchange_is_idempotent():
    grid = build_block_grid(DomainSpec((8, 8, 8), 1.0, (2, 2, 1)))
    grid.scatter("phi", np.random.default_rng(2).random((4, 8, 8, 8)))
    exchange_ghost_layers(grid, "phi")
    before = [b.src("phi").copy() for b in grid]
    exchange_ghost_layers(grid, "phi")
    assert all(np.array_equal(a, b.src("phi")) for a, b in zip(before, grid))


def test_non_periodic_faces_left_alone_by_exchange():
    spec = DomainSpec((4, 4, 4), 1.0)
    grid = build_block_grid(spec, BoundarySpec.directional((0.0, 0.0)))
    grid.scatter("mu", np.ones((2, 4, 4, 4)))
    exchange_ghost_layers(grid, "mu")
    arr = grid.blocks[0].src("mu")
    assert np.all(arr[:, 0] == 0.0) and np.all(arr[:, -1] == 0.0)
    assert np.all(arr[:, 1:-1, 0, 1:-1] == 1.0)


def test_neumann_copies_and_dirichlet_assigns():
    boundary = BoundarySpec.directional((0.25, -0.5))
    grid = build_block_grid(DomainSpec((4, 4, 6), 1.0), boundary)
    mu = np.zeros((2, 6, 4, 4))
    mu[:, 0] = 0.7
    grid.scatter("mu", mu)
    phi = np.zeros((4, 6, 4, 4))
    phi[3] = 1.0
    phi[3, -1] = 0.7
    phi[0, -1] = 0.3
    grid.scatter("phi", phi)
    for name in ("phi", "mu"):
        exchange_ghost_layers(grid, name)
        apply_boundaries(grid, name, boundary)
    b = grid.blocks[0]
    assert np.all(b.src("mu")[:, 0] == 0.7)
    assert np.all(b.src("mu")[0, -1] == 0.25) and np.all(b.src("mu")[1, -1] == -0.5)
    assert np.all(b.src("phi")[3, -1] == 0.7)


def test_boundary_validation():
    with pytest.raises(ConfigError, match="paired"):
        BoundarySpec({"phi": {"x-": "neumann"}})
    with pytest.raises(ConfigError, match="dirichlet"):
        BoundarySpec({"mu": {"z-": "dirichlet", "z+": "dirichlet"}})
    with pytest.raises(ConfigError):
        BoundarySpec({"phi": {"x-": "sticky", "x+": "sticky"}})


def test_wire_format_is_little_endian_binary64():
    arr = np.arange(2 * 3 * 3 * 3, dtype=np.float64).reshape(2, 3, 3, 3)
    region = _region((1, 0, 0), (1, 1, 1), ghost=False)
    buf = pack(arr, region)
    assert buf == np.ascontiguousarray(arr[region]).astype("<f8").tobytes()
    out = np.zeros_like(arr)
    unpack(buf, out, region)
    assert np.array_equal(out[region], arr[region])


@given(
    bx=st.sampled_from([1, 2]), by=st.sampled_from([1, 2]), bz=st.sampled_from([1, 2, 4]),
    seed=st.integers(0, 2**32 - 1),
)
def test_gather_scatter_round_trip(bx, by, bz, seed):
    grid = build_block_grid(DomainSpec((4, 4, 8), 1.0, (bx, by, bz)))
    data = np.random.default_rng(seed).random((4, 8, 4, 4))
    grid.scatter("phi", data)
    assert np.array_equal(grid.gather("phi"), data)


@given(seed=st.integers(0, 2**32 - 1), blocks=st.sampled_from([(2, 1, 1), (1, 2, 2), (2, 2, 2)]))
def test_ghosts_equal_wrapped_neighbours(seed, blocks):
    data = np.random.default_rng(seed).random((2, 4, 4, 4))
    grid = build_block_grid(DomainSpec((4, 4, 4), 1.0, blocks))
    grid.scatter("mu", data)
    exchange_ghost_layers(grid, "mu")
    padded = np.pad(data, ((0, 0), (1, 1), (1, 1), (1, 1)), mode="wrap")
    for b in grid:
        x0, y0, z0 = b.origin
        nx, ny, nz = b.cells
        assert np.array_equal(b.src("mu"), padded[:, z0:z0 + nz + 2, y0:y0 + ny + 2, x0:x0 + nx + 2])


def test_all_directions_enumerated():
    assert len(DIRECTIONS) == 26
