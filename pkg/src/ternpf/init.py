"""Initial conditions: Voronoi nuclei under a melt, and benchmark presets."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve
from scipy.spatial import cKDTree

from .lattice import BlockGrid
from .thermo import LIQUID, N_PHASES, ConfigError

SCENARIOS = ("liquid", "solid", "interface")


@dataclass
class InitSpec:
    nuclei_count: int = 16
    volume_fractions: tuple = (1 / 3, 1 / 3, 1 / 3)
    nuclei_height: int = 8
    rng_seed: int = 0
    liquid_mu: tuple = (0.0, 0.0)
    relax_steps: int = 100

    def __post_init__(self):
        self.volume_fractions = tuple(float(f) for f in self.volume_fractions)
        self.liquid_mu = tuple(float(m) for m in self.liquid_mu)
        if len(self.volume_fractions) != N_PHASES - 1:
            raise ConfigError("volume_fractions needs one entry per solid phase")
        if any(f < 0.0 for f in self.volume_fractions):
            raise ConfigError("volume fractions must be non-negative")
        if abs(sum(self.volume_fractions) - 1.0) > 1e-12:
            raise ConfigError(f"volume fractions sum to {sum(self.volume_fractions)!r}, not 1")
        if len(self.liquid_mu) != 2:
            raise ConfigError("liquid_mu needs two entries")
        if self.nuclei_count < 1 or self.nuclei_height < 1 or self.relax_steps < 0:
            raise ConfigError("nuclei_count and nuclei_height must be positive, relax_steps >= 0")


def largest_remainder(n: int, fractions) -> np.ndarray:
    """Integer counts summing to n closest to n * fractions (ties to the lower index)."""
    quota = n * np.asarray(fractions, dtype=np.float64)
    counts = np.floor(quota).astype(np.int64)
    rest = n - int(counts.sum())
    order = np.argsort(-(quota - counts), kind="stable")
    counts[order[:rest]] += 1
    return counts


def voronoi_labels(global_cells, spec: InitSpec) -> np.ndarray:
    """Solid label (0..2) of every cell in the nuclei slab, array shape (h, Ny, Nx)."""
    nx, ny, nz = global_cells
    h = min(spec.nuclei_height, nz)
    if spec.nuclei_count > nx * ny * h:
        raise ConfigError(f"nuclei_count {spec.nuclei_count} exceeds the {nx * ny * h} slab cells")
    rng = np.random.default_rng(spec.rng_seed)
    seeds = rng.random((spec.nuclei_count, 3)) * np.array([nx, ny, h])
    phases = np.repeat(np.arange(N_PHASES - 1), largest_remainder(spec.nuclei_count, spec.volume_fractions))
    rng.shuffle(phases)
    # periodic in x and y; the z box is wide enough that wrapping never wins
    box = np.array([nx, ny, 4.0 * h])
    tree = cKDTree(seeds, boxsize=box)
    z, y, x = np.meshgrid(np.arange(h), np.arange(ny), np.arange(nx), indexing="ij")
    centres = np.stack([x.ravel() + 0.5, y.ravel() + 0.5, z.ravel() + 0.5], axis=1)
    _, nearest = tree.query(centres)
    return phases[nearest].reshape(h, ny, nx)


def voronoi_init(grid: BlockGrid, spec: InitSpec) -> None:
    """Pure-phase Voronoi nuclei at the bottom, pure melt above, uniform mu."""
    nx, ny, nz = grid.spec.global_cells
    labels = voronoi_labels(grid.spec.global_cells, spec)
    phi = np.zeros((N_PHASES, nz, ny, nx))
    phi[LIQUID] = 1.0
    h = labels.shape[0]
    phi[LIQUID, :h] = 0.0
    for a in range(N_PHASES - 1):
        phi[a, :h] = labels == a
    mu = np.empty((2, nz, ny, nx))
    mu[0] = spec.liquid_mu[0]
    mu[1] = spec.liquid_mu[1]
    grid.scatter("phi", phi)
    grid.scatter("mu", mu)


def relax_interfaces(sim, steps: int) -> None:
    """phi-only steps without driving force to turn sharp nuclei into diffuse interfaces.

    Time, step counter and mu are left untouched.
    """
    driving = sim.driving
    sim.driving = False
    try:
        sim.refresh_ghosts("phi")
        for _ in range(steps):
            sim.sweep_phi()
            for b in sim.grid:
                b.swap("phi")
            sim.refresh_ghosts("phi")
    finally:
        sim.driving = driving
    sim.reset_counters()


def _smoothed(labels: np.ndarray, width: int) -> np.ndarray:
    """Box-filtered indicator functions; absent phases stay exactly zero."""
    ind = np.stack([(labels == a).astype(np.int64) for a in range(N_PHASES)])
    if width <= 1:
        return ind.astype(np.float64)
    # integer box sums keep pure cells at exactly 1.0
    box = np.ones((width,) * 3, dtype=np.int64)
    counts = np.stack([convolve(p, box, mode="wrap") for p in ind])
    return counts / float(width**3)


def scenario_state(scenario: str, cells, seed: int = 0, width: int = 3):
    """(phi, mu) arrays of shape (comp, nz, ny, nx) for a benchmark preset.

    liquid: pure melt.  solid: multi-grain solid, no melt.  interface: a
    solidification front band with grains of all three solids below the melt.
    """
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; choose from {SCENARIOS}")
    nx, ny, nz = cells
    rng = np.random.default_rng(seed)
    mu = np.zeros((2, nz, ny, nx))
    if scenario == "liquid":
        labels = np.full((nz, ny, nx), LIQUID)
        return _smoothed(labels, 1), mu
    # coarse grains far behind the front, fine lamellae at the front
    n_grains = max(4, nx * ny * nz // (4096 if scenario == "solid" else 512))
    seeds = rng.random((n_grains, 3)) * np.array([nx, ny, nz])
    tree = cKDTree(seeds, boxsize=np.array([nx, ny, nz], dtype=np.float64))
    z, y, x = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij")
    centres = np.stack([x.ravel() + 0.5, y.ravel() + 0.5, z.ravel() + 0.5], axis=1)
    _, nearest = tree.query(centres)
    labels = (np.arange(n_grains) % (N_PHASES - 1))[nearest].reshape(nz, ny, nx)
    if scenario == "interface":
        # undulating front through the middle of the block
        front = nz / 2 + 0.15 * nz * np.sin(2 * np.pi * x / nx) * np.cos(2 * np.pi * y / ny)
        labels = np.where(z + 0.5 > front, LIQUID, labels)
        mu = 0.01 * rng.standard_normal((2, nz, ny, nx))
    return _smoothed(labels, width), mu


def scenario_init(grid: BlockGrid, scenario: str, seed: int = 0) -> None:
    phi, mu = scenario_state(scenario, grid.spec.global_cells, seed)
    grid.scatter("phi", phi)
    grid.scatter("mu", mu)
