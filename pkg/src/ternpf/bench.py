"""Kernel timing, roofline arithmetic and thread-scaling tables."""
from __future__ import annotations

import csv
import hashlib
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig, build_config
from .init import SCENARIOS, scenario_state
from .kernels import KernelParams, KernelVariant, counters_dict, sweep_block_mu, sweep_block_phi
from .lattice import BoundarySpec, DomainSpec, build_block_grid, exchange_ghost_layers
from .timeloop import Simulation, StepSchedule

GIB = float(2**30)
# per-LUP memory traffic and operation count of the mu kernel, fixed machine-model inputs
MU_BYTES_PER_LUP = 680.0
MU_FLOP_PER_LUP = 1384.0


class DeterminismError(RuntimeError):
    """Fields differ between thread counts; timings would be meaningless."""


@dataclass
class KernelStats:
    kernel: str
    cells_updated: int
    wall_seconds: float
    counters: dict = field(default_factory=dict)

    @property
    def mlups(self) -> float:
        return self.cells_updated / self.wall_seconds / 1e6 if self.wall_seconds > 0 else 0.0


@dataclass(frozen=True)
class Machine:
    bandwidth: float  # bytes per second
    peak_flops: float | None = None  # flop per second


@dataclass
class RooflineReport:
    bytes_per_lup: float
    flop_per_lup: float
    bandwidth_ceiling_mlups: float
    compute_ceiling_mlups: float | None
    measured_mlups: float | None
    achieved_gflops: float | None

    @property
    def bound(self) -> str:
        if self.compute_ceiling_mlups is None or self.bandwidth_ceiling_mlups <= self.compute_ceiling_mlups:
            return "memory"
        return "compute"

    @property
    def ceiling_mlups(self) -> float:
        if self.compute_ceiling_mlups is None:
            return self.bandwidth_ceiling_mlups
        return min(self.bandwidth_ceiling_mlups, self.compute_ceiling_mlups)

    def lines(self) -> list[str]:
        out = [f"bandwidth ceiling: {self.bandwidth_ceiling_mlups:.1f} MLUP/s "
               f"({self.bytes_per_lup:g} B/LUP)"]
        if self.compute_ceiling_mlups is not None:
            out.append(f"compute ceiling:   {self.compute_ceiling_mlups:.1f} MLUP/s "
                       f"({self.flop_per_lup:g} FLOP/LUP)")
        out.append(f"bound: {self.bound}")
        if self.measured_mlups is not None:
            out.append(f"measured: {self.measured_mlups:.1f} MLUP/s = {self.achieved_gflops:.1f} GFLOP/s")
        return out


def roofline_report(stats, machine: Machine, bytes_per_lup: float = MU_BYTES_PER_LUP,
                    flop_per_lup: float = MU_FLOP_PER_LUP) -> RooflineReport:
    """Bandwidth and compute ceilings for a kernel; ``stats`` is KernelStats, a MLUP/s value or None."""
    if bytes_per_lup <= 0 or flop_per_lup <= 0:
        raise ValueError("per-LUP byte and FLOP counts must be positive")
    measured = stats.mlups if isinstance(stats, KernelStats) else stats
    bw = machine.bandwidth / bytes_per_lup / 1e6
    comp = machine.peak_flops / flop_per_lup / 1e6 if machine.peak_flops else None
    gflops = measured * flop_per_lup / 1e3 if measured is not None else None
    return RooflineReport(bytes_per_lup, flop_per_lup, bw, comp, measured, gflops)


# kernel benchmark ------------------------------------------------------------------


def benchmark_config(block_size: int, blocks=(1, 1, 1), threads: int = 1) -> RunConfig:
    """Model-system parameters with the frozen isotherm through the middle of the block."""
    nx = block_size * blocks[0]
    return build_config({
        "domain": {"cells": [nx, block_size * blocks[1], block_size * blocks[2]], "blocks": list(blocks)},
        "temperature": {"G": 0.003, "v": 0.1, "z0": block_size / 2},
        "boundary": {"kind": "periodic"},
        "time": {"threads": threads},
    })


@dataclass
class BenchRow:
    scenario: str
    variant: str
    kernel: str
    cells: int
    reps: int
    median_seconds: float
    counters: dict

    @property
    def mlups(self) -> float:
        return self.cells / self.median_seconds / 1e6 if self.median_seconds > 0 else 0.0

    def as_dict(self) -> dict:
        d = {"scenario": self.scenario, "variant": self.variant, "kernel": self.kernel, "cells": self.cells,
             "reps": self.reps, "median_seconds": self.median_seconds, "mlups": self.mlups}
        d.update(self.counters)
        return d


def _scenario_grid(scenario: str, cfg: RunConfig, seed: int):
    grid = build_block_grid(cfg.domain, cfg.boundary)
    phi, mu = scenario_state(scenario, cfg.domain.global_cells, seed)
    grid.scatter("phi", phi)
    grid.scatter("mu", mu)
    exchange_ghost_layers(grid, "phi")
    exchange_ghost_layers(grid, "mu")
    return grid


def benchmark_kernels(scenario: str, block_size: int = 60, variants=None, reps: int = 5,
                      seed: int = 0) -> list[BenchRow]:
    """Median wall time of repeated phi and mu sweeps on a preset block.

    The sweeps never swap, so every repetition performs identical work and
    produces identical counters.
    """
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    variants = [KernelVariant.parse(v) for v in (variants or list(KernelVariant))]
    cfg = benchmark_config(block_size)
    kp = KernelParams.build(cfg.model, cfg.thermo, cfg.temperature, cfg.domain.dx, cfg.dt)
    grid = _scenario_grid(scenario, cfg, seed)
    block = grid.blocks[0]
    # phi_dst ghosts are needed by the mu sweep: one phi sweep plus exchange
    sweep_block_phi(block, KernelVariant.REFERENCE, kp, 0.0)
    exchange_ghost_layers(grid, "phi", 1)
    rows = []
    for var in variants:
        for kernel in ("phi", "mu"):
            times = []
            for _ in range(reps):
                block.counters[:] = 0
                t0 = time.perf_counter()
                if kernel == "phi":
                    sweep_block_phi(block, var, kp, 0.0)
                else:
                    sweep_block_mu(block, var, kp, 0.0)
                times.append(time.perf_counter() - t0)
            rows.append(BenchRow(scenario, var.value, kernel, block.n_cells, reps, statistics.median(times),
                                 counters_dict(block.counters)))
    return rows


def write_table(rows, path) -> Path:
    path = Path(path)
    dicts = [r.as_dict() if hasattr(r, "as_dict") else dict(r) for r in rows]
    if not dicts:
        path.write_text("")
        return path
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(dicts[0]))
        w.writeheader()
        w.writerows(dicts)
    return path


# thread scaling ----------------------------------------------------------------------


def field_checksum(grid) -> str:
    h = hashlib.sha256()
    for name in ("phi", "mu"):
        h.update(np.ascontiguousarray(grid.gather(name)).tobytes())
    return h.hexdigest()


def _timed_run(scenario, cfg, threads, steps, seed):
    grid = _scenario_grid(scenario, cfg, seed)
    kp = KernelParams.build(cfg.model, cfg.thermo, cfg.temperature, cfg.domain.dx, cfg.dt)
    sched = StepSchedule(cfg.dt, cfg.schedule.overlap_mode, variant=cfg.schedule.variant)
    with Simulation(grid, kp, cfg.boundary, sched, threads=threads) as sim:
        sim.refresh_all()
        t0 = time.perf_counter()
        for _ in range(steps):
            sim.step()
        wall = time.perf_counter() - t0
    return grid, wall


def thread_scaling(thread_counts, scenarios=SCENARIOS, block_size: int = 32, steps: int = 5,
                   seed: int = 0, boundary: BoundarySpec | None = None) -> list[dict]:
    """Weak scaling: ``t`` threads advance ``t`` blocks of ``block_size``^3 cells.

    Before timing, every configuration is run once with one thread and once
    with ``t`` threads; differing field checksums raise DeterminismError.
    Efficiency is per-thread throughput relative to the first entry of
    ``thread_counts`` (normally one thread).
    """
    rows = []
    for scenario in scenarios:
        base = None
        for t in thread_counts:
            cfg = benchmark_config(block_size, (t, 1, 1), t)
            if boundary is not None:
                cfg.boundary = boundary
            ref, _ = _timed_run(scenario, cfg, 1, steps, seed)
            grid, wall = _timed_run(scenario, cfg, t, steps, seed)
            ref_sum, sum_t = field_checksum(ref), field_checksum(grid)
            if ref_sum != sum_t:
                raise DeterminismError(f"{scenario}: {t} threads changed the fields ({sum_t[:12]} vs {ref_sum[:12]})")
            mlups = cfg.domain.n_cells * steps / wall / 1e6
            if base is None:
                base = mlups / t
            rows.append({"scenario": scenario, "threads": t, "blocks": t, "cells": cfg.domain.n_cells,
                         "steps": steps, "seconds": wall, "mlups": mlups,
                         "efficiency": (mlups / t) / base, "checksum": sum_t[:16]})
    return rows


def scenario_ranking(rows, variant: str = "opt_full") -> list[str]:
    """Scenarios from fastest to slowest by summed phi + mu median time of one variant."""
    per: dict = {}
    for r in rows:
        d = r.as_dict() if hasattr(r, "as_dict") else r
        if d["variant"] == variant:
            per[d["scenario"]] = per.get(d["scenario"], 0.0) + d["median_seconds"]
    return sorted(per, key=per.get)


def combined_mlups(rows, scenario: str, variant: str) -> float:
    """Throughput of one full step (phi sweep followed by mu sweep)."""
    sel = [r for r in rows if r.scenario == scenario and r.variant == variant]
    return sel[0].cells / sum(r.median_seconds for r in sel) / 1e6
