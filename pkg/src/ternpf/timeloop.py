"""Time stepping: the plain and the communication-overlapping step, the moving
window and the cadenced run loop."""
from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .kernels import KernelParams, KernelVariant, counters_dict, sweep_block_mu, sweep_block_phi
from .kernels.params import N_COUNTERS
from .lattice import BlockGrid, BoundarySpec, apply_boundaries, exchange_ghost_layers
from .thermo import LIQUID, ConfigError

OVERLAP_MODES = ("none", "mu_only", "phi_only", "phi_and_mu", "both")
FRONT_THRESHOLD = 0.95


@dataclass
class StepSchedule:
    dt: float
    overlap_mode: str = "mu_only"
    checkpoint_every: int = 0
    mesh_every: int = 0
    metrics_every: int = 0
    variant: str = "opt_full"
    fast_rsqrt: bool = False

    def __post_init__(self):
        if self.overlap_mode not in OVERLAP_MODES:
            raise ConfigError(f"overlap_mode must be one of {OVERLAP_MODES}, got {self.overlap_mode!r}")
        if not self.dt > 0.0:
            raise ConfigError("dt must be positive")
        for name in ("checkpoint_every", "mesh_every", "metrics_every"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        self.variant = KernelVariant.parse(self.variant).value

    @property
    def overlaps_mu(self) -> bool:
        return self.overlap_mode in ("mu_only", "phi_and_mu", "both")

    @property
    def splits_mu(self) -> bool:
        return self.overlap_mode in ("phi_only", "phi_and_mu", "both")


@dataclass
class MovingWindow:
    front_offset_target: int = 20
    window_origin_z: int = 0
    scrollback_sink: Callable | None = None  # called as sink(global_z, phi_slice, mu_slice)
    check_every: int = 1

    def __post_init__(self):
        if self.front_offset_target < 1:
            raise ConfigError("front_offset_target must be at least one cell")


class EventLog:
    """Begin/end records of the phases of each step (monotonic nanoseconds)."""

    def __init__(self):
        self.records: list[tuple[int, str, str, int]] = []
        self._lock = threading.Lock()

    def mark(self, step: int, phase: str, kind: str) -> None:
        with self._lock:
            self.records.append((step, phase, kind, time.perf_counter_ns()))

    @contextmanager
    def span(self, step: int, phase: str):
        self.mark(step, phase, "begin")
        try:
            yield
        finally:
            self.mark(step, phase, "end")

    def spans(self, step: int | None = None) -> list[tuple[int, str, int, int]]:
        """Completed (step, phase, begin_ns, end_ns) in order of beginning."""
        open_: dict[tuple, int] = {}
        out = []
        for s, phase, kind, ts in self.records:
            if step is not None and s != step:
                continue
            if kind == "begin":
                open_[(s, phase)] = ts
            else:
                out.append((s, phase, open_.pop((s, phase)), ts))
        return sorted(out, key=lambda r: r[2])

    def phases(self, step: int) -> list[str]:
        return [p for _, p, _, _ in self.spans(step)]

    def write(self, path) -> None:
        with open(path, "w") as fh:
            for s, phase, b, e in self.spans():
                fh.write(f"{s} {phase} {b} {e}\n")

    def clear(self) -> None:
        self.records.clear()


class _NullLog:
    @contextmanager
    def span(self, step, phase):
        yield


class Simulation:
    """A block grid together with everything needed to advance it."""

    def __init__(self, grid: BlockGrid, kp: KernelParams, boundary: BoundarySpec,
                 schedule: StepSchedule, threads: int = 1, event_log: EventLog | None = None,
                 driving: bool = True):
        if threads < 1:
            raise ConfigError("threads must be >= 1")
        if abs(kp.dt - schedule.dt) > 0.0:
            raise ConfigError("kernel parameters and schedule disagree on dt")
        self.grid = grid
        self.kp = kp
        self.boundary = boundary
        self.schedule = schedule
        self.threads = threads
        self.driving = driving
        self.log = event_log if event_log is not None else _NullLog()
        self.timers = {"phi_sweep": 0.0, "mu_sweep": 0.0, "communication": 0.0}
        self.mu_ghosts_pending = False
        self._pool = ThreadPoolExecutor(threads) if threads > 1 else None
        self._comm = ThreadPoolExecutor(1, thread_name_prefix="comm")

    # housekeeping ---------------------------------------------------------------
    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
        self._comm.shutdown()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    @property
    def variant(self) -> KernelVariant:
        return KernelVariant.parse(self.schedule.variant)

    @property
    def t(self) -> float:
        return self.grid.t

    @property
    def step_index(self) -> int:
        return self.grid.step

    def z_offset(self, block) -> int:
        return self.grid.window_origin_z + block.origin[2]

    def counters(self) -> dict:
        total = np.zeros(N_COUNTERS, dtype=np.int64)
        for b in self.grid:
            total += b.counters
        return counters_dict(total)

    def reset_counters(self) -> None:
        for b in self.grid:
            b.counters[:] = 0

    # building blocks ---------------------------------------------------------------
    def _each_block(self, fn) -> None:
        if self._pool is None:
            for b in self.grid:
                fn(b)
        else:
            # list() re-raises the first worker exception
            list(self._pool.map(fn, self.grid.blocks))

    def refresh_ghosts(self, name: str, which: int = 0) -> None:
        t0 = time.perf_counter()
        exchange_ghost_layers(self.grid, name, which)
        apply_boundaries(self.grid, name, self.boundary, which)
        self.timers["communication"] += time.perf_counter() - t0

    def refresh_all(self) -> None:
        self.refresh_ghosts("phi")
        self.refresh_ghosts("mu")
        self.mu_ghosts_pending = False

    def sweep_phi(self) -> None:
        t0 = time.perf_counter()
        kp, t, var, step = self.kp, self.grid.t, self.variant, self.grid.step
        self._each_block(lambda b: sweep_block_phi(b, var, kp, t, self.z_offset(b), self.driving, step))
        self.timers["phi_sweep"] += time.perf_counter() - t0

    def sweep_mu(self, mode: str = "full") -> None:
        t0 = time.perf_counter()
        kp, t, var, step = self.kp, self.grid.t, self.variant, self.grid.step
        rs = self.schedule.fast_rsqrt
        self._each_block(lambda b: sweep_block_mu(b, var, kp, t, self.z_offset(b), mode, rs, step))
        self.timers["mu_sweep"] += time.perf_counter() - t0

    def _finish(self) -> None:
        self.grid.swap()
        self.grid.t += self.kp.dt
        self.grid.step += 1

    def step(self) -> None:
        if self.schedule.overlap_mode == "none":
            step_basic(self)
        else:
            step_overlapped(self)


def step_basic(sim: Simulation) -> None:
    """phi sweep, phi exchange, phi boundaries, mu sweep, mu exchange, mu boundaries, swap."""
    n = sim.grid.step
    log = sim.log
    if sim.mu_ghosts_pending:
        sim.refresh_ghosts("mu")
        sim.mu_ghosts_pending = False
    with log.span(n, "phi_sweep"):
        sim.sweep_phi()
    with log.span(n, "phi_exchange"):
        t0 = time.perf_counter()
        exchange_ghost_layers(sim.grid, "phi", 1)
        sim.timers["communication"] += time.perf_counter() - t0
    with log.span(n, "phi_boundary"):
        apply_boundaries(sim.grid, "phi", sim.boundary, 1)
    with log.span(n, "mu_sweep"):
        sim.sweep_mu("full")
    with log.span(n, "mu_exchange"):
        t0 = time.perf_counter()
        exchange_ghost_layers(sim.grid, "mu", 1)
        sim.timers["communication"] += time.perf_counter() - t0
    with log.span(n, "mu_boundary"):
        apply_boundaries(sim.grid, "mu", sim.boundary, 1)
    with log.span(n, "swap"):
        sim._finish()


def step_overlapped(sim: Simulation) -> None:
    """Step with communication hidden behind sweeps.

    The mu ghost exchange of the previous step is deferred and runs on the
    communication thread while the phi sweep (which reads only local mu)
    proceeds.  In the split modes the phi ghost exchange runs while the
    local part of the mu sweep proceeds, and the anti-trapping part follows.
    """
    n = sim.grid.step
    log = sim.log
    sched = sim.schedule

    def comm(name, which, tag):
        def run():
            with log.span(n, tag):
                sim.refresh_ghosts(name, which)
        return run

    with log.span(n, "phi_sweep"):
        pending = None
        if sim.mu_ghosts_pending:
            if sched.overlaps_mu:
                pending = sim._comm.submit(comm("mu", 0, "mu_exchange"))
            else:
                comm("mu", 0, "mu_exchange")()
        sim.sweep_phi()
        if pending is not None:
            pending.result()
        sim.mu_ghosts_pending = False

    if sched.splits_mu:
        with log.span(n, "mu_sweep_local"):
            fut = sim._comm.submit(comm("phi", 1, "phi_exchange"))
            sim.sweep_mu("local_only")
            fut.result()
        with log.span(n, "mu_sweep_neighbor"):
            sim.sweep_mu("neighbor_only")
    else:
        comm("phi", 1, "phi_exchange")()
        with log.span(n, "mu_sweep"):
            sim.sweep_mu("full")

    if sched.overlaps_mu:
        sim.mu_ghosts_pending = True
    else:
        comm("mu", 1, "mu_exchange")()
    with log.span(n, "swap"):
        sim._finish()


# moving window ------------------------------------------------------------------


def front_position(grid: BlockGrid) -> int:
    """Highest window-local z index holding a cell with phi_liquid below the threshold (-1 if none)."""
    nz = grid.spec.global_cells[2]
    has_solid = np.zeros(nz, dtype=bool)
    for b in grid:
        liq = b.interior(b.src("phi"))[LIQUID]
        z0 = b.origin[2]
        has_solid[z0:z0 + b.cells[2]] |= (liq < FRONT_THRESHOLD).any(axis=(1, 2))
    idx = np.flatnonzero(has_solid)
    return int(idx[-1]) if idx.size else -1


def _top_mu(sim: Simulation, mu: np.ndarray) -> np.ndarray:
    if sim.boundary.conditions["mu"]["z+"] == "dirichlet":
        return np.asarray(sim.boundary.values["mu"]["z+"], dtype=np.float64)
    return mu[:, -1].mean(axis=(1, 2))


def maybe_shift_window(sim: Simulation, window: MovingWindow) -> int:
    """Shift the domain down until the front is ``front_offset_target`` cells below the top."""
    grid = sim.grid
    nz = grid.spec.global_cells[2]
    front = front_position(grid)
    distance = nz - 1 - front
    shift = window.front_offset_target - distance
    if front < 0 or shift <= 0:
        return 0
    shift = min(shift, nz)
    if sim.mu_ghosts_pending:
        sim.refresh_ghosts("mu")
        sim.mu_ghosts_pending = False
    phi = grid.gather("phi")
    mu = grid.gather("mu")
    top_mu = _top_mu(sim, mu)
    if window.scrollback_sink is not None:
        for s in range(shift):
            window.scrollback_sink(grid.window_origin_z + s, phi[:, s].copy(), mu[:, s].copy())
    phi = np.concatenate([phi[:, shift:], np.zeros((phi.shape[0], shift) + phi.shape[2:])], axis=1)
    mu = np.concatenate([mu[:, shift:], np.empty((mu.shape[0], shift) + mu.shape[2:])], axis=1)
    phi[LIQUID, nz - shift:] = 1.0
    mu[:, nz - shift:] = top_mu[:, None, None, None]
    grid.scatter("phi", phi)
    grid.scatter("mu", mu)
    grid.window_origin_z += shift
    window.window_origin_z = grid.window_origin_z
    sim.refresh_all()
    return shift


# run loop -------------------------------------------------------------------------


class SinkError(OSError):
    def __init__(self, path, cause):
        super().__init__(f"output failed for {path}: {cause}")
        self.path = path


@dataclass
class RunSinks:
    """Cadenced outputs.

    ``checkpoint`` and ``mesh`` receive the simulation, ``metrics`` a
    :class:`RunReport` snapshot.
    """

    checkpoint: Callable | None = None
    mesh: Callable | None = None
    metrics: Callable | None = None
    window: MovingWindow | None = None


@dataclass
class RunReport:
    steps: int
    cells: int
    wall_time: float
    timers: dict
    counters: dict
    front_z: int
    phase_fractions: list
    window_origin_z: int
    step: int = 0
    t: float = 0.0
    shifts: int = 0
    front_history: list = field(default_factory=list)

    @property
    def mlups(self) -> float:
        if self.wall_time <= 0.0 or self.steps == 0:
            return 0.0
        return self.cells * self.steps / self.wall_time / 1e6

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["mlups"] = self.mlups
        return d


def phase_fractions(grid: BlockGrid) -> list[float]:
    tot = np.zeros(4)
    for b in grid:
        tot += b.interior(b.src("phi")).sum(axis=(1, 2, 3))
    return (tot / grid.spec.n_cells).tolist()


def global_front(grid: BlockGrid) -> int:
    """Front position in global z (-1 when there is no solid)."""
    front = front_position(grid)
    return grid.window_origin_z + front if front >= 0 else -1


def snapshot(sim: Simulation, steps: int, wall: float, shifts: int = 0, history=()) -> RunReport:
    return RunReport(
        steps=steps,
        cells=sim.grid.spec.n_cells,
        wall_time=wall,
        timers=dict(sim.timers),
        counters=sim.counters(),
        front_z=global_front(sim.grid),
        phase_fractions=phase_fractions(sim.grid),
        window_origin_z=sim.grid.window_origin_z,
        step=sim.grid.step,
        t=sim.grid.t,
        shifts=shifts,
        front_history=list(history),
    )


def _emit(callback, arg):
    try:
        callback(arg)
    except SinkError:
        raise
    except OSError as exc:
        raise SinkError(getattr(exc, "filename", None) or "<sink>", exc) from exc


def run(sim: Simulation, n_steps: int, sinks: RunSinks | None = None) -> RunReport:
    """Advance ``n_steps`` steps with window shifts and cadenced outputs."""
    sinks = sinks or RunSinks()
    sched = sim.schedule
    window = sinks.window
    shifts = 0
    history = []
    t0 = time.perf_counter()
    for done in range(1, n_steps + 1):
        sim.step()
        n = sim.grid.step
        if window is not None and n % window.check_every == 0:
            shifts += maybe_shift_window(sim, window)
        if sched.metrics_every and n % sched.metrics_every == 0:
            history.append((n, global_front(sim.grid)))
            if sinks.metrics is not None:
                _emit(sinks.metrics, snapshot(sim, done, time.perf_counter() - t0, shifts, history))
        if sinks.checkpoint is not None and sched.checkpoint_every and n % sched.checkpoint_every == 0:
            _emit(sinks.checkpoint, sim)
        if sinks.mesh is not None and sched.mesh_every and n % sched.mesh_every == 0:
            _emit(sinks.mesh, sim)
    return snapshot(sim, n_steps, time.perf_counter() - t0, shifts, history)
