"""Command-line front end: ``ternpf simulate | benchmark | resume | mesh-export``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import bench
from .config import RunConfig, build_config, load_config, parse_overrides
from .init import SCENARIOS, relax_interfaces, scenario_init, voronoi_init
from .kernels import KernelParams, KernelVariant, NumericalFault
from .lattice import BoundarySpec, DomainSpec, build_block_grid, exchange_ghost_layers
from .meshio import (CheckpointFormatError, MetricsWriter, ScrollbackWriter, StitchingError, phase_mesh,
                     read_checkpoint, read_header, write_checkpoint, write_mesh)
from .thermo import N_PHASES, ConfigError
from .timeloop import RunSinks, Simulation, run, snapshot

log = logging.getLogger("ternpf")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def checkpoint_name(step: int) -> str:
    return f"checkpoint_{step:08d}.pfcp"


def mesh_name(step: int, phase: int) -> str:
    return f"mesh_{step:08d}_phase{phase}.ply"


def _blocks(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--blocks expects X,Y,Z integers, got {text!r}") from None
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"--blocks expects three values, got {text!r}")
    return vals


def _flag_overrides(args) -> dict:
    """Command-line flags as config overrides; ``--set`` pairs are applied last."""
    over: dict = {}

    def put(section, key, value):
        if value is not None:
            over.setdefault(section, {})[key] = value

    put("time", "steps", getattr(args, "steps", None))
    put("time", "threads", getattr(args, "threads", None))
    put("time", "variant", getattr(args, "variant", None))
    put("domain", "blocks", getattr(args, "blocks", None))
    put("output", "directory", getattr(args, "output", None))
    put("output", "checkpoint_every", getattr(args, "checkpoint_every", None))
    put("output", "mesh_every", getattr(args, "mesh_every", None))
    put("output", "mesh_ratio", getattr(args, "ratio", None))
    for section, table in parse_overrides(getattr(args, "set", None) or []).items():
        if isinstance(table, dict):
            over.setdefault(section, {}).update(table)
        else:
            over[section] = table
    return over


def _load(args) -> RunConfig:
    over = _flag_overrides(args)
    if args.config is None:
        return build_config({}, over)
    return load_config(args.config, over)


def _output_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _simulation(cfg: RunConfig, grid) -> Simulation:
    kp = KernelParams.build(cfg.model, cfg.thermo, cfg.temperature, cfg.domain.dx, cfg.dt)
    return Simulation(grid, kp, cfg.boundary, cfg.schedule, threads=cfg.threads)


def _mesh_all(grid, out: Path, ratio: float) -> list[Path]:
    exchange_ghost_layers(grid, "phi")
    paths = []
    for a in range(N_PHASES):
        paths.append(write_mesh(phase_mesh(grid, a, ratio), out / mesh_name(grid.step, a)))
    return paths


def _sinks(cfg: RunConfig, out: Path, metrics: MetricsWriter) -> RunSinks:
    window = cfg.window
    if window is not None and cfg.output.scrollback:
        window.scrollback_sink = ScrollbackWriter(out / "scrollback.bin")
    return RunSinks(
        checkpoint=lambda sim: write_checkpoint(sim.grid, out / checkpoint_name(sim.grid.step)),
        mesh=lambda sim: _mesh_all(sim.grid, out, cfg.output.mesh_ratio),
        metrics=metrics,
        window=window,
    )


def _advance(cfg: RunConfig, sim: Simulation, out: Path, metrics: MetricsWriter, initial: bool) -> int:
    if initial:
        metrics(snapshot(sim, 0, 0.0))
        if cfg.output.mesh_every or cfg.steps == 0:
            _mesh_all(sim.grid, out, cfg.output.mesh_ratio)
    report = run(sim, cfg.steps, _sinks(cfg, out, metrics))
    last = out / checkpoint_name(sim.grid.step)
    if not last.exists():
        write_checkpoint(sim.grid, last)
    log.info("steps %d  wall %.2f s  %.2f MLUP/s  front_z %d  window origin %d",
             report.steps, report.wall_time, report.mlups, report.front_z, report.window_origin_z)
    print(f"finished step {sim.grid.step}: {report.mlups:.2f} MLUP/s, front_z {report.front_z}, "
          f"output in {out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load(args)
    out = _output_dir(cfg)
    cfg.write_effective(out / "effective_config.toml")
    grid = build_block_grid(cfg.domain, cfg.boundary)
    with _simulation(cfg, grid) as sim:
        if cfg.init_kind == "voronoi":
            voronoi_init(grid, cfg.init)
            relax_interfaces(sim, cfg.init.relax_steps)
        else:
            scenario_init(grid, cfg.init_kind, cfg.init.rng_seed)
        sim.refresh_all()
        return _advance(cfg, sim, out, MetricsWriter(out / "metrics.csv"), initial=True)


def cmd_resume(args) -> int:
    cfg = _load(args)
    head = read_header(args.checkpoint)
    if tuple(head.cells) != tuple(cfg.domain.global_cells):
        raise ConfigError(f"checkpoint {args.checkpoint} has cells {tuple(head.cells)} "
                          f"but the configuration has {tuple(cfg.domain.global_cells)}")
    out = _output_dir(cfg)
    cfg.write_effective(out / "effective_config.toml")
    grid = build_block_grid(cfg.domain, cfg.boundary)
    read_checkpoint(args.checkpoint, grid)
    if cfg.window is not None:
        cfg.window.window_origin_z = grid.window_origin_z
    with _simulation(cfg, grid) as sim:
        sim.refresh_all()
        return _advance(cfg, sim, out, MetricsWriter(out / "metrics.csv"), initial=False)


def cmd_mesh_export(args) -> int:
    head = read_header(args.checkpoint)
    if args.config is not None:
        cfg = _load(args)
        blocks, boundary = cfg.domain.blocks, cfg.boundary
        out = Path(cfg.output.directory)
    else:
        blocks = args.blocks or [1, 1, 1]
        boundary = BoundarySpec.directional((0.0, 0.0))
        out = Path(args.output or ".")
    spec = DomainSpec(tuple(int(c) for c in head.cells), head.dx, tuple(blocks))
    grid = build_block_grid(spec, boundary)
    read_checkpoint(args.checkpoint, grid)
    out.mkdir(parents=True, exist_ok=True)
    ratio = 1.0 if args.ratio is None else args.ratio
    if not 0.0 < ratio <= 1.0:
        raise ConfigError(f"--ratio must lie in (0, 1], got {ratio}")
    for path in _mesh_all(grid, out, ratio):
        print(path)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    scenarios = SCENARIOS if args.scenario in (None, "all") else (args.scenario,)
    variants = [KernelVariant.parse(v) for v in args.variant.split(",")] if args.variant else list(KernelVariant)
    rows = []
    for sc in scenarios:
        rows += bench.benchmark_kernels(sc, args.block_size, variants, args.reps, args.seed)
    out = Path(args.output or ".")
    out.mkdir(parents=True, exist_ok=True)
    path = bench.write_table(rows, out / "benchmark.csv")
    print(f"{'scenario':<10} {'variant':<15} {'kernel':<6} {'MLUP/s':>8} {'AT evals':>9} {'driving':>9}")
    for r in rows:
        print(f"{r.scenario:<10} {r.variant:<15} {r.kernel:<6} {r.mlups:8.2f} "
              f"{r.counters['antitrapping_evals']:9d} {r.counters['driving_force_evals']:9d}")
    if len(scenarios) > 1:
        print("slowest to fastest (opt_full):", ", ".join(reversed(bench.scenario_ranking(rows))))
    print(f"table written to {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ternpf", description="Phase-field simulation of ternary eutectic solidification.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    # also accepted after the subcommand
    verbose = argparse.ArgumentParser(add_help=False)
    verbose.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=False):
        sp.add_argument("--config", required=config_required, help="TOML configuration file")
        sp.add_argument("--output", help="output directory")
        sp.add_argument("--blocks", type=_blocks, help="block decomposition X,Y,Z")
        sp.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override any config value")

    sim = sub.add_parser("simulate", parents=[verbose], help="initialize and run a simulation")
    common(sim, config_required=True)
    res = sub.add_parser("resume", parents=[verbose], help="continue a run from a checkpoint")
    res.add_argument("checkpoint", help="checkpoint file")
    common(res, config_required=True)
    for sp in (sim, res):
        sp.add_argument("--steps", type=int, help="number of time steps to run")
        sp.add_argument("--threads", type=int, help="worker threads")
        sp.add_argument("--variant", choices=[v.value for v in KernelVariant])
        sp.add_argument("--checkpoint-every", type=int)
        sp.add_argument("--mesh-every", type=int)
        sp.add_argument("--ratio", type=float, help="mesh coarsening ratio in (0, 1]")
        sp.set_defaults(func=cmd_simulate if sp is sim else cmd_resume)

    mex = sub.add_parser("mesh-export", parents=[verbose], help="write per-phase PLY meshes from a checkpoint")
    mex.add_argument("checkpoint", help="checkpoint file")
    common(mex)
    mex.add_argument("--ratio", type=float, help="coarsening ratio in (0, 1], default 1")
    mex.set_defaults(func=cmd_mesh_export)

    ben = sub.add_parser("benchmark", parents=[verbose], help="time the kernels on preset blocks")
    ben.add_argument("--scenario", choices=SCENARIOS + ("all",), default="all")
    ben.add_argument("--block-size", type=int, default=60)
    ben.add_argument("--variant", help="comma-separated kernel variants (default: all)")
    ben.add_argument("--reps", type=int, default=5)
    ben.add_argument("--seed", type=int, default=0)
    ben.add_argument("--output", help="directory for benchmark.csv")
    ben.set_defaults(func=cmd_benchmark)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, CheckpointFormatError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFault, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, StitchingError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
