"""Shared fixtures: the symmetric model system and random admissible states."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from scipy.ndimage import uniform_filter

from ternpf.config import build_config
from ternpf.kernels import KernelParams
from ternpf.lattice import BoundarySpec, DomainSpec, build_block_grid, exchange_ghost_layers
from ternpf.thermo import ModelParams, PhaseThermo, TemperatureSchedule
from ternpf.timeloop import Simulation, StepSchedule

settings.register_profile("ternpf", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ternpf")


def model_params(**kw) -> ModelParams:
    gamma = np.ones((4, 4)) - np.eye(4)
    diff = np.array([[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 1.0]])
    args = dict(epsilon=3.0, tau=np.ones(4), gamma=gamma, diffusivity=diff)
    args.update(kw)
    return ModelParams(**args)


def phase_thermo(**kw) -> PhaseThermo:
    args = dict(
        curvature=np.ones((4, 2)),
        c_eut=np.array([[0.8, 0.1], [0.1, 0.8], [0.1, 0.1], [1 / 3, 1 / 3]]),
        slope=np.zeros((4, 2)),
        latent=np.array([10.0, 10.0, 10.0, 0.0]),
    )
    args.update(kw)
    return PhaseThermo(**args)


def project_rows(x: np.ndarray) -> np.ndarray:
    """Vectorised simplex projection along axis 0 (independent of the package)."""
    flat = x.reshape(x.shape[0], -1).T
    u = -np.sort(-flat, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    k = np.arange(1, flat.shape[1] + 1)
    rho = flat.shape[1] - 1 - np.argmax((u - css / k > 0)[:, ::-1], axis=1)
    theta = css[np.arange(len(flat)), rho] / (rho + 1)
    return np.maximum(flat - theta[:, None], 0.0).T.reshape(x.shape)


def random_state(cells, seed: int, liquid: bool = True, mu_scale: float = 0.02):
    """Smooth random admissible (phi, mu) on the global grid, shape (comp, nz, ny, nx)."""
    nx, ny, nz = cells
    rng = np.random.default_rng(seed)
    n = 4 if liquid else 3
    raw = rng.random((4, nz, ny, nx))
    raw[n:] = 0.0
    raw = np.stack([uniform_filter(r, 3, mode="wrap") for r in raw]) ** 4
    phi = np.zeros_like(raw)
    phi[:n] = project_rows(raw[:n] / raw[:n].sum(axis=0))
    mu = mu_scale * rng.standard_normal((2, nz, ny, nx))
    return phi, mu


def make_sim(cells=(16, 16, 16), blocks=(1, 1, 1), *, periodic=True, G=0.003, v=0.1, z0=8.0,
             variant="opt_full", overlap="none", threads=1, dt=None, model=None, thermo=None,
             event_log=None):
    model = model or model_params()
    thermo = thermo or phase_thermo()
    sched = TemperatureSchedule(1.0, G, v, z0)
    spec = DomainSpec(tuple(cells), 1.0, tuple(blocks))
    boundary = BoundarySpec.all_periodic() if periodic else BoundarySpec.directional((0.0, 0.0))
    grid = build_block_grid(spec, boundary)
    if dt is None:
        from ternpf.thermo import stable_dt
        dt = stable_dt(model, thermo, sched, 1.0, 1.0 + abs(G) * cells[2])
    kp = KernelParams.build(model, thermo, sched, 1.0, dt)
    return Simulation(grid, kp, boundary, StepSchedule(dt, overlap, variant=variant), threads=threads,
                      event_log=event_log)


def load_state(sim: Simulation, phi, mu) -> None:
    sim.grid.scatter("phi", phi)
    sim.grid.scatter("mu", mu)
    sim.refresh_all()


def small_config(tmp_path, **sections):
    raw = {
        "domain": {"cells": [16, 16, 24], "blocks": [1, 1, 1]},
        "temperature": {"G": 0.003, "v": 0.1, "z0": 8.0},
        "time": {"steps": 10},
        "init": {"nuclei_count": 6, "nuclei_height": 5, "relax_steps": 10, "rng_seed": 2},
        "output": {"directory": str(tmp_path / "out"), "metrics_every": 5},
    }
    for k, v in sections.items():
        raw.setdefault(k, {}).update(v)
    return raw, build_config(raw)


@pytest.fixture
def kp():
    model, thermo = model_params(), phase_thermo()
    sched = TemperatureSchedule(1.0, 0.003, 0.1, 8.0)
    return KernelParams.build(model, thermo, sched, 1.0, 0.02)


def grid_with(phi, mu, blocks=(1, 1, 1), boundary=None):
    nz, ny, nx = phi.shape[1:]
    grid = build_block_grid(DomainSpec((nx, ny, nz), 1.0, blocks), boundary)
    grid.scatter("phi", phi)
    grid.scatter("mu", mu)
    exchange_ghost_layers(grid, "phi")
    exchange_ghost_layers(grid, "mu")
    return grid


# acceptance criteria report: criterion number -> (title, passed, detail)
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}  {detail}")
