"""Flat parameter packs and counter slots shared by the numba kernels."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..thermo import ModelParams, PhaseThermo, TemperatureSchedule

# scalar slots
S_EPS, S_DX, S_DT, S_TEUT, S_G, S_V, S_Z0, S_ATPHI, S_ATGRAD, S_T0 = range(10)
N_SCALARS = 10

# flag slots
F_SHORTCUTS, F_SLICE, F_STAGGER, F_RSQRT, F_DRIVE, F_MOB_H, F_CONSERVATIVE = range(7)
N_FLAGS = 7

# counter slots (per block, int64)
C_PHI_CELLS = 0
C_PHI_BULK_SKIPS = 1
C_DRIVING_EVALS = 2
C_PHI_FACE_EVALS = 3
C_PHI_FACE_REUSES = 4
C_MU_CELLS = 5
C_AT_EVALS = 6
C_AT_SKIPS = 7
C_MU_FACE_EVALS = 8
C_MU_FACE_REUSES = 9
C_SLICE_PHI = 10
C_SLICE_MU = 11
C_FAULT = 12  # fault flag, followed by local (k, j, i)
N_COUNTERS = 16

COUNTER_NAMES = {
    "phi_cells": C_PHI_CELLS,
    "phi_bulk_skips": C_PHI_BULK_SKIPS,
    "driving_force_evals": C_DRIVING_EVALS,
    "phi_face_evals": C_PHI_FACE_EVALS,
    "phi_face_reuses": C_PHI_FACE_REUSES,
    "mu_cells": C_MU_CELLS,
    "antitrapping_evals": C_AT_EVALS,
    "antitrapping_skips": C_AT_SKIPS,
    "mu_face_evals": C_MU_FACE_EVALS,
    "mu_face_reuses": C_MU_FACE_REUSES,
    "slice_cache_rebuilds_phi": C_SLICE_PHI,
    "slice_cache_rebuilds_mu": C_SLICE_MU,
}

MU_FULL, MU_LOCAL, MU_NEIGHBOR = 0, 1, 2
MU_MODES = {"full": MU_FULL, "local_only": MU_LOCAL, "neighbor_only": MU_NEIGHBOR}


class KernelVariant(enum.Enum):
    REFERENCE = "reference"
    OPT_NOSHORTCUT = "opt_noshortcut"
    OPT_FULL = "opt_full"

    @property
    def slice_precompute(self) -> bool:
        return self is not KernelVariant.REFERENCE

    @property
    def staggered_buffering(self) -> bool:
        return self is not KernelVariant.REFERENCE

    @property
    def shortcuts(self) -> bool:
        return self is KernelVariant.OPT_FULL

    @classmethod
    def parse(cls, name) -> "KernelVariant":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower()
        for v in cls:
            if v.value == key or v.name.lower() == key:
                return v
        raise ValueError(f"unknown kernel variant {name!r}")


def counters_dict(arr) -> dict:
    out = {k: int(arr[i]) for k, i in COUNTER_NAMES.items()}
    out["terms_skipped"] = out["phi_bulk_skips"] + out["antitrapping_skips"]
    out["staggered_reuses"] = out["phi_face_reuses"] + out["mu_face_reuses"]
    out["slice_cache_rebuilds"] = out["slice_cache_rebuilds_phi"] + out["slice_cache_rebuilds_mu"]
    return out


@dataclass
class KernelParams:
    """Everything a sweep needs, flattened to numpy arrays."""

    gamma: np.ndarray
    tau: np.ndarray
    curvature: np.ndarray
    c_eut: np.ndarray
    slope: np.ndarray
    latent: np.ndarray
    diffusivity: np.ndarray
    scalars: np.ndarray
    mobility_h: bool = False
    conservative: bool = True

    @classmethod
    def build(cls, model: ModelParams, thermo: PhaseThermo, sched: TemperatureSchedule,
              dx: float, dt: float, scheme: str = "conservative") -> "KernelParams":
        if scheme not in ("conservative", "linearized"):
            raise ValueError(f"unknown mu scheme {scheme!r}")
        sc = np.zeros(N_SCALARS)
        sc[S_EPS] = model.epsilon
        sc[S_DX] = dx
        sc[S_DT] = dt
        sc[S_TEUT] = sched.T_eut
        sc[S_G] = sched.G
        sc[S_V] = sched.v
        sc[S_Z0] = sched.z0
        sc[S_ATPHI] = model.at_phi_tol
        sc[S_ATGRAD] = model.at_grad_tol
        sc[S_T0] = sched.T_eut  # temperature at z = z0, t = 0
        c = np.ascontiguousarray
        return cls(c(model.gamma), c(model.tau), c(thermo.curvature), c(thermo.c_eut),
                   c(thermo.slope), c(thermo.latent), c(model.diffusivity), sc,
                   model.mobility_weight == "h", scheme == "conservative")

    @property
    def dt(self) -> float:
        return float(self.scalars[S_DT])

    @property
    def dx(self) -> float:
        return float(self.scalars[S_DX])

    def flags(self, variant: KernelVariant, fast_rsqrt: bool = False, driving: bool = True) -> np.ndarray:
        f = np.zeros(N_FLAGS, dtype=np.int64)
        f[F_SHORTCUTS] = variant.shortcuts
        f[F_SLICE] = variant.slice_precompute
        f[F_STAGGER] = variant.staggered_buffering
        f[F_RSQRT] = fast_rsqrt
        f[F_DRIVE] = driving
        f[F_MOB_H] = self.mobility_h
        f[F_CONSERVATIVE] = self.conservative
        return f
