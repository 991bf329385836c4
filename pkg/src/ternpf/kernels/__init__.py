"""Cell-update kernels for the phase fields and the chemical potentials.

The numba sweeps in :mod:`.phi` and :mod:`.mu` do the work; this module adds
region classification, single-cell entry points used by the tests, and the
block-level drivers that translate counter faults into exceptions.
"""
from __future__ import annotations

import enum

import numpy as np

from ..lattice import FACES, Block
from ..thermo import LIQUID, N_PHASES, ConfigError
from .mu import mu_sweep_nb
from .params import (C_FAULT, COUNTER_NAMES, MU_LOCAL, MU_MODES, MU_NEIGHBOR, N_COUNTERS,
                     F_SHORTCUTS, S_DX, S_G, S_T0, S_V, S_Z0, KernelParams, KernelVariant,
                     counters_dict)
from .phi import phi_sweep_nb
from .simplex import NumericalFault, project4_nb, project_simplex, project_simplex_nb

__all__ = [
    "RegionTag", "classify_region", "project_simplex", "project_simplex_nb", "project4_nb", "NumericalFault",
    "SequencingError", "KernelVariant", "KernelParams", "counters_dict", "COUNTER_NAMES",
    "MU_MODES", "N_COUNTERS", "phi_update_cell", "mu_update_cell", "anti_trapping_face",
    "sweep_block_phi", "sweep_block_mu",
]


class SequencingError(RuntimeError):
    """Split mu sweeps were called out of order."""


class RegionTag(enum.Enum):
    BULK_SOLID = "bulk_solid"
    BULK_LIQUID = "bulk_liquid"
    INTERFACE_SOLID_SOLID = "interface_solid_solid"
    FRONT = "front"


def classify_region(phi_center, phi_face_neighbors) -> RegionTag:
    c = np.asarray(phi_center, dtype=np.float64)
    nb = np.asarray(phi_face_neighbors, dtype=np.float64).reshape(6, -1)
    pure = np.flatnonzero(c == 1.0)
    if pure.size == 1 and np.all(nb == c):
        return RegionTag.BULK_LIQUID if pure[0] == LIQUID else RegionTag.BULK_SOLID
    if c[LIQUID] > 0.0 or np.any(nb[:, LIQUID] > 0.0):
        return RegionTag.FRONT
    return RegionTag.INTERFACE_SOLID_SOLID


# (z, y, x) offsets of the face slots x-, x+, y-, y+, z-, z+
_FACE_OFFSETS = ((0, 0, -1), (0, 0, 1), (0, -1, 0), (0, 1, 0), (-1, 0, 0), (1, 0, 0))


NO_DUMP = np.empty((0, 1, 1, 6, 2))
NO_DUMP_PHI = np.empty((0, 1, 1, 6, N_PHASES))


def _patch_scalars(kp: KernelParams, T: float, dT_dt: float = 0.0) -> np.ndarray:
    """Scalars for a 3x3x3 patch whose centre cell (global z index 0) sits at T."""
    sc = kp.scalars.copy()
    G = sc[S_G]
    if G == 0.0:
        if dT_dt != 0.0:
            raise ConfigError("a non-zero dT/dt needs a non-zero gradient G")
        sc[S_V] = 0.0
    else:
        sc[S_V] = -dT_dt / G
    sc[S_T0] = T - G * (0.5 * sc[S_DX] - sc[S_Z0])
    return sc


def _patch(arr, ncomp, name):
    a = np.ascontiguousarray(arr, dtype=np.float64)
    if a.shape != (ncomp, 3, 3, 3):
        raise ValueError(f"{name}: expected shape ({ncomp}, 3, 3, 3), got {a.shape}")
    return a


def phi_update_cell(phi_d3c7, mu_center, T: float, kp: KernelParams, driving: bool = True):
    """Update one cell from its 7-point neighbourhood.

    ``phi_d3c7`` has shape (7, N): centre, then x-, x+, y-, y+, z-, z+.
    Returns ``(phi_new, dphi_dt)`` with the rate taken after projection.
    """
    p = np.asarray(phi_d3c7, dtype=np.float64)
    if p.shape != (7, N_PHASES):
        raise ValueError(f"expected (7, {N_PHASES}) neighbourhood, got {p.shape}")
    ps = np.zeros((N_PHASES, 3, 3, 3))
    ps[:, 1, 1, 1] = p[0]
    for f, (dz, dy, dxo) in enumerate(_FACE_OFFSETS):
        ps[:, 1 + dz, 1 + dy, 1 + dxo] = p[1 + f]
    ms = np.zeros((2, 3, 3, 3))
    ms[:, 1, 1, 1] = np.asarray(mu_center, dtype=np.float64)
    pd = np.zeros_like(ps)
    cnt = np.zeros(N_COUNTERS, dtype=np.int64)
    phi_sweep_nb(ps, ms, pd, 0, 0.0, kp.gamma, kp.tau, kp.curvature, kp.c_eut, kp.slope, kp.latent,
                 _patch_scalars(kp, T), kp.flags(KernelVariant.REFERENCE, driving=driving), cnt,
                 NO_DUMP_PHI)
    if cnt[C_FAULT]:
        raise NumericalFault("non-finite phase-field update", cell=(0, 0, 0))
    new = pd[:, 1, 1, 1].copy()
    return new, (new - p[0]) / kp.dt


def mu_update_cell(mu_patch, phi_src_patch, phi_dst_patch, T: float, dT_dt: float,
                   kp: KernelParams, mode: str = "full", mu_partial=None) -> np.ndarray:
    """Update the centre of a 3x3x3 patch (arrays indexed [comp, z, y, x]).

    Only the D3C19 entries are read.  ``mu_partial`` is the local_only result
    required by ``mode="neighbor_only"``.
    """
    ms = _patch(mu_patch, 2, "mu")
    ps = _patch(phi_src_patch, N_PHASES, "phi_src")
    pd = _patch(phi_dst_patch, N_PHASES, "phi_dst")
    m = MU_MODES[mode]
    md = np.zeros_like(ms)
    if m == MU_NEIGHBOR:
        if mu_partial is None:
            raise SequencingError("neighbor_only needs the local_only result")
        md[:, 1, 1, 1] = np.asarray(mu_partial, dtype=np.float64)
    cnt = np.zeros(N_COUNTERS, dtype=np.int64)
    mu_sweep_nb(ps, pd, ms, md, 0, 0.0, kp.curvature, kp.c_eut, kp.slope, kp.latent,
                kp.diffusivity, _patch_scalars(kp, T, dT_dt), kp.flags(KernelVariant.REFERENCE),
                m, cnt, NO_DUMP)
    if cnt[C_FAULT]:
        raise NumericalFault("non-finite chemical-potential update", cell=(0, 0, 0))
    return md[:, 1, 1, 1].copy()


def anti_trapping_face(phi_src, phi_dst, mu, face: str, kp: KernelParams, T: float,
                       shortcuts: bool = False, fast_rsqrt: bool = False) -> np.ndarray:
    """Anti-trapping flux through one face of the centre cell of a 3x3x3 patch.

    Returns the flux component along the face's axis (positive towards +axis).
    Cells outside the D3C19 neighbourhood of the two face cells are not read.
    """
    if face not in FACES:
        raise ValueError(f"unknown face {face!r}")
    ps = _patch(phi_src, N_PHASES, "phi_src")
    pd = _patch(phi_dst, N_PHASES, "phi_dst")
    ms = _patch(mu, 2, "mu")
    flags = kp.flags(KernelVariant.REFERENCE, fast_rsqrt=fast_rsqrt)
    flags[F_SHORTCUTS] = shortcuts
    dump = np.zeros((1, 1, 1, 6, 2))
    mu_sweep_nb(ps, pd, ms, np.zeros_like(ms), 0, 0.0, kp.curvature, kp.c_eut, kp.slope, kp.latent,
                kp.diffusivity, _patch_scalars(kp, T), flags, MU_NEIGHBOR,
                np.zeros(N_COUNTERS, dtype=np.int64), dump)
    return dump[0, 0, 0, FACES.index(face)].copy()


# block drivers -----------------------------------------------------------------


def _raise_fault(block: Block, cnt, what: str, step=None):
    k, j, i = (int(v) for v in cnt[C_FAULT + 1:C_FAULT + 4])
    cell = (block.origin[0] + i - 1, block.origin[1] + j - 1, block.origin[2] + k - 1)
    cnt[C_FAULT:] = 0
    at = "" if step is None else f" in step {step}"
    raise NumericalFault(f"non-finite {what}{at} at global cell (x, y, z) = {cell}", cell=cell, step=step)


def sweep_block_phi(block: Block, variant, kp: KernelParams, t: float, z_offset: int = 0,
                    driving: bool = True, step=None) -> None:
    """phi_dst <- phi-kernel(phi_src, mu_src) for every interior cell of the block.

    ``z_offset`` is the global z index of the block's first interior slice.
    """
    variant = KernelVariant.parse(variant)
    flags = kp.flags(variant, driving=driving)
    cnt = block.counters
    phi_sweep_nb(block.src("phi"), block.src("mu"), block.dst("phi"), int(z_offset), float(t),
                 kp.gamma, kp.tau, kp.curvature, kp.c_eut, kp.slope, kp.latent, kp.scalars, flags, cnt,
                 NO_DUMP_PHI)
    if cnt[C_FAULT]:
        _raise_fault(block, cnt, "phase field", step)


def sweep_block_mu(block: Block, variant, kp: KernelParams, t: float, z_offset: int = 0,
                   mode: str = "full", fast_rsqrt: bool = False, step=None) -> None:
    """mu_dst <- mu-kernel(mu_src, phi_src, phi_dst) in one of the three sweep modes."""
    variant = KernelVariant.parse(variant)
    if mode not in MU_MODES:
        raise ValueError(f"unknown mu sweep mode {mode!r}")
    m = MU_MODES[mode]
    if m == MU_NEIGHBOR and not block.mu_local_pending:
        raise SequencingError(f"neighbor_only before local_only on block {block.index}")
    if m != MU_NEIGHBOR and block.mu_local_pending:
        raise SequencingError(f"block {block.index} has an unfinished split mu sweep")
    flags = kp.flags(variant, fast_rsqrt=fast_rsqrt)
    cnt = block.counters
    mu_sweep_nb(block.src("phi"), block.dst("phi"), block.src("mu"), block.dst("mu"), int(z_offset),
                float(t), kp.curvature, kp.c_eut, kp.slope, kp.latent, kp.diffusivity, kp.scalars,
                flags, m, cnt, NO_DUMP)
    if cnt[C_FAULT]:
        block.mu_local_pending = False
        _raise_fault(block, cnt, "chemical potential", step)
    block.mu_local_pending = m == MU_LOCAL
