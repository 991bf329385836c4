"""Phase-field sweep: gradient energy, multi-obstacle and driving-force terms.

The per-face and per-cell arithmetic is written inline in the loop body.
Passing arrays to helper functions inside the cell loop costs numba a
reference-count round trip per argument, which dominated the runtime.
"""
import numpy as np
from numba import njit

from ..thermo import N_PHASES, OBSTACLE_PREFACTOR
from .params import (C_DRIVING_EVALS, C_FAULT, C_PHI_BULK_SKIPS, C_PHI_CELLS, C_PHI_FACE_EVALS,
                     C_PHI_FACE_REUSES, C_SLICE_PHI, F_DRIVE, F_SHORTCUTS, F_SLICE, F_STAGGER,
                     S_DT, S_DX, S_EPS, S_G, S_T0, S_TEUT, S_V, S_Z0)
from .simplex import project4_nb

NP = N_PHASES


@njit(cache=True, nogil=True)
def slice_temperature_nb(gz, t, T0, G, z0, v, dx):
    """Frozen temperature at the centre of global slice ``gz``."""
    return T0 + G * ((gz + 0.5) * dx - z0 - v * t)


@njit(cache=True, nogil=True)
def phi_sweep_nb(ps, ms, pd, oz, t, gam, tau, curv, c_eut, slope, latent, sc, flags, cnt, dump):
    """One explicit step of the phase fields over the block interior.

    Face slot ``f = 2 * axis + side`` (axis 0 = x, side 0 = negative face).
    If ``dump`` has a non-zero leading dimension it receives every cell's six
    face fluxes, shape (nz, ny, nx, 6, N).
    """
    nz = ps.shape[1] - 2
    ny = ps.shape[2] - 2
    nx = ps.shape[3] - 2
    eps = sc[S_EPS]
    dx = sc[S_DX]
    dt = sc[S_DT]
    t_eut = sc[S_TEUT]
    T0, G, z0, v = sc[S_T0], sc[S_G], sc[S_Z0], sc[S_V]
    shortcuts = flags[F_SHORTCUTS] != 0
    use_slice = flags[F_SLICE] != 0
    stagger = flags[F_STAGGER] != 0
    drive = flags[F_DRIVE] != 0
    dumping = dump.shape[0] > 0
    inv2dx = 1.0 / (2.0 * dx)

    c = np.empty(NP)
    nb = np.empty((6, NP))
    fl = np.empty((6, NP))
    pb = np.empty(NP)
    dd = np.empty(NP)
    g = np.empty((NP, 3))
    rhs = np.empty(NP)
    psi = np.empty(NP)
    carry = np.zeros(NP)
    ybuf = np.zeros((NP, nx + 2))
    zbuf = np.zeros((NP, ny + 2, nx + 2))
    c_hat = np.empty((NP, 2))
    offset = np.empty(NP)
    T = 0.0

    for k in range(1, nz + 1):
        if use_slice:
            T = slice_temperature_nb(oz + k - 1, t, T0, G, z0, v, dx)
            dT = T - t_eut
            for a in range(NP):
                c_hat[a, 0] = c_eut[a, 0] + slope[a, 0] * dT
                c_hat[a, 1] = c_eut[a, 1] + slope[a, 1] * dT
                offset[a] = latent[a] * dT / t_eut
            cnt[C_SLICE_PHI] += 1
        for j in range(1, ny + 1):
            for i in range(1, nx + 1):
                cnt[C_PHI_CELLS] += 1
                for a in range(NP):
                    c[a] = ps[a, k, j, i]
                    nb[0, a] = ps[a, k, j, i - 1]
                    nb[1, a] = ps[a, k, j, i + 1]
                    nb[2, a] = ps[a, k, j - 1, i]
                    nb[3, a] = ps[a, k, j + 1, i]
                    nb[4, a] = ps[a, k - 1, j, i]
                    nb[5, a] = ps[a, k + 1, j, i]
                if shortcuts:
                    bulk = False
                    for a in range(NP):
                        if c[a] == 1.0:
                            bulk = True
                    if bulk:
                        for f in range(6):
                            for a in range(NP):
                                if nb[f, a] != c[a]:
                                    bulk = False
                    if bulk:
                        # every face term and every cell term vanishes exactly
                        cnt[C_PHI_BULK_SKIPS] += 1
                        for a in range(NP):
                            pd[a, k, j, i] = c[a]
                            carry[a] = 0.0
                            ybuf[a, i] = 0.0
                            zbuf[a, j, i] = 0.0
                        if dumping:
                            for f in range(6):
                                for a in range(NP):
                                    dump[k - 1, j - 1, i - 1, f, a] = 0.0
                        continue
                if not use_slice:
                    T = slice_temperature_nb(oz + k - 1, t, T0, G, z0, v, dx)
                    dT = T - t_eut
                    for a in range(NP):
                        c_hat[a, 0] = c_eut[a, 0] + slope[a, 0] * dT
                        c_hat[a, 1] = c_eut[a, 1] + slope[a, 1] * dT
                        offset[a] = latent[a] * dT / t_eut

                # face fluxes of da/d(grad phi), always evaluated low cell -> high cell
                for f in range(6):
                    side = f & 1
                    if side == 0 and stagger:
                        reuse = True
                        if f == 0 and i > 1:
                            for a in range(NP):
                                fl[0, a] = carry[a]
                        elif f == 2 and j > 1:
                            for a in range(NP):
                                fl[2, a] = ybuf[a, i]
                        elif f == 4 and k > 1:
                            for a in range(NP):
                                fl[4, a] = zbuf[a, j, i]
                        else:
                            reuse = False
                        if reuse:
                            cnt[C_PHI_FACE_REUSES] += 1
                            continue
                    cnt[C_PHI_FACE_EVALS] += 1
                    for a in range(NP):
                        if side == 0:
                            lo = nb[f, a]
                            hi = c[a]
                        else:
                            lo = c[a]
                            hi = nb[f, a]
                        pb[a] = 0.5 * (lo + hi)
                        dd[a] = (hi - lo) / dx
                    for a in range(NP):
                        s = 0.0
                        for b in range(NP):
                            if b != a:
                                s += gam[a, b] * pb[b] * (pb[a] * dd[b] - pb[b] * dd[a])
                        fl[f, a] = -2.0 * s
                for a in range(NP):
                    carry[a] = fl[1, a]
                    ybuf[a, i] = fl[3, a]
                    zbuf[a, j, i] = fl[5, a]
                if dumping:
                    for f in range(6):
                        for a in range(NP):
                            dump[k - 1, j - 1, i - 1, f, a] = fl[f, a]

                # cell terms
                for a in range(NP):
                    for d in range(3):
                        g[a, d] = (nb[2 * d + 1, a] - nb[2 * d, a]) * inv2dx
                for a in range(NP):
                    dadphi = 0.0
                    obst = 0.0
                    for b in range(NP):
                        if b != a:
                            qg = 0.0
                            for d in range(3):
                                qg += (c[a] * g[b, d] - c[b] * g[a, d]) * g[b, d]
                            dadphi += 2.0 * gam[a, b] * qg
                            obst += gam[a, b] * c[b]
                    div = ((fl[1, a] - fl[0, a]) + (fl[3, a] - fl[2, a]) + (fl[5, a] - fl[4, a])) / dx
                    rhs[a] = -(eps * T * (dadphi - div) + (T / eps) * (OBSTACLE_PREFACTOR * obst))
                if drive:
                    cnt[C_DRIVING_EVALS] += 1
                    s2 = 0.0
                    for a in range(NP):
                        s2 += c[a] * c[a]
                    mu0 = ms[0, k, j, i]
                    mu1 = ms[1, k, j, i]
                    mean_psi = 0.0
                    for a in range(NP):
                        p = -(mu0 * mu0 / (4.0 * curv[a, 0]) + mu0 * c_hat[a, 0])
                        p -= mu1 * mu1 / (4.0 * curv[a, 1]) + mu1 * c_hat[a, 1]
                        psi[a] = p + offset[a]
                        mean_psi += (c[a] * c[a] / s2) * psi[a]
                    for a in range(NP):
                        rhs[a] -= 2.0 * c[a] / s2 * (psi[a] - mean_psi)
                mean = ((rhs[0] + rhs[1]) + (rhs[2] + rhs[3])) / NP
                u0 = c[0] + dt / (tau[0] * eps) * (rhs[0] - mean)
                u1 = c[1] + dt / (tau[1] * eps) * (rhs[1] - mean)
                u2 = c[2] + dt / (tau[2] * eps) * (rhs[2] - mean)
                u3 = c[3] + dt / (tau[3] * eps) * (rhs[3] - mean)
                if not (u0 - u0 == 0.0 and u1 - u1 == 0.0 and u2 - u2 == 0.0 and u3 - u3 == 0.0):
                    cnt[C_FAULT] = 1
                    cnt[C_FAULT + 1] = k
                    cnt[C_FAULT + 2] = j
                    cnt[C_FAULT + 3] = i
                    return
                p0, p1, p2, p3 = project4_nb(u0, u1, u2, u3)
                pd[0, k, j, i] = p0
                pd[1, k, j, i] = p1
                pd[2, k, j, i] = p2
                pd[3, k, j, i] = p3
