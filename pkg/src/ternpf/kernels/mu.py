"""Chemical-potential sweep: mobility flux, anti-trapping current, source terms.

Divergences are formed from face fluxes only.  A face is always evaluated
with its low-side cell first, so buffered and recomputed face values are
bitwise identical.  As in the phase-field sweep, all per-face work is inline.
"""
import math

import numpy as np
from numba import njit

from ..thermo import LIQUID, N_PHASES
from .params import (C_AT_EVALS, C_AT_SKIPS, C_FAULT, C_MU_CELLS, C_MU_FACE_EVALS, C_MU_FACE_REUSES,
                     C_SLICE_MU, F_CONSERVATIVE, F_MOB_H, F_RSQRT, F_SHORTCUTS, F_SLICE, F_STAGGER,
                     MU_FULL, MU_LOCAL, MU_NEIGHBOR, S_ATGRAD, S_ATPHI, S_DT, S_DX, S_EPS, S_G,
                     S_T0, S_TEUT, S_V, S_Z0)
from .phi import slice_temperature_nb

NP = N_PHASES
L = LIQUID
RSQRT_MAGIC = 0x5FE6EB50C7B537A9


@njit(cache=True, nogil=True)
def fast_rsqrt_nb(x, fb, ib):
    """Bit-trick 1/sqrt(x) refined by two Newton steps (relative error ~5e-6)."""
    fb[0] = x
    ib[0] = RSQRT_MAGIC - (ib[0] >> 1)
    y = fb[0]
    y = y * (1.5 - 0.5 * x * y * y)
    return y * (1.5 - 0.5 * x * y * y)


@njit(cache=True, nogil=True)
def mu_sweep_nb(ps, pd, ms, md, oz, t, curv, c_eut, slope, latent, diff, sc, flags, mode, cnt, dump):
    """One explicit step of the chemical potentials over the block interior.

    ``mode`` selects the full update, the local part (no anti-trapping
    current) or the anti-trapping correction added on top of a local result
    already in ``md``.  ``dump`` works as in the phase-field sweep, with shape
    (nz, ny, nx, 6, 2).
    """
    nz = ps.shape[1] - 2
    ny = ps.shape[2] - 2
    nx = ps.shape[3] - 2
    dx = sc[S_DX]
    dt = sc[S_DT]
    t_eut = sc[S_TEUT]
    T0, G, z0, v = sc[S_T0], sc[S_G], sc[S_Z0], sc[S_V]
    dTdt = -G * v
    tol_phi = sc[S_ATPHI]
    tol_g2 = sc[S_ATGRAD] * sc[S_ATGRAD]
    pref = 0.25 * math.pi * sc[S_EPS]
    use_slice = flags[F_SLICE] != 0
    stagger = flags[F_STAGGER] != 0
    shortcuts = flags[F_SHORTCUTS] != 0
    use_fast = flags[F_RSQRT] != 0
    mob_h = flags[F_MOB_H] != 0
    conservative = flags[F_CONSERVATIVE] != 0
    dumping = dump.shape[0] > 0
    want_m = mode != MU_NEIGHBOR
    want_j = mode != MU_LOCAL
    inv4dx = 1.0 / (4.0 * dx)

    dcoef = np.empty((NP, 2))
    for a in range(NP):
        dcoef[a, 0] = diff[a, 0] / (2.0 * curv[a, 0])
        dcoef[a, 1] = diff[a, 1] / (2.0 * curv[a, 1])
    pbar = np.empty(NP)
    grad = np.empty((NP, 3))
    fb = np.empty(1)
    ib = fb.view(np.int64)
    fl = np.empty((6, 2))
    carry = np.zeros(2)
    ybuf = np.zeros((2, nx + 2))
    zbuf = np.zeros((2, ny + 2, nx + 2))
    chat3 = np.empty((3, NP, 2))  # slices k-1, k, k+1 at t
    chatn = np.empty((NP, 2))  # slice k at t + dt

    for k in range(1, nz + 1):
        for j in range(1, ny + 1):
            for i in range(1, nx + 1):
                if not use_slice or (j == 1 and i == 1):
                    for s3 in range(4):
                        if s3 < 3:
                            T = slice_temperature_nb(oz + k - 2 + s3, t, T0, G, z0, v, dx)
                        else:
                            T = slice_temperature_nb(oz + k - 1, t + dt, T0, G, z0, v, dx)
                        dT = T - t_eut
                        for a in range(NP):
                            for q in range(2):
                                val = c_eut[a, q] + slope[a, q] * dT
                                if s3 < 3:
                                    chat3[s3, a, q] = val
                                else:
                                    chatn[a, q] = val
                    if use_slice:
                        cnt[C_SLICE_MU] += 1
                cnt[C_MU_CELLS] += 1

                for f in range(6):
                    side = f & 1
                    ax = f >> 1
                    if side == 0 and stagger:
                        reuse = True
                        if f == 0 and i > 1:
                            fl[0, 0] = carry[0]
                            fl[0, 1] = carry[1]
                        elif f == 2 and j > 1:
                            fl[2, 0] = ybuf[0, i]
                            fl[2, 1] = ybuf[1, i]
                        elif f == 4 and k > 1:
                            fl[4, 0] = zbuf[0, j, i]
                            fl[4, 1] = zbuf[1, j, i]
                        else:
                            reuse = False
                        if reuse:
                            cnt[C_MU_FACE_REUSES] += 1
                            continue
                    cnt[C_MU_FACE_EVALS] += 1
                    dk = 1 if ax == 2 else 0
                    dj = 1 if ax == 1 else 0
                    di = 1 if ax == 0 else 0
                    if side == 0:
                        lk, lj, li = k - dk, j - dj, i - di
                        sl_lo = 0 if ax == 2 else 1
                        sl_hi = 1
                    else:
                        lk, lj, li = k, j, i
                        sl_lo = 1
                        sl_hi = 2 if ax == 2 else 1
                    hk, hj, hi = lk + dk, lj + dj, li + di

                    F0 = 0.0
                    F1 = 0.0
                    if want_m:
                        m_lo0 = 0.0
                        m_lo1 = 0.0
                        m_hi0 = 0.0
                        m_hi1 = 0.0
                        if mob_h:
                            s_lo = 0.0
                            s_hi = 0.0
                            for a in range(NP):
                                s_lo += ps[a, lk, lj, li] * ps[a, lk, lj, li]
                                s_hi += ps[a, hk, hj, hi] * ps[a, hk, hj, hi]
                            for a in range(NP):
                                w_lo = ps[a, lk, lj, li] * ps[a, lk, lj, li] / s_lo
                                w_hi = ps[a, hk, hj, hi] * ps[a, hk, hj, hi] / s_hi
                                m_lo0 += w_lo * dcoef[a, 0]
                                m_lo1 += w_lo * dcoef[a, 1]
                                m_hi0 += w_hi * dcoef[a, 0]
                                m_hi1 += w_hi * dcoef[a, 1]
                        else:
                            for a in range(NP):
                                m_lo0 += ps[a, lk, lj, li] * dcoef[a, 0]
                                m_lo1 += ps[a, lk, lj, li] * dcoef[a, 1]
                                m_hi0 += ps[a, hk, hj, hi] * dcoef[a, 0]
                                m_hi1 += ps[a, hk, hj, hi] * dcoef[a, 1]
                        F0 = 0.5 * (m_lo0 + m_hi0) * (ms[0, hk, hj, hi] - ms[0, lk, lj, li]) / dx
                        F1 = 0.5 * (m_lo1 + m_hi1) * (ms[1, hk, hj, hi] - ms[1, lk, lj, li]) / dx

                    J0 = 0.0
                    J1 = 0.0
                    if want_j:
                        pl_lo = ps[L, lk, lj, li]
                        pl_hi = ps[L, hk, hj, hi]
                        if shortcuts and ((pl_lo == 0.0 and pl_hi == 0.0) or (pl_lo == 1.0 and pl_hi == 1.0)):
                            cnt[C_AT_SKIPS] += 1
                        else:
                            cnt[C_AT_EVALS] += 1
                            s = 0.0
                            for a in range(NP):
                                pbar[a] = 0.5 * (ps[a, lk, lj, li] + ps[a, hk, hj, hi])
                                s += pbar[a] * pbar[a]
                                for d in range(3):
                                    if d == ax:
                                        grad[a, d] = (ps[a, hk, hj, hi] - ps[a, lk, lj, li]) / dx
                                    elif d == 0:
                                        grad[a, d] = ((ps[a, lk, lj, li + 1] - ps[a, lk, lj, li - 1])
                                                      + (ps[a, hk, hj, hi + 1] - ps[a, hk, hj, hi - 1])) * inv4dx
                                    elif d == 1:
                                        grad[a, d] = ((ps[a, lk, lj + 1, li] - ps[a, lk, lj - 1, li])
                                                      + (ps[a, hk, hj + 1, hi] - ps[a, hk, hj - 1, hi])) * inv4dx
                                    else:
                                        grad[a, d] = ((ps[a, lk + 1, lj, li] - ps[a, lk - 1, lj, li])
                                                      + (ps[a, hk + 1, hj, hi] - ps[a, hk - 1, hj, hi])) * inv4dx
                            gl2 = grad[L, 0] * grad[L, 0] + grad[L, 1] * grad[L, 1] + grad[L, 2] * grad[L, 2]
                            if gl2 >= tol_g2 and gl2 > 0.0 and s > 0.0:
                                if use_fast:
                                    inv_nl = fast_rsqrt_nb(gl2, fb, ib)
                                else:
                                    inv_nl = 1.0 / math.sqrt(gl2)
                                h_l = pbar[L] * pbar[L] / s
                                mu0 = 0.5 * (ms[0, lk, lj, li] + ms[0, hk, hj, hi])
                                mu1 = 0.5 * (ms[1, lk, lj, li] + ms[1, hk, hj, hi])
                                cl0 = mu0 / (2.0 * curv[L, 0]) + 0.5 * (chat3[sl_lo, L, 0] + chat3[sl_hi, L, 0])
                                cl1 = mu1 / (2.0 * curv[L, 1]) + 0.5 * (chat3[sl_lo, L, 1] + chat3[sl_hi, L, 1])
                                for a in range(NP):
                                    if a == L:
                                        continue
                                    prod = pbar[a] * pbar[L]
                                    if prod < tol_phi:
                                        continue
                                    ga2 = grad[a, 0] * grad[a, 0] + grad[a, 1] * grad[a, 1] + grad[a, 2] * grad[a, 2]
                                    if ga2 < tol_g2 or ga2 == 0.0:
                                        continue
                                    rate = ((pd[a, lk, lj, li] - ps[a, lk, lj, li])
                                            + (pd[a, hk, hj, hi] - ps[a, hk, hj, hi])) / (2.0 * dt)
                                    if rate == 0.0:
                                        continue
                                    if use_fast:
                                        inv_na = fast_rsqrt_nb(ga2, fb, ib)
                                    else:
                                        inv_na = 1.0 / math.sqrt(ga2)
                                    dot = (grad[a, 0] * grad[L, 0] + grad[a, 1] * grad[L, 1]
                                           + grad[a, 2] * grad[L, 2]) * inv_na * inv_nl
                                    coef = pref * (pbar[a] * h_l / math.sqrt(prod)) * rate * dot
                                    n_ax = grad[a, ax] * inv_na
                                    ca0 = mu0 / (2.0 * curv[a, 0]) + 0.5 * (chat3[sl_lo, a, 0] + chat3[sl_hi, a, 0])
                                    ca1 = mu1 / (2.0 * curv[a, 1]) + 0.5 * (chat3[sl_lo, a, 1] + chat3[sl_hi, a, 1])
                                    J0 += coef * (cl0 - ca0) * n_ax
                                    J1 += coef * (cl1 - ca1) * n_ax
                    if mode == MU_FULL:
                        fl[f, 0] = F0 - J0
                        fl[f, 1] = F1 - J1
                    elif mode == MU_LOCAL:
                        fl[f, 0] = F0
                        fl[f, 1] = F1
                    else:
                        fl[f, 0] = J0
                        fl[f, 1] = J1
                carry[0] = fl[1, 0]
                carry[1] = fl[1, 1]
                ybuf[0, i] = fl[3, 0]
                ybuf[1, i] = fl[3, 1]
                zbuf[0, j, i] = fl[5, 0]
                zbuf[1, j, i] = fl[5, 1]
                if dumping:
                    for f in range(6):
                        dump[k - 1, j - 1, i - 1, f, 0] = fl[f, 0]
                        dump[k - 1, j - 1, i - 1, f, 1] = fl[f, 1]

                div0 = ((fl[1, 0] - fl[0, 0]) + (fl[3, 0] - fl[2, 0]) + (fl[5, 0] - fl[4, 0])) / dx
                div1 = ((fl[1, 1] - fl[0, 1]) + (fl[3, 1] - fl[2, 1]) + (fl[5, 1] - fl[4, 1])) / dx
                mu0 = ms[0, k, j, i]
                mu1 = ms[1, k, j, i]
                if conservative:
                    # chi evaluated at the new phase state; the source is the exact change of c
                    sn = 0.0
                    for a in range(NP):
                        sn += pd[a, k, j, i] * pd[a, k, j, i]
                    chi0 = 0.0
                    chi1 = 0.0
                    for a in range(NP):
                        hn = pd[a, k, j, i] * pd[a, k, j, i] / sn
                        chi0 += hn / (2.0 * curv[a, 0])
                        chi1 += hn / (2.0 * curv[a, 1])
                    if mode != MU_NEIGHBOR:
                        so = 0.0
                        for a in range(NP):
                            so += ps[a, k, j, i] * ps[a, k, j, i]
                        co0 = 0.0
                        co1 = 0.0
                        cn0 = 0.0
                        cn1 = 0.0
                        for a in range(NP):
                            ho = ps[a, k, j, i] * ps[a, k, j, i] / so
                            hn = pd[a, k, j, i] * pd[a, k, j, i] / sn
                            co0 += ho * (mu0 / (2.0 * curv[a, 0]) + chat3[1, a, 0])
                            co1 += ho * (mu1 / (2.0 * curv[a, 1]) + chat3[1, a, 1])
                            cn0 += hn * (mu0 / (2.0 * curv[a, 0]) + chatn[a, 0])
                            cn1 += hn * (mu1 / (2.0 * curv[a, 1]) + chatn[a, 1])
                        r0 = mu0 + (dt * div0 - (cn0 - co0)) / chi0
                        r1 = mu1 + (dt * div1 - (cn1 - co1)) / chi1
                    else:
                        r0 = md[0, k, j, i] + (-dt * div0) / chi0
                        r1 = md[1, k, j, i] + (-dt * div1) / chi1
                else:
                    so = 0.0
                    for a in range(NP):
                        so += ps[a, k, j, i] * ps[a, k, j, i]
                    chi0 = 0.0
                    chi1 = 0.0
                    for a in range(NP):
                        ho = ps[a, k, j, i] * ps[a, k, j, i] / so
                        chi0 += ho / (2.0 * curv[a, 0])
                        chi1 += ho / (2.0 * curv[a, 1])
                    if mode != MU_NEIGHBOR:
                        cb0 = 0.0
                        cb1 = 0.0
                        dc0 = 0.0
                        dc1 = 0.0
                        for a in range(NP):
                            ho = ps[a, k, j, i] * ps[a, k, j, i] / so
                            cb0 += ho * (mu0 / (2.0 * curv[a, 0]) + chat3[1, a, 0])
                            cb1 += ho * (mu1 / (2.0 * curv[a, 1]) + chat3[1, a, 1])
                            dc0 += ho * slope[a, 0]
                            dc1 += ho * slope[a, 1]
                        src0 = -dc0 * dTdt
                        src1 = -dc1 * dTdt
                        for b in range(NP):
                            w = 2.0 * ps[b, k, j, i] / so * (pd[b, k, j, i] - ps[b, k, j, i]) / dt
                            src0 -= w * (mu0 / (2.0 * curv[b, 0]) + chat3[1, b, 0] - cb0)
                            src1 -= w * (mu1 / (2.0 * curv[b, 1]) + chat3[1, b, 1] - cb1)
                        r0 = mu0 + dt * (src0 + div0) / chi0
                        r1 = mu1 + dt * (src1 + div1) / chi1
                    else:
                        r0 = md[0, k, j, i] + dt * (-div0) / chi0
                        r1 = md[1, k, j, i] + dt * (-div1) / chi1
                if not (r0 - r0 == 0.0 and r1 - r1 == 0.0):
                    cnt[C_FAULT] = 1
                    cnt[C_FAULT + 1] = k
                    cnt[C_FAULT + 2] = j
                    cnt[C_FAULT + 3] = i
                    return
                md[0, k, j, i] = r0
                md[1, k, j, i] = r1
