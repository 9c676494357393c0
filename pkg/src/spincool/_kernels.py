"""Compiled inner loops for the direct field path and the fused run driver.

Everything here is single-threaded (no ``parallel=True``), so results do not
depend on OMP/BLAS thread settings. ``fastmath`` only affects instruction
selection at compile time; for a fixed build the kernels are bit-reproducible
run to run, which is what the determinism contract requires.
"""

from __future__ import annotations

import numpy as np
from numba import njit

STEER_LINEAR = 0
STEER_STEPWISE = 1
STEER_TABLE = 2


@njit(cache=True, fastmath=True)
def direct_fields(jz, jperp, ratio_exact, sx, sy, sz, g, hz, out_x, out_y, out_z):
    """Local fields h_m = -dH/dS_m by direct O(N^2) summation.

    When ``ratio_exact`` (jperp == -jz/2 bitwise) a single pass over jz
    serves all three components, halving memory traffic.
    """
    n = sx.shape[0]
    if ratio_exact:
        for m in range(n):
            row = jz[m]
            ax = 0.0
            ay = 0.0
            az = 0.0
            for k in range(n):
                j = row[k]
                ax += j * sx[k]
                ay += j * sy[k]
                az += j * sz[k]
            out_x[m] = 0.5 * ax - g
            out_y[m] = 0.5 * ay
            out_z[m] = -az - hz
    else:
        for m in range(n):
            rowz = jz[m]
            rowp = jperp[m]
            ax = 0.0
            ay = 0.0
            az = 0.0
            for k in range(n):
                ax += rowp[k] * sx[k]
                ay += rowp[k] * sy[k]
                az += rowz[k] * sz[k]
            out_x[m] = -ax - g
            out_y[m] = -ay
            out_z[m] = -az - hz


@njit(cache=True)
def steering_value(kind, fdot, df, dt_step, table_t, table_f, t):
    """f(t) for the three steering kinds (must mirror feedback.f_of_t)."""
    if kind == STEER_LINEAR:
        return fdot * t
    elif kind == STEER_STEPWISE:
        return df * np.floor(t / dt_step)
    else:
        return np.interp(t, table_t, table_f)


@njit(cache=True, fastmath=True)
def rk4_feedback_chunk(
    sx,
    sy,
    sz,
    jz,
    jperp,
    ratio_exact,
    dt,
    step0,
    nsteps,
    g0,
    omega,
    hz,
    steer_kind,
    fdot,
    df,
    dt_step,
    table_t,
    table_f,
):
    """Advance ``nsteps`` RK4+renormalize steps with the ideal-detector
    feedback drive g = g0 cos(omega t) (f(t) - M_z) evaluated at every stage.

    Spins are modified in place (structure-of-arrays). Time is always derived
    from the global step counter, t = (step0 + i) * dt, never accumulated.
    Returns (max |g| over all stage evaluations, steps completed, finite flag);
    a non-finite state stops the chunk early.
    """
    n = sx.shape[0]
    hx = np.empty(n)
    hy = np.empty(n)
    hzf = np.empty(n)
    kx = np.empty((4, n))
    ky = np.empty((4, n))
    kz = np.empty((4, n))
    tx = np.empty(n)
    ty = np.empty(n)
    tz = np.empty(n)
    gmax = 0.0
    for i in range(nsteps):
        t = (step0 + i) * dt
        for stage in range(4):
            if stage == 0:
                cx, cy, cz = sx, sy, sz
                ts = t
            else:
                w = 0.5 * dt if stage < 3 else dt
                p = stage - 1
                for m in range(n):
                    tx[m] = sx[m] + w * kx[p, m]
                    ty[m] = sy[m] + w * ky[p, m]
                    tz[m] = sz[m] + w * kz[p, m]
                cx, cy, cz = tx, ty, tz
                ts = t + w
            mz = 0.0
            for m in range(n):
                mz += cz[m]
            if not np.isfinite(mz):
                return gmax, i, False
            f = steering_value(steer_kind, fdot, df, dt_step, table_t, table_f, ts)
            g = g0 * np.cos(omega * ts) * (f - mz)
            ag = abs(g)
            if ag > gmax:
                gmax = ag
            direct_fields(jz, jperp, ratio_exact, cx, cy, cz, g, hz, hx, hy, hzf)
            for m in range(n):
                kx[stage, m] = cy[m] * hzf[m] - cz[m] * hy[m]
                ky[stage, m] = cz[m] * hx[m] - cx[m] * hzf[m]
                kz[stage, m] = cx[m] * hy[m] - cy[m] * hx[m]
        c = dt / 6.0
        for m in range(n):
            vx = sx[m] + c * (kx[0, m] + 2.0 * kx[1, m] + 2.0 * kx[2, m] + kx[3, m])
            vy = sy[m] + c * (ky[0, m] + 2.0 * ky[1, m] + 2.0 * ky[2, m] + ky[3, m])
            vz = sz[m] + c * (kz[0, m] + 2.0 * kz[1, m] + 2.0 * kz[2, m] + kz[3, m])
            nrm2 = vx * vx + vy * vy + vz * vz
            if nrm2 == 0.0 or not np.isfinite(nrm2):
                return gmax, i, False
            inv = 1.0 / np.sqrt(nrm2)
            sx[m] = vx * inv
            sy[m] = vy * inv
            sz[m] = vz * inv
    return gmax, nsteps, True
