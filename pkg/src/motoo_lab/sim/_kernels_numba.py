"""Compiled Euler kernels.

Each kernel loops over a batch of paths identified by their RNG keys; the
per-path work is sequential in time and touches only that path's output
row, so any partition of the batch across threads gives identical results.
All kernels release the GIL.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .. import rng

_GOLDEN = np.uint64(rng.GOLDEN)
_MIX1 = np.uint64(rng.MIX1)
_MIX2 = np.uint64(rng.MIX2)
_ONE = np.uint64(1)
_A, _B, _C, _D, _E, _F = (np.array(c) for c in (rng.A, rng.B, rng.C, rng.D, rng.E, rng.F))

_opts = dict(nogil=True, cache=True, fastmath=False)


@njit(**_opts)
def _horner(coef, r):
    acc = coef[7]
    for i in range(6, -1, -1):
        acc = acc * r + coef[i]
    return acc


@njit(**_opts)
def ndtri(p):
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * _horner(_A, r) / _horner(_B, r)
    r = p if q < 0.0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        val = _horner(_C, r) / _horner(_D, r)
    else:
        r -= 5.0
        val = _horner(_E, r) / _horner(_F, r)
    return -val if q < 0.0 else val


@njit(**_opts)
def normal(key, k):
    z = key + (np.uint64(k) + _ONE) * _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    z = z ^ (z >> np.uint64(31))
    u = (float(z >> np.uint64(11)) + 0.5) * rng.TWO_M53
    return ndtri(u)


@njit(**_opts)
def drift(code, p, x, t):
    if code == 0:
        return 0.0
    if code == 1:
        return p[0] * x / (1.0 + x * x)
    if code == 2:
        return -p[0] * x
    return p[0] * x / (1.0 + x * x) * (1.0 + p[1] * math.sin(p[2] * t))


@njit(**_opts)
def diffusion(code, p, x):
    if code == 0:
        return p[0]
    if code == 1:
        return p[0] + p[1] / (1.0 + x * x)
    return p[0] + p[1] * math.exp(-x * x)


@njit(**_opts)
def envelope(t):
    return math.sqrt(2.0 * t * math.log(math.log(t)))


# --------------------------------------------------------------------------
# stored paths


@njit(**_opts)
def primary_paths(keys, x0, n, dt, dcode, dp, gcode, gp, X, dW, bad):
    sq = math.sqrt(dt)
    for i in range(keys.size):
        key = keys[i]
        x = x0
        X[i, 0] = x
        for k in range(n):
            w = sq * normal(key, k)
            x = x + drift(dcode, dp, x, k * dt) * dt + diffusion(gcode, gp, x) * w
            dW[i, k] = w
            X[i, k + 1] = x
            if not math.isfinite(x):
                bad[i] = k
                break


@njit(**_opts)
def coupled_paths(keys, x0, n, dt, dcode, dp, gcode, gp, rho, delta, X, ZL, Z, ZU, dW, bad):
    sq = math.sqrt(dt)
    for i in range(keys.size):
        key = keys[i]
        x = x0
        zl = x0 * x0
        zu = 1.0 + x0 * x0
        X[i, 0] = x
        ZL[i, 0] = zl
        Z[i, 0] = x * x
        ZU[i, 0] = zu
        for k in range(n):
            w = sq * normal(key, k)
            wp = w if x >= 0.0 else -w
            ru = math.sqrt(zu)
            gu = diffusion(gcode, gp, ru)
            zu = zu + (2.0 * rho + gu * gu) * dt + 2.0 * ru * gu * wp
            if zu < 0.0:
                zu = 0.0
            rl = math.sqrt(zl)
            gl = diffusion(gcode, gp, rl)
            zl = zl + delta * gl * gl * dt + 2.0 * rl * gl * wp
            if zl < 0.0:
                zl = 0.0
            x = x + drift(dcode, dp, x, k * dt) * dt + diffusion(gcode, gp, x) * w
            dW[i, k] = w
            X[i, k + 1] = x
            ZL[i, k + 1] = zl
            Z[i, k + 1] = x * x
            ZU[i, k + 1] = zu
            if not (math.isfinite(x) and math.isfinite(zl) and math.isfinite(zu)):
                bad[i] = k
                break


@njit(**_opts)
def sqbessel_paths(keys, delta, z0, n, dt, Z, clips, bad):
    sq = math.sqrt(dt)
    for i in range(keys.size):
        key = keys[i]
        z = z0
        Z[i, 0] = z
        c = 0
        for k in range(n):
            w = sq * normal(key, k)
            z = z + delta * dt + 2.0 * math.sqrt(z) * w
            if z < 0.0:
                z = 0.0
                c += 1
            Z[i, k + 1] = z
            if not math.isfinite(z):
                bad[i] = k
                break
        clips[i] = c


# --------------------------------------------------------------------------
# streamed statistics


@njit(**_opts)
def lil_stream(keys, x0, n, dt, dcode, dp, gcode, gp, k_start, block_ends, block_max, x_end, bad):
    """Dyadic block maxima of |X(t)| / sqrt(2 t log log t) for t >= k_start*dt.

    Block ``b`` covers grid points ``block_ends[b-1] .. block_ends[b]``
    (block 0 starts at ``k_start``).  The envelope is only evaluated when
    ``|X|`` could beat the block's current maximum.
    """
    sq = math.sqrt(dt)
    nb = block_ends.size
    for i in range(keys.size):
        key = keys[i]
        x = x0
        b = 0
        cur = 0.0
        env_lo = envelope(k_start * dt)
        for k in range(n):
            w = sq * normal(key, k)
            x = x + drift(dcode, dp, x, k * dt) * dt + diffusion(gcode, gp, x) * w
            kk = k + 1
            if not math.isfinite(x):
                bad[i] = k
                break
            if kk < k_start:
                continue
            ax = abs(x)
            if kk == k_start or ax > cur * env_lo:
                r = ax / envelope(kk * dt)
                if r > cur:
                    cur = r
            if kk == block_ends[b]:
                block_max[i, b] = cur
                b += 1
                if b == nb:
                    break
                # the boundary point also opens the next block
                env_lo = envelope(kk * dt)
                cur = ax / env_lo
        x_end[i] = x


@njit(**_opts)
def ensemble_stream(
    keys, x0, n, dt, dcode, dp, gcode, gp, rho, delta, k1_sq, k2_sq, tol,
    k_start, block_ends, cp_steps, c_list, targets,
    block_max, violations, occ, theta_cp, theta_viol, a_at, state_end, bad,
):
    """Coupled (X, Z_L, Z, Z_u) ensemble with every long-horizon statistic.

    ``occ[i, c, j]`` counts left grid points ``k < cp_steps[j]`` with
    ``Z_L[k] <= c_list[c]``.  ``a_at[i, c, j]`` is the theta-clock measure
    of ``{Z_L <= c}`` up to theta = ``targets[j]`` (NaN when not reached).
    """
    sq = math.sqrt(dt)
    nb = block_ends.size
    ncp = cp_steps.size
    nc = c_list.size
    nt = targets.size
    cnt = np.zeros(nc, dtype=np.int64)
    area = np.zeros(nc)
    for i in range(keys.size):
        key = keys[i]
        x = x0
        zl = x0 * x0
        zu = 1.0 + x0 * x0
        s = 0.0
        viol = 0
        tviol = 0
        b = 0
        cur = 0.0
        env_lo = envelope(k_start * dt)
        j = 0
        ti = 0
        cnt[:] = 0
        area[:] = 0.0
        for ci in range(nc):
            for tj in range(nt):
                a_at[i, ci, tj] = np.nan
        z = x * x
        if zl > z + tol or z > zu + tol:
            viol += 1
        for k in range(n):
            w = sq * normal(key, k)
            wp = w if x >= 0.0 else -w
            # left-point functionals of Z_L
            rl = math.sqrt(zl)
            gl = diffusion(gcode, gp, rl)
            gl2 = gl * gl
            theta_prev = dt * s
            s += gl2
            theta = dt * s
            for ci in range(nc):
                if zl <= c_list[ci]:
                    cnt[ci] += 1
            while ti < nt and theta >= targets[ti]:
                for ci in range(nc):
                    a_at[i, ci, ti] = area[ci] + (targets[ti] - theta_prev if zl <= c_list[ci] else 0.0)
                ti += 1
            for ci in range(nc):
                if zl <= c_list[ci]:
                    area[ci] += gl2 * dt
            # Euler updates on the shared driver
            zl = zl + delta * gl2 * dt + 2.0 * rl * gl * wp
            if zl < 0.0:
                zl = 0.0
            ru = math.sqrt(zu)
            gu = diffusion(gcode, gp, ru)
            zu = zu + (2.0 * rho + gu * gu) * dt + 2.0 * ru * gu * wp
            if zu < 0.0:
                zu = 0.0
            x = x + drift(dcode, dp, x, k * dt) * dt + diffusion(gcode, gp, x) * w
            z = x * x
            kk = k + 1
            if not (math.isfinite(x) and math.isfinite(zl) and math.isfinite(zu)):
                bad[i] = k
                break
            if zl > z + tol or z > zu + tol:
                viol += 1
            tk = kk * dt
            if theta < k1_sq * tk or theta > k2_sq * tk:
                tviol += 1
            if j < ncp and kk == cp_steps[j]:
                for ci in range(nc):
                    occ[i, ci, j] = cnt[ci]
                theta_cp[i, j] = theta
                j += 1
            if kk >= k_start and b < nb:
                ax = abs(x)
                if kk == k_start or ax > cur * env_lo:
                    r = ax / envelope(tk)
                    if r > cur:
                        cur = r
                if kk == block_ends[b]:
                    block_max[i, b] = cur
                    b += 1
                    if b < nb:
                        env_lo = envelope(tk)
                        cur = ax / env_lo
        violations[i] = viol
        theta_viol[i] = tviol
        state_end[i, 0] = x
        state_end[i, 1] = zl
        state_end[i, 2] = z
        state_end[i, 3] = zu


@njit(**_opts)
def sqbessel_stream(keys, delta, z0, n, dt, k_start, c_list, targets, z_end, clips, u_sup, a_at, bad):
    """Squared Bessel paths with the U-envelope sup and F_c accumulators.

    ``u_sup[i]`` is the max over grid points ``k >= k_start`` of
    ``Z(t) / ((1 + t) * 2 log log(1 + t))``, i.e. ``U(s) / (2 log s)`` with
    ``s = log(1 + t)``.  ``a_at[i, c, j]`` is the time spent with
    ``Z <= c_list[c]`` on ``[0, targets[j]]`` (left-point rule).
    """
    sq = math.sqrt(dt)
    nc = c_list.size
    nt = targets.size
    area = np.zeros(nc)
    for i in range(keys.size):
        key = keys[i]
        z = z0
        ncl = 0
        ti = 0
        best = 0.0
        den_lo = 0.0
        area[:] = 0.0
        for ci in range(nc):
            for tj in range(nt):
                a_at[i, ci, tj] = np.nan
        for k in range(n):
            t_prev = k * dt
            t_next = (k + 1) * dt
            while ti < nt and t_next >= targets[ti]:
                for ci in range(nc):
                    a_at[i, ci, ti] = area[ci] + (targets[ti] - t_prev if z <= c_list[ci] else 0.0)
                ti += 1
            for ci in range(nc):
                if z <= c_list[ci]:
                    area[ci] += dt
            w = sq * normal(key, k)
            z = z + delta * dt + 2.0 * math.sqrt(z) * w
            if z < 0.0:
                z = 0.0
                ncl += 1
            if not math.isfinite(z):
                bad[i] = k
                break
            kk = k + 1
            if kk >= k_start:
                # the denominator increases with t; refresh its lower bound periodically
                if kk == k_start or (kk - k_start) % 1024 == 0:
                    u = 1.0 + t_next
                    den_lo = u * 2.0 * math.log(math.log(u))
                if z > best * den_lo:
                    u = 1.0 + t_next
                    r = z / (u * 2.0 * math.log(math.log(u)))
                    if r > best:
                        best = r
        z_end[i] = z
        clips[i] = ncl
        u_sup[i] = best
