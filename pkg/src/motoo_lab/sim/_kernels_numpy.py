"""Pure-numpy versions of the Euler kernels.

Same signatures and output conventions as the compiled kernels, but
vectorized across the path batch with a Python loop over time steps.
Suitable for short horizons and for cross-checking the compiled code.
"""

from __future__ import annotations

import numpy as np

from .. import _libm, rng
from ..model import DIFF_GAUSSIAN_BUMP, DIFFUSION_FAMILIES, DRIFT_FAMILIES

_DRIFT = {f.code: f.fn for f in DRIFT_FAMILIES.values()}
_DIFF = {f.code: f.fn for f in DIFFUSION_FAMILIES.values()}
# C-library exp, as in the compiled kernels
_DIFF[DIFF_GAUSSIAN_BUMP] = lambda x, p: p[0] + p[1] * _libm.exp(-x * x)


def _draws(keys, k, sq):
    return sq * rng.normals(keys, np.uint64(k))


def _coef(dcode, dp, gcode, gp):
    f, g = _DRIFT[int(dcode)], _DIFF[int(gcode)]
    dp, gp = tuple(dp), tuple(gp)
    return (lambda x, t: f(x, t, dp)), (lambda x: g(x, gp))


def _envelope(t):
    return np.sqrt(2.0 * t * _libm.log(_libm.log(t)))


def _mark_bad(bad, alive, finite, k):
    newly = alive & ~finite
    bad[newly] = k
    return alive & finite


def primary_paths(keys, x0, n, dt, dcode, dp, gcode, gp, X, dW, bad):
    f, g = _coef(dcode, dp, gcode, gp)
    sq = np.sqrt(dt)
    x = np.full(keys.size, float(x0))
    X[:, 0] = x
    alive = np.ones(keys.size, dtype=bool)
    for k in range(n):
        w = _draws(keys, k, sq)
        x = x + f(x, k * dt) * dt + g(x) * w
        dW[:, k] = w
        X[:, k + 1] = x
        alive = _mark_bad(bad, alive, np.isfinite(x), k)


def _sq_update(z, coef_dt, r, g, wp):
    z = z + coef_dt + 2.0 * r * g * wp
    return np.maximum(z, 0.0)


def coupled_paths(keys, x0, n, dt, dcode, dp, gcode, gp, rho, delta, X, ZL, Z, ZU, dW, bad):
    f, g = _coef(dcode, dp, gcode, gp)
    sq = np.sqrt(dt)
    m = keys.size
    x = np.full(m, float(x0))
    zl = np.full(m, x0 * x0)
    zu = np.full(m, 1.0 + x0 * x0)
    X[:, 0], ZL[:, 0], Z[:, 0], ZU[:, 0] = x, zl, x * x, zu
    alive = np.ones(m, dtype=bool)
    for k in range(n):
        w = _draws(keys, k, sq)
        wp = np.where(x >= 0.0, w, -w)
        ru = np.sqrt(zu)
        gu = g(ru)
        zu = _sq_update(zu, (2.0 * rho + gu * gu) * dt, ru, gu, wp)
        rl = np.sqrt(zl)
        gl = g(rl)
        zl = _sq_update(zl, delta * gl * gl * dt, rl, gl, wp)
        x = x + f(x, k * dt) * dt + g(x) * w
        dW[:, k] = w
        X[:, k + 1], ZL[:, k + 1], Z[:, k + 1], ZU[:, k + 1] = x, zl, x * x, zu
        alive = _mark_bad(bad, alive, np.isfinite(x) & np.isfinite(zl) & np.isfinite(zu), k)


def sqbessel_paths(keys, delta, z0, n, dt, Z, clips, bad):
    sq = np.sqrt(dt)
    z = np.full(keys.size, float(z0))
    Z[:, 0] = z
    clips[:] = 0
    alive = np.ones(keys.size, dtype=bool)
    for k in range(n):
        w = _draws(keys, k, sq)
        z = z + delta * dt + 2.0 * np.sqrt(z) * w
        neg = z < 0.0
        clips += neg
        z[neg] = 0.0
        Z[:, k + 1] = z
        alive = _mark_bad(bad, alive, np.isfinite(z), k)


class _BlockMax:
    """Block maxima of |x| / envelope(t) on the grid, shared by two kernels."""

    def __init__(self, m, k_start, block_ends, block_max):
        self.k_start = k_start
        self.ends = block_ends
        self.out = block_max
        self.b = 0
        self.cur = np.zeros(m)

    def update(self, kk, t, x):
        if kk < self.k_start or self.b >= self.ends.size:
            return
        r = np.abs(x) / _envelope(t)
        self.cur = np.maximum(self.cur, r)
        if kk == self.ends[self.b]:
            self.out[:, self.b] = self.cur
            self.b += 1
            self.cur = r


def lil_stream(keys, x0, n, dt, dcode, dp, gcode, gp, k_start, block_ends, block_max, x_end, bad):
    f, g = _coef(dcode, dp, gcode, gp)
    sq = np.sqrt(dt)
    x = np.full(keys.size, float(x0))
    blocks = _BlockMax(keys.size, k_start, block_ends, block_max)
    alive = np.ones(keys.size, dtype=bool)
    for k in range(n):
        w = _draws(keys, k, sq)
        x = x + f(x, k * dt) * dt + g(x) * w
        alive = _mark_bad(bad, alive, np.isfinite(x), k)
        blocks.update(k + 1, (k + 1) * dt, x)
    x_end[:] = x


def ensemble_stream(
    keys, x0, n, dt, dcode, dp, gcode, gp, rho, delta, k1_sq, k2_sq, tol,
    k_start, block_ends, cp_steps, c_list, targets,
    block_max, violations, occ, theta_cp, theta_viol, a_at, state_end, bad,
):
    f, g = _coef(dcode, dp, gcode, gp)
    sq = np.sqrt(dt)
    m = keys.size
    x = np.full(m, float(x0))
    zl = np.full(m, x0 * x0)
    zu = np.full(m, 1.0 + x0 * x0)
    s = np.zeros(m)
    z = x * x
    viol = ((zl > z + tol) | (z > zu + tol)).astype(np.int64)
    tviol = np.zeros(m, dtype=np.int64)
    cnt = np.zeros((m, c_list.size), dtype=np.int64)
    area = np.zeros((m, c_list.size))
    a_at[:] = np.nan
    blocks = _BlockMax(m, k_start, block_ends, block_max)
    alive = np.ones(m, dtype=bool)
    j = ti = 0
    for k in range(n):
        w = _draws(keys, k, sq)
        wp = np.where(x >= 0.0, w, -w)
        rl = np.sqrt(zl)
        gl = g(rl)
        gl2 = gl * gl
        theta_prev = dt * s
        s = s + gl2
        theta = dt * s
        ind = zl[:, None] <= c_list[None, :]
        cnt += ind
        # paths may cross a theta target at different steps
        for tj in range(ti, targets.size):
            hit = (theta >= targets[tj]) & np.isnan(a_at[:, 0, tj])
            if hit.any():
                part = area + np.where(ind, (targets[tj] - theta_prev)[:, None], 0.0)
                a_at[hit, :, tj] = part[hit]
        while ti < targets.size and not np.isnan(a_at[:, 0, ti]).any():
            ti += 1
        area += np.where(ind, (gl2 * dt)[:, None], 0.0)
        zl = _sq_update(zl, delta * gl2 * dt, rl, gl, wp)
        ru = np.sqrt(zu)
        gu = g(ru)
        zu = _sq_update(zu, (2.0 * rho + gu * gu) * dt, ru, gu, wp)
        x = x + f(x, k * dt) * dt + g(x) * w
        z = x * x
        kk = k + 1
        alive = _mark_bad(bad, alive, np.isfinite(x) & np.isfinite(zl) & np.isfinite(zu), k)
        viol += (zl > z + tol) | (z > zu + tol)
        tk = kk * dt
        tviol += (theta < k1_sq * tk) | (theta > k2_sq * tk)
        if j < cp_steps.size and kk == cp_steps[j]:
            occ[:, :, j] = cnt
            theta_cp[:, j] = theta
            j += 1
        blocks.update(kk, tk, x)
    violations[:] = viol
    theta_viol[:] = tviol
    state_end[:, 0], state_end[:, 1], state_end[:, 2], state_end[:, 3] = x, zl, z, zu


def sqbessel_stream(keys, delta, z0, n, dt, k_start, c_list, targets, z_end, clips, u_sup, a_at, bad):
    sq = np.sqrt(dt)
    m = keys.size
    z = np.full(m, float(z0))
    area = np.zeros((m, c_list.size))
    best = np.zeros(m)
    clips[:] = 0
    a_at[:] = np.nan
    alive = np.ones(m, dtype=bool)
    ti = 0
    for k in range(n):
        t_prev, t_next = k * dt, (k + 1) * dt
        ind = z[:, None] <= c_list[None, :]
        while ti < targets.size and t_next >= targets[ti]:
            a_at[:, :, ti] = area + np.where(ind, targets[ti] - t_prev, 0.0)
            ti += 1
        area += np.where(ind, dt, 0.0)
        w = _draws(keys, k, sq)
        z = z + delta * dt + 2.0 * np.sqrt(z) * w
        neg = z < 0.0
        clips += neg
        z[neg] = 0.0
        alive = _mark_bad(bad, alive, np.isfinite(z), k)
        if k + 1 >= k_start:
            u = 1.0 + t_next
            best = np.maximum(best, z / (u * 2.0 * _libm.log(_libm.log(u))))
    z_end[:] = z
    u_sup[:] = best
