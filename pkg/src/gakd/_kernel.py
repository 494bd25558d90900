"""Compiled per-row transition and rollout loops.

The public vector functions in :mod:`gakd.dynamics` implement the same model in numpy
and are used to cross-check these kernels in the test suite.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

GRAVITY_AS_PAPER = 0
GRAVITY_TANGENTIAL = 1
STEER_COUPLED = 0
STEER_YAW_ONLY = 1

# layout of the float parameter vector
P_WHEELBASE, P_MU, P_G, P_DT, P_EPS = range(5)

# offsets below this many ulps of the point's scale count as already on the plane
ON_PLANE_ULPS = 16.0
PROJECT_PASSES = 4


@njit(cache=True)
def project_xyz(x, y, z, nx, ny, nz, d):
    # repeat until the residual is at rounding level so a second call is a no-op
    norm = math.sqrt(nx * nx + ny * ny + nz * nz)
    for _ in range(PROJECT_PASSES):
        gamma = (x * nx + y * ny + z * nz + d) / norm
        if abs(gamma) <= ON_PLANE_ULPS * 2.220446049250313e-16 * (abs(x) + abs(y) + abs(z) + abs(d)):
            break
        x, y, z = x - gamma * nx, y - gamma * ny, z - gamma * nz
    return x, y, z



@njit(cache=True)
def lookup(table, origin, voxel_size, x, y, z):
    i = math.floor((x - origin[0]) / voxel_size)
    j = math.floor((y - origin[1]) / voxel_size)
    k = math.floor((z - origin[2]) / voxel_size)
    if i < 0 or j < 0 or k < 0 or i >= table.shape[0] or j >= table.shape[1] or k >= table.shape[2]:
        return -1
    return table[int(i), int(j), int(k)]


@njit(cache=True)
def _unit_tangent(x, y, z, nx, ny, nz):
    d = x * nx + y * ny + z * nz
    tx, ty, tz = x - d * nx, y - d * ny, z - d * nz
    return tx, ty, tz, math.sqrt(tx * tx + ty * ty + tz * tz)


@njit(cache=True)
def step_row(p, th, v, a, delta, normals, offsets, table, origin, voxel_size, prm, gmode, smode,
             p_out, th_out, v_out):
    """Advance one state. Returns ``(ok, face_from, face_to, face_after)``."""
    L, mu, g, dt, eps = prm[P_WHEELBASE], prm[P_MU], prm[P_G], prm[P_DT], prm[P_EPS]
    f0 = lookup(table, origin, voxel_size, p[0], p[1], p[2])
    if f0 < 0:
        return False, f0, -1, -1
    nx, ny, nz = normals[f0, 0], normals[f0, 1], normals[f0, 2]
    vn = v[0] * nx + v[1] * ny + v[2] * nz
    vtx, vty, vtz = v[0] - vn * nx, v[1] - vn * ny, v[2] - vn * nz
    speed = math.sqrt(vtx * vtx + vty * vty + vtz * vtz)

    tx, ty, tz = p[0] + vtx * dt, p[1] + vty * dt, p[2] + vtz * dt
    f1 = lookup(table, origin, voxel_size, tx, ty, tz)
    if f1 < 0:
        return False, f0, f1, -1
    mx, my, mz = normals[f1, 0], normals[f1, 1], normals[f1, 2]
    tx, ty, tz = project_xyz(tx, ty, tz, mx, my, mz, offsets[f1])
    p_out[0] = tx
    p_out[1] = ty
    p_out[2] = tz
    f2 = lookup(table, origin, voxel_size, p_out[0], p_out[1], p_out[2])

    yaw = th[0]
    if speed >= eps:
        fx, fy, fz = vtx / speed, vty / speed, vtz / speed
    else:
        hx, hy, hz, hn = _unit_tangent(math.cos(yaw), math.sin(yaw), 0.0, nx, ny, nz)
        if hn > 1e-9:
            fx, fy, fz = hx / hn, hy / hn, hz / hn
        else:
            hx, hy, hz, hn = _unit_tangent(1.0, 0.0, 0.0, nx, ny, nz)
            if hn <= 1e-9:
                hx, hy, hz, hn = _unit_tangent(0.0, 1.0, 0.0, nx, ny, nz)
            fx, fy, fz = hx / hn, hy / hn, hz / hn

    friction = 0.0 if (speed < eps and a == 0.0) else mu * g
    if gmode == GRAVITY_AS_PAPER:
        gx, gy, gz = -g * nx, -g * ny, -g * nz
    else:
        gx, gy, gz = -g * (0.0 - nz * nx), -g * (0.0 - nz * ny), -g * (1.0 - nz * nz)
    ax = a * fx - friction * fx + gx
    ay = a * fy - friction * fy + gy
    az = a * fz - friction * fz + gz
    wx, wy, wz = v[0] + ax * dt, v[1] + ay * dt, v[2] + az * dt

    dyaw = speed / L * math.tan(delta) * dt
    if smode == STEER_COUPLED:
        c, s = math.cos(dyaw), math.sin(dyaw)
        dn = (nx * wx + ny * wy + nz * wz) * (1.0 - c)
        cx, cy, cz = ny * wz - nz * wy, nz * wx - nx * wz, nx * wy - ny * wx
        wx, wy, wz = wx * c + cx * s + nx * dn, wy * c + cy * s + ny * dn, wz * c + cz * s + nz * dn
    v_out[0], v_out[1], v_out[2] = wx, wy, wz

    y2 = yaw + dyaw
    if y2 > math.pi or y2 <= -math.pi:
        y2 = math.pi - ((math.pi - y2) % (2.0 * math.pi))
    th_out[0] = y2
    th_out[1] = math.atan2(mz, math.sqrt(mx * mx + my * my))
    th_out[2] = math.atan2(my, mz)
    return f2 >= 0, f0, f1, f2


@njit(cache=True)
def step_rows(P, TH, V, A, D, normals, offsets, table, origin, voxel_size, prm, gmode, smode):
    n = P.shape[0]
    Po, THo, Vo = np.empty_like(P), np.empty_like(TH), np.empty_like(V)
    faces = np.empty((n, 3), dtype=np.int64)
    ok = np.empty(n, dtype=np.bool_)
    for r in range(n):
        good, f0, f1, f2 = step_row(P[r], TH[r], V[r], A[r], D[r], normals, offsets, table, origin,
                                    voxel_size, prm, gmode, smode, Po[r], THo[r], Vo[r])
        ok[r] = good
        faces[r, 0], faces[r, 1], faces[r, 2] = f0, f1, f2
    return Po, THo, Vo, faces, ok


@njit(cache=True)
def transition_terms(n0, n1, p, target, alpha1, alpha2):
    jx, jy, jz = p[0] - target[0], p[1] - target[1], p[2] - target[2]
    dist = math.sqrt(jx * jx + jy * jy + jz * jz)
    sigma = abs(n0[0] * jx + n0[1] * jy + n0[2] * jz)
    lam = 1.0 - abs(n0[0] * n1[0] + n0[1] * n1[1] + n0[2] * n1[2])
    lam = min(max(lam, 0.0), 1.0)  # rounding can push |n.n'| past 1
    pi = 0.5 * (sigma + lam)
    return alpha1 * dist + alpha2 * pi


@njit(cache=True)
def rollout(p0, th0, v0, controls, target, normals, offsets, table, origin, voxel_size, prm,
            gmode, smode, alpha1, alpha2, penalty):
    """Summed transition cost per control sequence; leaving the terrain adds ``penalty`` and stops."""
    K, H = controls.shape[0], controls.shape[1]
    costs = np.zeros(K)
    off = np.zeros(K, dtype=np.bool_)
    p, th, v = np.empty(3), np.empty(3), np.empty(3)
    pn, thn, vn = np.empty(3), np.empty(3), np.empty(3)
    for r in range(K):
        p[:] = p0
        th[:] = th0
        v[:] = v0
        total = 0.0
        for t in range(H):
            good, f0, f1, f2 = step_row(p, th, v, controls[r, t, 0], controls[r, t, 1], normals, offsets,
                                        table, origin, voxel_size, prm, gmode, smode, pn, thn, vn)
            if not good:
                total += penalty
                off[r] = True
                break
            total += transition_terms(normals[f0], normals[f2], pn, target, alpha1, alpha2)
            p[:] = pn
            th[:] = thn
            v[:] = vn
        costs[r] = total
    return costs, off
