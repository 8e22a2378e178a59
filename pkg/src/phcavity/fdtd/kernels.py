"""Compiled leapfrog kernels for the staggered-grid update.

Array layout (all six arrays have shape ``(nx + 1, ny + 1, nz + 1)``):

* E components: real samples at ``[0:nx, 0:ny, 0:nz]``, ghost layer at the
  high index of every axis.
* H components: stored with a +1 offset, ``harr[i + 1, j + 1, k + 1]`` holds the
  sample with true index ``(i, j, k)``; the ghost layer is index 0.

Sample positions (cell = 1):

    Ex (i+1/2, j, k)      Hx (i, j+1/2, k+1/2)
    Ey (i, j+1/2, k)      Hy (i+1/2, j, k+1/2)
    Ez (i, j, k+1/2)      Hz (i+1/2, j+1/2, k)

Units: c = eps0 = mu0 = 1.
"""

import numba as nb
import numpy as np

_JIT = dict(nopython=True, cache=True, fastmath=False)


@nb.jit(**_JIT)
def update_h(ex, ey, ez, hx, hy, hz, dt, nx, ny, nz):
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                e_x = ex[i, j, k]
                e_y = ey[i, j, k]
                e_z = ez[i, j, k]
                hx[i + 1, j + 1, k + 1] -= dt * ((ez[i, j + 1, k] - e_z) - (ey[i, j, k + 1] - e_y))
                hy[i + 1, j + 1, k + 1] -= dt * ((ex[i, j, k + 1] - e_x) - (ez[i + 1, j, k] - e_z))
                hz[i + 1, j + 1, k + 1] -= dt * ((ey[i + 1, j, k] - e_y) - (ex[i, j + 1, k] - e_x))


@nb.jit(**_JIT)
def update_e(ex, ey, ez, hx, hy, hz, cx, cy, cz, nx, ny, nz):
    # cx, cy, cz hold dt / eps at the Ex, Ey, Ez sample positions
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                h_x = hx[i + 1, j + 1, k + 1]
                h_y = hy[i + 1, j + 1, k + 1]
                h_z = hz[i + 1, j + 1, k + 1]
                ex[i, j, k] += cx[i, j, k] * ((h_z - hz[i + 1, j, k + 1]) - (h_y - hy[i + 1, j + 1, k]))
                ey[i, j, k] += cy[i, j, k] * ((h_x - hx[i + 1, j + 1, k]) - (h_z - hz[i, j + 1, k + 1]))
                ez[i, j, k] += cz[i, j, k] * ((h_y - hy[i, j + 1, k + 1]) - (h_x - hx[i + 1, j, k + 1]))


# --- convolutional PML corrections -------------------------------------------
# idx: true indices inside the layer along the graded axis; b, c: recursive
# convolution coefficients indexed by the true index; psi arrays are compact
# along the graded axis (first dimension = len(idx)).

@nb.jit(**_JIT)
def pml_h_x(ey, ez, hy, hz, psi_hy, psi_hz, idx, b, c, dt, ny, nz):
    for s in range(idx.shape[0]):
        i = idx[s]
        bi = b[i]
        ci = c[i]
        for j in range(ny):
            for k in range(nz):
                psi_hy[s, j, k] = bi * psi_hy[s, j, k] + ci * (ez[i + 1, j, k] - ez[i, j, k])
                psi_hz[s, j, k] = bi * psi_hz[s, j, k] + ci * (ey[i + 1, j, k] - ey[i, j, k])
                hy[i + 1, j + 1, k + 1] += dt * psi_hy[s, j, k]
                hz[i + 1, j + 1, k + 1] -= dt * psi_hz[s, j, k]


@nb.jit(**_JIT)
def pml_h_y(ex, ez, hx, hz, psi_hx, psi_hz, idx, b, c, dt, nx, nz):
    for i in range(nx):
        for s in range(idx.shape[0]):
            j = idx[s]
            bj = b[j]
            cj = c[j]
            for k in range(nz):
                psi_hx[i, s, k] = bj * psi_hx[i, s, k] + cj * (ez[i, j + 1, k] - ez[i, j, k])
                psi_hz[i, s, k] = bj * psi_hz[i, s, k] + cj * (ex[i, j + 1, k] - ex[i, j, k])
                hx[i + 1, j + 1, k + 1] -= dt * psi_hx[i, s, k]
                hz[i + 1, j + 1, k + 1] += dt * psi_hz[i, s, k]


@nb.jit(**_JIT)
def pml_h_z(ex, ey, hx, hy, psi_hx, psi_hy, idx, b, c, dt, nx, ny):
    for i in range(nx):
        for j in range(ny):
            for s in range(idx.shape[0]):
                k = idx[s]
                psi_hx[i, j, s] = b[k] * psi_hx[i, j, s] + c[k] * (ey[i, j, k + 1] - ey[i, j, k])
                psi_hy[i, j, s] = b[k] * psi_hy[i, j, s] + c[k] * (ex[i, j, k + 1] - ex[i, j, k])
                hx[i + 1, j + 1, k + 1] += dt * psi_hx[i, j, s]
                hy[i + 1, j + 1, k + 1] -= dt * psi_hy[i, j, s]


@nb.jit(**_JIT)
def pml_e_x(ey, ez, hy, hz, psi_ey, psi_ez, idx, b, c, cy, cz, ny, nz):
    for s in range(idx.shape[0]):
        i = idx[s]
        bi = b[i]
        ci = c[i]
        for j in range(ny):
            for k in range(nz):
                psi_ey[s, j, k] = bi * psi_ey[s, j, k] + ci * (hz[i + 1, j + 1, k + 1] - hz[i, j + 1, k + 1])
                psi_ez[s, j, k] = bi * psi_ez[s, j, k] + ci * (hy[i + 1, j + 1, k + 1] - hy[i, j + 1, k + 1])
                ey[i, j, k] -= cy[i, j, k] * psi_ey[s, j, k]
                ez[i, j, k] += cz[i, j, k] * psi_ez[s, j, k]


@nb.jit(**_JIT)
def pml_e_y(ex, ez, hx, hz, psi_ex, psi_ez, idx, b, c, cx, cz, nx, nz):
    for i in range(nx):
        for s in range(idx.shape[0]):
            j = idx[s]
            bj = b[j]
            cj = c[j]
            for k in range(nz):
                psi_ex[i, s, k] = bj * psi_ex[i, s, k] + cj * (hz[i + 1, j + 1, k + 1] - hz[i + 1, j, k + 1])
                psi_ez[i, s, k] = bj * psi_ez[i, s, k] + cj * (hx[i + 1, j + 1, k + 1] - hx[i + 1, j, k + 1])
                ex[i, j, k] += cx[i, j, k] * psi_ex[i, s, k]
                ez[i, j, k] -= cz[i, j, k] * psi_ez[i, s, k]


@nb.jit(**_JIT)
def pml_e_z(ex, ey, hx, hy, psi_ex, psi_ey, idx, b, c, cx, cy, nx, ny):
    for i in range(nx):
        for j in range(ny):
            for s in range(idx.shape[0]):
                k = idx[s]
                psi_ex[i, j, s] = b[k] * psi_ex[i, j, s] + c[k] * (hy[i + 1, j + 1, k + 1] - hy[i + 1, j + 1, k])
                psi_ey[i, j, s] = b[k] * psi_ey[i, j, s] + c[k] * (hx[i + 1, j + 1, k + 1] - hx[i + 1, j + 1, k])
                ex[i, j, k] -= cx[i, j, k] * psi_ex[i, j, s]
                ey[i, j, k] += cy[i, j, k] * psi_ey[i, j, s]


@nb.jit(**_JIT)
def weighted_square_sum(arr, coef, wx, wy, wz, ox, oy, oz):
    """sum coef * |arr|^2 * wx[i] wy[j] wz[k] over the weight support.

    ``ox, oy, oz`` map weight index to array index (0 for E, 1 for H arrays).
    ``coef`` may be a zero-size array, meaning unit coefficient.
    """
    total = 0.0
    use_coef = coef.size > 0
    for i in range(wx.shape[0]):
        if wx[i] == 0.0:
            continue
        for j in range(wy.shape[0]):
            if wy[j] == 0.0:
                continue
            wij = wx[i] * wy[j]
            for k in range(wz.shape[0]):
                if wz[k] == 0.0:
                    continue
                v = arr[i + ox, j + oy, k + oz]
                sq = v.real * v.real + v.imag * v.imag
                if use_coef:
                    sq *= coef[i, j, k]
                total += wij * wz[k] * sq
    return total


@nb.jit(**_JIT)
def accumulate_phasor(acc, field, phase):
    # acc[i, j, k] += field[i, j, k] * phase over the extent of acc
    for i in range(acc.shape[0]):
        for j in range(acc.shape[1]):
            for k in range(acc.shape[2]):
                acc[i, j, k] += field[i, j, k] * phase


def max_abs(arrs):
    return max(float(np.max(np.abs(a))) for a in arrs)
