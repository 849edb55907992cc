"""numba-compiled kernels; same contracts as :mod:`qkanseq.kernels._numpy`."""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def _edge_forward(u, wv, bv, th, L):
    # th: (L+1, 2) -> returns z of the final Bloch vector
    x, y, z = 1.0, 0.0, 0.0
    for ell in range(L + 1):
        if ell < L:
            a = wv[ell] * u + bv[ell]
            c, s = math.cos(a), math.sin(a)
            x, y = x * c - y * s, x * s + y * c
        a = th[ell, 1]
        c, s = math.cos(a), math.sin(a)
        x, y = x * c - y * s, x * s + y * c
        a = th[ell, 0]
        c, s = math.cos(a), math.sin(a)
        x, z = x * c + z * s, z * c - x * s
    return z


@njit(cache=True)
def qkan_forward(u, w, b, theta):
    B, d = u.shape
    m = w.shape[1]
    L = w.shape[2]
    out = np.zeros((B, m))
    for bi in range(B):
        for j in range(m):
            acc = 0.0
            for i in range(d):
                acc += _edge_forward(u[bi, i], w[i, j], b[i, j], theta[i, j], L)
            out[bi, j] = acc
    return out


@njit(cache=True)
def qkan_vjp(u, w, b, theta, g):
    B, d = u.shape
    m = w.shape[1]
    L = w.shape[2]
    nops = 3 * L + 2
    du = np.zeros((B, d))
    dw = np.zeros_like(w)
    db = np.zeros_like(b)
    dtheta = np.zeros_like(theta)
    ang = np.empty(nops)
    axis = np.empty(nops, dtype=np.int64)
    sx = np.empty(nops)
    sy = np.empty(nops)
    sz = np.empty(nops)
    for i in range(d):
        for j in range(m):
            # fixed op program for this edge: 0 = rz, 1 = ry
            for ell in range(L + 1):
                k = 3 * ell
                if ell < L:
                    axis[k] = 0
                    axis[k + 1] = 0
                    axis[k + 2] = 1
                    ang[k + 1] = theta[i, j, ell, 1]
                    ang[k + 2] = theta[i, j, ell, 0]
                else:
                    axis[k] = 0
                    axis[k + 1] = 1
                    ang[k] = theta[i, j, ell, 1]
                    ang[k + 1] = theta[i, j, ell, 0]
            for bi in range(B):
                gj = g[bi, j]
                uu = u[bi, i]
                for ell in range(L):
                    ang[3 * ell] = w[i, j, ell] * uu + b[i, j, ell]
                x, y, z = 1.0, 0.0, 0.0
                for k in range(nops):
                    c, s = math.cos(ang[k]), math.sin(ang[k])
                    if axis[k] == 0:
                        x, y = x * c - y * s, x * s + y * c
                    else:
                        x, z = x * c + z * s, z * c - x * s
                    sx[k] = x
                    sy[k] = y
                    sz[k] = z
                lx, ly, lz = 0.0, 0.0, gj
                for k in range(nops - 1, -1, -1):
                    c, s = math.cos(ang[k]), math.sin(ang[k])
                    if axis[k] == 0:
                        dk = -lx * sy[k] + ly * sx[k]
                        lx, ly = lx * c + ly * s, ly * c - lx * s
                    else:
                        dk = lx * sz[k] - lz * sx[k]
                        lx, lz = lx * c - lz * s, lx * s + lz * c
                    if k < 3 * L:
                        ell = k // 3
                        r = k - 3 * ell
                        if r == 0:
                            du[bi, i] += w[i, j, ell] * dk
                            dw[i, j, ell] += uu * dk
                            db[i, j, ell] += dk
                        elif r == 1:
                            dtheta[i, j, ell, 1] += dk
                        else:
                            dtheta[i, j, ell, 0] += dk
                    else:
                        r = k - 3 * L
                        if r == 0:
                            dtheta[i, j, L, 1] += dk
                        else:
                            dtheta[i, j, L, 0] += dk
    return du, dw, db, dtheta


@njit(cache=True)
def _ry_inplace(psi, nq, k, a):
    c = math.cos(a / 2.0)
    s = math.sin(a / 2.0)
    stride = 1 << k
    n = 1 << nq
    for base in range(n):
        if base & stride:
            continue
        a0 = psi[base]
        a1 = psi[base | stride]
        psi[base] = c * a0 - s * a1
        psi[base | stride] = s * a0 + c * a1


@njit(cache=True)
def _cnot_inplace(psi, nq, control, target):
    cm = 1 << control
    tm = 1 << target
    n = 1 << nq
    for i in range(n):
        if (i & cm) and not (i & tm):
            j = i | tm
            tmp = psi[i]
            psi[i] = psi[j]
            psi[j] = tmp


@njit(cache=True)
def _circuit(vrow, angles, psi, out):
    nq = vrow.shape[0]
    depth = angles.shape[0] - 1
    psi[:] = 0.0
    psi[0] = 1.0
    for k in range(nq):
        _ry_inplace(psi, nq, k, vrow[k])
    for k in range(nq):
        _ry_inplace(psi, nq, k, angles[0, k])
    for r in range(1, depth + 1):
        for k in range(nq - 1):
            _cnot_inplace(psi, nq, k, k + 1)
        for k in range(nq):
            _ry_inplace(psi, nq, k, angles[r, k])
    out[:] = 0.0
    for i in range(psi.shape[0]):
        p = psi[i] * psi[i]
        for k in range(nq):
            if (i >> k) & 1:
                out[k] -= p
            else:
                out[k] += p


@njit(cache=True)
def vqc_expect(v, angles):
    B, nq = v.shape
    out = np.empty((B, nq))
    psi = np.empty(1 << nq)
    row = np.empty(nq)
    for bi in range(B):
        _circuit(v[bi], angles, psi, row)
        out[bi] = row
    return out


@njit(cache=True)
def vqc_vjp(v, angles, g):
    B, nq = v.shape
    half = math.pi / 2.0
    dv = np.zeros((B, nq))
    dangles = np.zeros_like(angles)
    psi = np.empty(1 << nq)
    ep = np.empty(nq)
    em = np.empty(nq)
    vrow = np.empty(nq)
    shifted = angles.copy()
    for bi in range(B):
        vrow[:] = v[bi]
        for k in range(nq):
            vrow[k] = v[bi, k] + half
            _circuit(vrow, angles, psi, ep)
            vrow[k] = v[bi, k] - half
            _circuit(vrow, angles, psi, em)
            vrow[k] = v[bi, k]
            acc = 0.0
            for q in range(nq):
                acc += g[bi, q] * (ep[q] - em[q])
            dv[bi, k] = 0.5 * acc
        for r in range(angles.shape[0]):
            for k in range(nq):
                shifted[r, k] = angles[r, k] + half
                _circuit(vrow, shifted, psi, ep)
                shifted[r, k] = angles[r, k] - half
                _circuit(vrow, shifted, psi, em)
                shifted[r, k] = angles[r, k]
                acc = 0.0
                for q in range(nq):
                    acc += g[bi, q] * (ep[q] - em[q])
                dangles[r, k] += 0.5 * acc
    return dv, dangles
