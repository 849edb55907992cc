"""Pure-numpy kernels.

The single-qubit circuits are evaluated on real Bloch vectors.  Starting from
H|0>, the Bloch vector is (1, 0, 0); RZ(a) rotates it by ``a`` about z and
RY(a) by ``a`` about y.  The measured value is the z component.
"""
import numpy as np


def _rz(x, y, a):
    c, s = np.cos(a), np.sin(a)
    return x * c - y * s, x * s + y * c


def _ry(x, z, a):
    c, s = np.cos(a), np.sin(a)
    return x * c + z * s, z * c - x * s


def _angles(u, w, b):
    # (B, d, m, L) encoding angles
    return u[:, :, None, None] * w[None] + b[None]


def _edge_values(u, w, b, theta):
    B, d = u.shape
    m = w.shape[1]
    L = w.shape[2]
    ang = _angles(u, w, b)
    x = np.ones((B, d, m))
    y = np.zeros((B, d, m))
    z = np.zeros((B, d, m))
    for ell in range(L):
        x, y = _rz(x, y, ang[..., ell])
        x, y = _rz(x, y, theta[None, :, :, ell, 1])
        x, z = _ry(x, z, theta[None, :, :, ell, 0])
    x, y = _rz(x, y, theta[None, :, :, L, 1])
    x, z = _ry(x, z, theta[None, :, :, L, 0])
    return z


def qkan_forward(u, w, b, theta):
    return _edge_values(u, w, b, theta).sum(axis=1)


def qkan_vjp(u, w, b, theta, g):
    B, d = u.shape
    m = w.shape[1]
    L = w.shape[2]
    ang = _angles(u, w, b)

    # forward sweep, keeping the Bloch vector after every rotation
    ops = []
    for ell in range(L):
        ops.append(("z", ang[..., ell], ("enc", ell)))
        ops.append(("z", theta[None, :, :, ell, 1], ("th", ell, 1)))
        ops.append(("y", theta[None, :, :, ell, 0], ("th", ell, 0)))
    ops.append(("z", theta[None, :, :, L, 1], ("th", L, 1)))
    ops.append(("y", theta[None, :, :, L, 0], ("th", L, 0)))

    x = np.ones((B, d, m))
    y = np.zeros((B, d, m))
    z = np.zeros((B, d, m))
    after = []
    for axis, a, _ in ops:
        if axis == "z":
            x, y = _rz(x, y, a)
        else:
            x, z = _ry(x, z, a)
        after.append((x, y, z))

    # reverse sweep with lambda = adjoint of the observable, seeded by g
    lx = np.zeros((B, d, m))
    ly = np.zeros((B, d, m))
    lz = np.broadcast_to(g[:, None, :], (B, d, m)).copy()
    dang = np.zeros((B, d, m, L))
    dtheta = np.zeros_like(theta)
    for k in range(len(ops) - 1, -1, -1):
        axis, a, tag = ops[k]
        rx, ry, rz = after[k]
        c, s = np.cos(a), np.sin(a)
        if axis == "z":
            dk = -lx * ry + ly * rx
            lx, ly = lx * c + ly * s, ly * c - lx * s
        else:
            dk = lx * rz - lz * rx
            lx, lz = lx * c - lz * s, lx * s + lz * c
        if tag[0] == "enc":
            dang[..., tag[1]] = dk
        else:
            dtheta[:, :, tag[1], tag[2]] = dk.sum(axis=0)

    du = (dang * w[None]).sum(axis=(2, 3))
    dw = (dang * u[:, :, None, None]).sum(axis=0)
    db = dang.sum(axis=0)
    return du, dw, db, dtheta


# ---------------------------------------------------------------------------
# multi-qubit RealAmplitudes circuit, little-endian wires, real amplitudes


def _apply_ry(psi, nq, k, a):
    # psi (B, 2**nq); a (B,) or scalar
    B = psi.shape[0]
    view = psi.reshape(B, 2 ** (nq - k - 1), 2, 2 ** k)
    c = np.cos(np.asarray(a) / 2.0).reshape(-1, 1, 1)
    s = np.sin(np.asarray(a) / 2.0).reshape(-1, 1, 1)
    a0 = view[:, :, 0, :]
    a1 = view[:, :, 1, :]
    out = np.empty_like(view)
    out[:, :, 0, :] = c * a0 - s * a1
    out[:, :, 1, :] = s * a0 + c * a1
    return out.reshape(B, -1)


def _cnot_perm(nq, control, target):
    idx = np.arange(2 ** nq)
    flip = ((idx >> control) & 1).astype(bool)
    return np.where(flip, idx ^ (1 << target), idx)


def _z_signs(nq):
    idx = np.arange(2 ** nq)
    return np.stack([1.0 - 2.0 * ((idx >> k) & 1) for k in range(nq)], axis=1)


def vqc_expect(v, angles):
    B, nq = v.shape
    depth = angles.shape[0] - 1
    psi = np.zeros((B, 2 ** nq))
    psi[:, 0] = 1.0
    for k in range(nq):
        psi = _apply_ry(psi, nq, k, v[:, k])
    for k in range(nq):
        psi = _apply_ry(psi, nq, k, angles[0, k])
    perms = [_cnot_perm(nq, k, k + 1) for k in range(nq - 1)]
    for r in range(1, depth + 1):
        for perm in perms:
            psi = psi[:, perm]
        for k in range(nq):
            psi = _apply_ry(psi, nq, k, angles[r, k])
    return (psi * psi) @ _z_signs(nq)


def vqc_vjp(v, angles, g):
    half = np.pi / 2
    dv = np.zeros_like(v)
    dangles = np.zeros_like(angles)
    nq = v.shape[1]
    for k in range(nq):
        vp = v.copy()
        vm = v.copy()
        vp[:, k] += half
        vm[:, k] -= half
        diff = vqc_expect(vp, angles) - vqc_expect(vm, angles)
        dv[:, k] = 0.5 * (diff * g).sum(axis=1)
    for r in range(angles.shape[0]):
        for k in range(nq):
            ap = angles.copy()
            am = angles.copy()
            ap[r, k] += half
            am[r, k] -= half
            diff = vqc_expect(v, ap) - vqc_expect(v, am)
            dangles[r, k] = 0.5 * (diff * g).sum()
    return dv, dangles
