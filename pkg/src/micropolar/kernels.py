"""Per-mode spectral kernels.

Every kernel has a pure-numpy implementation and a numba ``@njit`` twin with
identical semantics.  The numba path is used when numba imports and the
environment variable ``MPS_NUMBA`` is not ``0``; ``benchmarks/bench_kernels.py``
times both.

All arrays live in the half-spectrum layout ``(N1, N2, N3//2 + 1)``; vector
fields carry a leading axis of length 3.  Wavenumber arguments are the 1-D
per-axis arrays ``k1 (N1,)``, ``k2 (N2,)``, ``k3 (N3//2+1,)``.

Symmetric tensors use the component order (11, 22, 33, 12, 13, 23); general
tensors are flattened row-major, ``T[3*i + j]``.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and os.environ.get("MPS_NUMBA", "1") != "0"

_SYM = ((0, 3, 4), (3, 1, 5), (4, 5, 2))


def _kgrid(k1, k2, k3):
    return k1[:, None, None], k2[None, :, None], k3[None, None, :]


# ---------------------------------------------------------------- numpy path


def leray_np(v, k1, k2, k3):
    a, b, c = _kgrid(k1, k2, k3)
    ksq = a * a + b * b + c * c
    inv = np.divide(1.0, ksq, out=np.zeros_like(ksq), where=ksq > 0)
    dot = (a * v[0] + b * v[1] + c * v[2]) * inv
    return np.stack([v[0] - a * dot, v[1] - b * dot, v[2] - c * dot])


def sym_tensor_div_np(t, k1, k2, k3, mask):
    a, b, c = _kgrid(k1, k2, k3)
    ks = (a, b, c)
    out = np.empty((3,) + t.shape[1:], dtype=np.complex128)
    for i in range(3):
        row = _SYM[i]
        out[i] = 1j * (ks[0] * t[row[0]] + ks[1] * t[row[1]] + ks[2] * t[row[2]]) * mask
    return out


def tensor_div_np(t, k1, k2, k3, mask):
    a, b, c = _kgrid(k1, k2, k3)
    out = np.empty((3,) + t.shape[1:], dtype=np.complex128)
    for i in range(3):
        out[i] = 1j * (a * t[3 * i] + b * t[3 * i + 1] + c * t[3 * i + 2]) * mask
    return out


def _cross_i(a, b, c, x):
    # i * (k x x)
    return 1j * np.stack([b * x[2] - c * x[1], c * x[0] - a * x[2], a * x[1] - b * x[0]])


def apply_propagator_np(v, c, coef, k1, k2, k3):
    """Exact linear micropolar update for one time increment.

    ``coef`` stacks (v_par, v_perp, couple, c_perp, c_par) per mode.
    """
    a, b, cc = _kgrid(k1, k2, k3)
    ksq = a * a + b * b + cc * cc
    inv = np.divide(1.0, ksq, out=np.zeros_like(ksq), where=ksq > 0)
    kv = (a * v[0] + b * v[1] + cc * v[2]) * inv
    kc = (a * c[0] + b * c[1] + cc * c[2]) * inv
    pv = np.stack([a * kv, b * kv, cc * kv])
    pc = np.stack([a * kc, b * kc, cc * kc])
    v_par, v_perp, couple, c_perp, c_par = coef
    v_new = v_par * pv + v_perp * (v - pv) + couple * _cross_i(a, b, cc, c)
    c_new = c_par * pc + c_perp * (c - pc) + couple * _cross_i(a, b, cc, v)
    return v_new, c_new


# ---------------------------------------------------------------- numba path

if numba is not None:

    @numba.njit(cache=True)
    def leray_nb(v, k1, k2, k3):
        out = np.empty_like(v)
        n1, n2, n3 = v.shape[1], v.shape[2], v.shape[3]
        for i in range(n1):
            for j in range(n2):
                for l in range(n3):
                    a = k1[i]
                    b = k2[j]
                    c = k3[l]
                    ksq = a * a + b * b + c * c
                    x = v[0, i, j, l]
                    y = v[1, i, j, l]
                    z = v[2, i, j, l]
                    if ksq > 0.0:
                        d = (a * x + b * y + c * z) / ksq
                        out[0, i, j, l] = x - a * d
                        out[1, i, j, l] = y - b * d
                        out[2, i, j, l] = z - c * d
                    else:
                        out[0, i, j, l] = x
                        out[1, i, j, l] = y
                        out[2, i, j, l] = z
        return out

    @numba.njit(cache=True)
    def sym_tensor_div_nb(t, k1, k2, k3, mask):
        n1, n2, n3 = t.shape[1], t.shape[2], t.shape[3]
        out = np.empty((3, n1, n2, n3), dtype=np.complex128)
        for i in range(n1):
            for j in range(n2):
                for l in range(n3):
                    m = 1j * mask[i, j, l]
                    a = k1[i]
                    b = k2[j]
                    c = k3[l]
                    t11 = t[0, i, j, l]
                    t22 = t[1, i, j, l]
                    t33 = t[2, i, j, l]
                    t12 = t[3, i, j, l]
                    t13 = t[4, i, j, l]
                    t23 = t[5, i, j, l]
                    out[0, i, j, l] = m * (a * t11 + b * t12 + c * t13)
                    out[1, i, j, l] = m * (a * t12 + b * t22 + c * t23)
                    out[2, i, j, l] = m * (a * t13 + b * t23 + c * t33)
        return out

    @numba.njit(cache=True)
    def tensor_div_nb(t, k1, k2, k3, mask):
        n1, n2, n3 = t.shape[1], t.shape[2], t.shape[3]
        out = np.empty((3, n1, n2, n3), dtype=np.complex128)
        for i in range(n1):
            for j in range(n2):
                for l in range(n3):
                    m = 1j * mask[i, j, l]
                    a = k1[i]
                    b = k2[j]
                    c = k3[l]
                    for r in range(3):
                        out[r, i, j, l] = m * (
                            a * t[3 * r, i, j, l]
                            + b * t[3 * r + 1, i, j, l]
                            + c * t[3 * r + 2, i, j, l]
                        )
        return out

    @numba.njit(cache=True)
    def apply_propagator_nb(v, c, coef, k1, k2, k3):
        v_new = np.empty_like(v)
        c_new = np.empty_like(c)
        n1, n2, n3 = v.shape[1], v.shape[2], v.shape[3]
        for i in range(n1):
            for j in range(n2):
                for l in range(n3):
                    a = k1[i]
                    b = k2[j]
                    cc = k3[l]
                    ksq = a * a + b * b + cc * cc
                    inv = 1.0 / ksq if ksq > 0.0 else 0.0
                    v0 = v[0, i, j, l]
                    v1 = v[1, i, j, l]
                    v2 = v[2, i, j, l]
                    c0 = c[0, i, j, l]
                    c1 = c[1, i, j, l]
                    c2 = c[2, i, j, l]
                    kv = (a * v0 + b * v1 + cc * v2) * inv
                    kc = (a * c0 + b * c1 + cc * c2) * inv
                    vpar = coef[0, i, j, l]
                    vperp = coef[1, i, j, l]
                    cpl = coef[2, i, j, l]
                    cperp = coef[3, i, j, l]
                    cpar = coef[4, i, j, l]
                    # i k x c and i k x v
                    jc0 = 1j * (b * c2 - cc * c1)
                    jc1 = 1j * (cc * c0 - a * c2)
                    jc2 = 1j * (a * c1 - b * c0)
                    jv0 = 1j * (b * v2 - cc * v1)
                    jv1 = 1j * (cc * v0 - a * v2)
                    jv2 = 1j * (a * v1 - b * v0)
                    p0 = a * kv
                    p1 = b * kv
                    p2 = cc * kv
                    v_new[0, i, j, l] = vpar * p0 + vperp * (v0 - p0) + cpl * jc0
                    v_new[1, i, j, l] = vpar * p1 + vperp * (v1 - p1) + cpl * jc1
                    v_new[2, i, j, l] = vpar * p2 + vperp * (v2 - p2) + cpl * jc2
                    q0 = a * kc
                    q1 = b * kc
                    q2 = cc * kc
                    c_new[0, i, j, l] = cpar * q0 + cperp * (c0 - q0) + cpl * jv0
                    c_new[1, i, j, l] = cpar * q1 + cperp * (c1 - q1) + cpl * jv1
                    c_new[2, i, j, l] = cpar * q2 + cperp * (c2 - q2) + cpl * jv2
        return v_new, c_new

    NUMBA_KERNELS = {
        "leray": leray_nb,
        "sym_tensor_div": sym_tensor_div_nb,
        "tensor_div": tensor_div_nb,
        "apply_propagator": apply_propagator_nb,
    }
else:  # pragma: no cover
    NUMBA_KERNELS = {}

NUMPY_KERNELS = {
    "leray": leray_np,
    "sym_tensor_div": sym_tensor_div_np,
    "tensor_div": tensor_div_np,
    "apply_propagator": apply_propagator_np,
}

_active = NUMBA_KERNELS if USE_NUMBA else NUMPY_KERNELS

leray = _active["leray"]
sym_tensor_div = _active["sym_tensor_div"]
tensor_div = _active["tensor_div"]
apply_propagator = _active["apply_propagator"]
