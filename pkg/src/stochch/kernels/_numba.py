"""Numba-compiled twins of the kernels in ``_numpy``."""

import math

import numpy as np
from numba import njit

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S5 = np.uint64(5)
_S6 = np.uint64(6)
_TWO_PI = 2.0 * np.pi
_INV_2_53 = 1.0 / 9007199254740992.0


@njit(cache=True, nogil=True)
def _philox_block(c0, c1, c2, c3, k0, k1):
    for r in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        n0 = (p1 >> _S32) ^ c1 ^ k0
        n1 = p1 & _MASK
        n2 = (p0 >> _S32) ^ c3 ^ k1
        n3 = p0 & _MASK
        c0, c1, c2, c3 = n0, n1, n2, n3
        if r < 9:
            k0 = (k0 + _W0) & _MASK
            k1 = (k1 + _W1) & _MASK
    return c0, c1, c2, c3


@njit(cache=True, nogil=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    n = c0.shape[0]
    o0 = np.empty(n, dtype=np.uint64)
    o1 = np.empty(n, dtype=np.uint64)
    o2 = np.empty(n, dtype=np.uint64)
    o3 = np.empty(n, dtype=np.uint64)
    kk0 = np.uint64(k0) & _MASK
    kk1 = np.uint64(k1) & _MASK
    for i in range(n):
        o0[i], o1[i], o2[i], o3[i] = _philox_block(c0[i], c1[i], c2[i], c3[i], kk0, kk1)
    return o0, o1, o2, o3


@njit(cache=True, nogil=True)
def _standard_normals(k0, k1, paths, step, n_modes):
    n_paths = paths.shape[0]
    n_pairs = (n_modes + 1) // 2
    out = np.empty((n_paths, 2 * n_pairs))
    c1 = np.uint64(step)
    c3 = np.uint64(0)
    for i in range(n_paths):
        c2 = paths[i]
        for b in range(n_pairs):
            w0, w1, w2, w3 = _philox_block(np.uint64(b), c1, c2, c3, k0, k1)
            u1 = (float(w0 >> _S5) * 67108864.0 + float(w1 >> _S6)) * _INV_2_53
            u2 = (float(w2 >> _S5) * 67108864.0 + float(w3 >> _S6)) * _INV_2_53
            r = math.sqrt(-2.0 * math.log(1.0 - u1))
            theta = _TWO_PI * u2
            out[i, 2 * b] = r * math.cos(theta)
            out[i, 2 * b + 1] = r * math.sin(theta)
    return out[:, :n_modes]


def standard_normals(seed, paths, step, n_modes):
    seed = int(seed)
    paths = np.ascontiguousarray(paths, dtype=np.uint64)
    return _standard_normals(np.uint64(seed & 0xFFFFFFFF), np.uint64((seed >> 32) & 0xFFFFFFFF),
                             paths, int(step), int(n_modes))


@njit(cache=True, nogil=True)
def _cubic_eval(u, d0, d1, d2, d3):
    flat = u.ravel()
    out = np.empty_like(flat)
    for i in range(flat.shape[0]):
        x = flat[i]
        out[i] = ((d3 * x + d2) * x + d1) * x + d0
    return out.reshape(u.shape)


def cubic_eval(u, d0, d1, d2, d3):
    return _cubic_eval(np.ascontiguousarray(u, dtype=np.float64),
                       float(d0), float(d1), float(d2), float(d3))


@njit(cache=True, nogil=True)
def _sublinear_product(u, w, sigma, half_alpha):
    # libm pow is slow; the common exponents go through sqrt instead
    fu = u.ravel()
    fw = w.ravel()
    out = np.empty_like(fu)
    n = fu.shape[0]
    if half_alpha == 0.0:
        for i in range(n):
            out[i] = sigma * fw[i]
    elif half_alpha == 0.25:
        for i in range(n):
            x = fu[i]
            out[i] = sigma * math.sqrt(math.sqrt(1.0 + x * x)) * fw[i]
    elif half_alpha == 0.5:
        for i in range(n):
            x = fu[i]
            out[i] = sigma * math.sqrt(1.0 + x * x) * fw[i]
    return out.reshape(u.shape)


_SQRT_EXPONENTS = (0.0, 0.25, 0.5)


def sublinear_product(u, w, sigma, alpha):
    half_alpha = 0.5 * float(alpha)
    if half_alpha not in _SQRT_EXPONENTS:
        # numpy's SIMD power beats a scalar pow loop (about 2x at 16 x 256)
        return sigma * np.power(1.0 + u * u, half_alpha) * w
    u = np.ascontiguousarray(u, dtype=np.float64)
    w = np.ascontiguousarray(np.broadcast_to(w, u.shape), dtype=np.float64)
    return _sublinear_product(u, w, float(sigma), half_alpha)
