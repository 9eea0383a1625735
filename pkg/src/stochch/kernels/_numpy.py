"""Pure-numpy reference implementations of the hot kernels.

Every function here has a twin in ``_numba`` with the same signature and the
same floating-point operation order, so the two backends agree to the last
bit on the integer (Philox) part and to a few ulps where libm differs.
"""

import numpy as np

PHILOX_M0 = np.uint64(0xD2511F53)
PHILOX_M1 = np.uint64(0xCD9E8D57)
PHILOX_W0 = 0x9E3779B9
PHILOX_W1 = 0xBB67AE85
MASK32 = np.uint64(0xFFFFFFFF)
SHIFT32 = np.uint64(32)

TWO_PI = 2.0 * np.pi
INV_2_53 = 1.0 / 9007199254740992.0


def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox4x32-10 block function, vectorised over counter arrays.

    Counters are uint64 arrays holding 32-bit values; the key is two python
    ints below 2**32. Returns the four output words as uint64 arrays.
    """
    c0 = np.asarray(c0, dtype=np.uint64)
    c1 = np.asarray(c1, dtype=np.uint64)
    c2 = np.asarray(c2, dtype=np.uint64)
    c3 = np.asarray(c3, dtype=np.uint64)
    k0 = int(k0) & 0xFFFFFFFF
    k1 = int(k1) & 0xFFFFFFFF
    for r in range(10):
        p0 = PHILOX_M0 * c0
        p1 = PHILOX_M1 * c2
        c0, c1, c2, c3 = (
            (p1 >> SHIFT32) ^ c1 ^ np.uint64(k0),
            p1 & MASK32,
            (p0 >> SHIFT32) ^ c3 ^ np.uint64(k1),
            p0 & MASK32,
        )
        if r < 9:
            k0 = (k0 + PHILOX_W0) & 0xFFFFFFFF
            k1 = (k1 + PHILOX_W1) & 0xFFFFFFFF
    return c0, c1, c2, c3


def standard_normals(seed, paths, step, n_modes):
    """Standard normals indexed by (seed, path, step, mode).

    Mode pair ``b`` of path ``p`` at step ``n`` comes from one Philox block
    with counter ``(b, n, p, 0)``; the two 53-bit uniforms feed one
    Box-Muller transform (cos -> mode 2b, sin -> mode 2b+1).
    """
    paths = np.asarray(paths, dtype=np.uint64)
    n_pairs = (n_modes + 1) // 2
    b = np.arange(n_pairs, dtype=np.uint64)[None, :]
    p = paths[:, None]
    shape = (paths.shape[0], n_pairs)
    c0 = np.broadcast_to(b, shape)
    c1 = np.full(shape, np.uint64(step))
    c2 = np.broadcast_to(p, shape)
    c3 = np.zeros(shape, dtype=np.uint64)
    seed = int(seed)
    w0, w1, w2, w3 = philox4x32(c0, c1, c2, c3, seed & 0xFFFFFFFF, (seed >> 32) & 0xFFFFFFFF)
    u1 = ((w0 >> np.uint64(5)).astype(np.float64) * 67108864.0
          + (w1 >> np.uint64(6)).astype(np.float64)) * INV_2_53
    u2 = ((w2 >> np.uint64(5)).astype(np.float64) * 67108864.0
          + (w3 >> np.uint64(6)).astype(np.float64)) * INV_2_53
    r = np.sqrt(-2.0 * np.log(1.0 - u1))
    theta = TWO_PI * u2
    out = np.empty((paths.shape[0], 2 * n_pairs))
    out[:, 0::2] = r * np.cos(theta)
    out[:, 1::2] = r * np.sin(theta)
    return out[:, :n_modes]


def cubic_eval(u, d0, d1, d2, d3):
    """Horner evaluation of d3*u^3 + d2*u^2 + d1*u + d0, elementwise."""
    return ((d3 * u + d2) * u + d1) * u + d0


def sublinear_product(u, w, sigma, alpha):
    """sigma * (1 + u^2)^(alpha/2) * w, elementwise."""
    return sigma * np.power(1.0 + u * u, 0.5 * alpha) * w
