"""Dirichlet sine eigenbasis on (0, L) and the diagonal operators built on it.

A field in the truncated space is stored by its coefficients ``a_j`` in the
L2-orthonormal basis ``e_j(x) = sqrt(2/L) sin(j pi x / L)``. The collocation
grid is the DST-I grid ``x_m = m L / (M_g + 1)``, ``m = 1..M_g``; on it the
rectangle rule with weight ``L / (M_g + 1)`` reproduces the L2 pairing of any
two sine modes of index at most ``M_g`` exactly.
"""

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .errors import ConfigurationError

SUPPORTED_P = (2, 4, 6, 8, np.inf)


@lru_cache(maxsize=64)
def _sine_matrix(L, n_modes, n_grid):
    j = np.arange(1, n_modes + 1)[:, None]
    m = np.arange(1, n_grid + 1)[None, :]
    mat = np.sqrt(2.0 / L) * np.sin(np.pi * j * m / (n_grid + 1))
    mat.setflags(write=False)
    return mat


@dataclass(frozen=True)
class SpectralSpace:
    """Truncated eigenbasis of size ``N`` with an ``M_g``-point collocation grid.

    Use :func:`build_space` for validated construction; the constructor itself
    only requires ``N <= M_g`` so that projections onto coarse spaces taken
    from a fine grid remain representable.
    """

    L: float
    N: int
    M_g: int

    def __post_init__(self):
        if not (self.L > 0 and np.isfinite(self.L)):
            raise ConfigurationError(f"domain length L must be positive, got {self.L}")
        if self.N < 1:
            raise ConfigurationError(f"truncation order N must be >= 1, got {self.N}")
        if self.M_g < self.N:
            raise ConfigurationError(f"grid size M_g={self.M_g} is smaller than N={self.N}")

    @cached_property
    def lambdas(self):
        lam = (np.arange(1, self.N + 1) * np.pi / self.L) ** 2
        lam.setflags(write=False)
        return lam

    @cached_property
    def grid(self):
        x = np.arange(1, self.M_g + 1) * (self.L / (self.M_g + 1))
        x.setflags(write=False)
        return x

    @property
    def weight(self):
        """Quadrature weight of each grid point."""
        return self.L / (self.M_g + 1)

    @property
    def dealiased(self):
        return self.M_g >= 3 * self.N

    def sine_matrix(self, n_modes=None):
        """``(n_modes, M_g)`` matrix of ``e_j(x_m)``."""
        return _sine_matrix(float(self.L), int(n_modes or self.N), int(self.M_g))

    @cached_property
    def basis(self):
        return self.sine_matrix(self.N)

    def synthesize(self, coeffs):
        """Grid values of coefficient rows, shape ``(..., N) -> (..., M_g)``."""
        return np.asarray(coeffs) @ self.basis

    def project(self, values, n_modes=None):
        """Quadrature projection of grid rows onto the first ``n_modes`` modes."""
        mat = self.basis if n_modes is None else self.sine_matrix(n_modes)
        return (np.asarray(values) @ mat.T) * self.weight

    def with_grid(self, M_g):
        return SpectralSpace(self.L, self.N, int(M_g))

    def with_modes(self, N):
        return SpectralSpace(self.L, int(N), self.M_g)


@dataclass(frozen=True, eq=False)
class SpectralField:
    space: SpectralSpace
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.float64)
        if c.shape != (self.space.N,):
            raise ConfigurationError(
                f"expected {self.space.N} coefficients, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ConfigurationError("spectral coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    def __add__(self, other):
        _check_same(self, other)
        return SpectralField(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other):
        _check_same(self, other)
        return SpectralField(self.space, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return SpectralField(self.space, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def padded(self, N):
        """Zero-padded or truncated copy with ``N`` modes on the same grid."""
        out = np.zeros(N)
        n = min(N, self.space.N)
        out[:n] = self.coeffs[:n]
        space = self.space.with_modes(N) if N <= self.space.M_g else SpectralSpace(
            self.space.L, N, max(N, 4 * N))
        return SpectralField(space, out)


@dataclass(frozen=True, eq=False)
class PhysicalField:
    space: SpectralSpace
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.space.M_g,):
            raise ConfigurationError(
                f"expected {self.space.M_g} grid values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ConfigurationError("grid values must be finite")
        object.__setattr__(self, "values", v)


def _check_same(a, b):
    if a.space != b.space:
        raise ConfigurationError("fields live on different spectral spaces")


def build_space(L, N, M_g=None):
    """Validated :class:`SpectralSpace`; ``M_g`` defaults to ``4 N``.

    Raises :class:`ConfigurationError` when ``M_g < 3 N``: cubic products of
    the first ``N`` modes reach mode ``3 N`` and must not alias.
    """
    if not L > 0:
        raise ConfigurationError(f"domain length L must be positive, got {L}")
    if int(N) != N or N < 1:
        raise ConfigurationError(f"truncation order N must be a positive integer, got {N}")
    N = int(N)
    if M_g is None:
        M_g = 4 * N
    if M_g < 3 * N:
        raise ConfigurationError(
            f"grid size M_g={M_g} violates the dealiasing requirement M_g >= 3N = {3 * N}")
    return SpectralSpace(float(L), N, int(M_g))


def eigenfunction_values(space, j):
    if not 1 <= j <= space.M_g:
        raise ConfigurationError(f"mode index {j} outside 1..{space.M_g}")
    vals = np.sqrt(2.0 / space.L) * np.sin(j * np.pi * space.grid / space.L)
    return PhysicalField(space, vals)


def to_physical(v):
    return PhysicalField(v.space, v.space.synthesize(v.coeffs))


def to_spectral(u, N):
    """L2 projection of grid samples onto the first ``N`` sine modes."""
    space = u.space
    if N > space.M_g:
        raise ConfigurationError(f"cannot project onto N={N} modes from {space.M_g} grid points")
    target = space if N == space.N else space.with_modes(N)
    return SpectralField(target, space.project(u.values, N))


def sobolev_norm(v, alpha):
    """``(sum_j lambda_j^alpha a_j^2)^(1/2)`` on the truncation."""
    return float(np.sqrt(np.sum(v.space.lambdas ** alpha * v.coeffs ** 2)))


def grid_lp_norm(values, space, p):
    """L^p quadrature norm of grid rows (last axis); ``p=inf`` is the grid max."""
    values = np.asarray(values)
    if p == np.inf:
        return np.max(np.abs(values), axis=-1)
    if p not in SUPPORTED_P:
        raise ConfigurationError(f"unsupported L^p exponent p={p}; use one of {SUPPORTED_P}")
    return (space.weight * np.sum(np.abs(values) ** p, axis=-1)) ** (1.0 / p)


def lp_norm(v, p):
    """L^p norm of a truncated field via grid quadrature.

    ``p = inf`` returns the largest grid value, which bounds the true
    supremum from below.
    """
    if p not in SUPPORTED_P:
        raise ConfigurationError(f"unsupported L^p exponent p={p}; use one of {SUPPORTED_P}")
    return float(grid_lp_norm(v.space.synthesize(v.coeffs), v.space, p))


def semigroup_apply(v, t):
    if t < 0:
        raise ConfigurationError(f"semigroup time must be nonnegative, got {t}")
    return SpectralField(v.space, np.exp(-v.space.lambdas ** 2 * t) * v.coeffs)


def apply_A_power(v, beta):
    return SpectralField(v.space, v.space.lambdas ** beta * v.coeffs)
