"""Nemytskii drift and diffusion of the Galerkin system.

The drift is ``P^N f'(u)`` for a quartic potential ``f``. For an odd ``f'``
(``c3 = c1 = 0``, as for the double well) ``f'(u)`` is again a sine
polynomial of degree ``<= 3N``, so evaluating it on a grid with ``M_g >= 3N``
points and projecting back is exact. Even-degree terms leave the sine span
and their projection is a convergent quadrature instead. The diffusion ``P^N [g(u) w]`` multiplies by a truncated white-noise
field ``w = sum_k dbeta_k e_k`` and is evaluated on a grid of
``max(M_g, K)`` points so every retained noise mode is resolved.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft

from . import kernels
from .errors import ConfigurationError
from .spectral import SpectralField, _sine_matrix

DIFFUSION_KINDS = ("zero", "constant", "sublinear")


@dataclass(frozen=True)
class Potential:
    """Quartic ``f(xi) = c4 xi^4 + c3 xi^3 + c2 xi^2 + c1 xi + c0`` with ``c4 > 0``."""

    c4: float
    c3: float = 0.0
    c2: float = 0.0
    c1: float = 0.0
    c0: float = 0.0

    def __post_init__(self):
        coeffs = (self.c0, self.c1, self.c2, self.c3, self.c4)
        if not all(np.isfinite(c) for c in coeffs):
            raise ConfigurationError("potential coefficients must be finite")
        if not self.c4 > 0:
            raise ConfigurationError(f"leading coefficient c4 must be positive, got {self.c4}")

    @classmethod
    def double_well(cls):
        """``f = (xi^2 - 1)^2 / 4``, so ``f'(xi) = xi^3 - xi``."""
        return cls(c4=0.25, c3=0.0, c2=-0.5, c1=0.0, c0=0.25)

    @cached_property
    def derivative(self):
        """Coefficients ``(d0, d1, d2, d3)`` of ``f'``."""
        return (float(self.c1), 2.0 * self.c2, 3.0 * self.c3, 4.0 * self.c4)

    def f(self, xi):
        xi = np.asarray(xi, dtype=np.float64)
        return (((self.c4 * xi + self.c3) * xi + self.c2) * xi + self.c1) * xi + self.c0

    def fprime(self, xi):
        return kernels.cubic_eval(np.asarray(xi, dtype=np.float64), *self.derivative)


@dataclass(frozen=True)
class DiffusionSpec:
    """Diffusion coefficient ``g``.

    ``sublinear``: ``g(xi) = sigma (1 + xi^2)^(alpha/2)`` with ``alpha`` in
    ``[0, 1)``; ``constant``: ``g = sigma``; ``zero``: no noise.
    """

    kind: str
    sigma: float = 0.0
    alpha: float = 0.0

    def __post_init__(self):
        if self.kind not in DIFFUSION_KINDS:
            raise ConfigurationError(
                f"diffusion kind must be one of {DIFFUSION_KINDS}, got {self.kind!r}")
        if not (self.sigma >= 0 and np.isfinite(self.sigma)):
            raise ConfigurationError(f"sigma must be a finite nonnegative number, got {self.sigma}")
        if not 0 <= self.alpha < 1:
            raise ConfigurationError(f"alpha must lie in [0,1), got {self.alpha}")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def constant(cls, sigma):
        return cls("constant", float(sigma))

    @classmethod
    def sublinear(cls, sigma, alpha):
        return cls("sublinear", float(sigma), float(alpha))

    @property
    def is_zero(self):
        return self.kind == "zero" or self.sigma == 0.0

    @property
    def lipschitz(self):
        return 0.0 if self.kind != "sublinear" else self.sigma * self.alpha

    def g(self, xi):
        xi = np.asarray(xi, dtype=np.float64)
        if self.kind == "zero":
            return np.zeros_like(xi)
        if self.kind == "constant":
            return np.full_like(xi, self.sigma)
        return self.sigma * np.power(1.0 + xi * xi, 0.5 * self.alpha)

    def growth_bound(self, xi):
        """Sublinear envelope ``sigma sqrt(2) (1 + |xi|^alpha)``."""
        return self.sigma * np.sqrt(2.0) * (1.0 + np.abs(xi) ** self.alpha)


def noise_on_grid(increments, L, n_grid):
    """Synthesise ``sum_k dbeta_k e_k(x_m)`` on an ``n_grid``-point DST-I grid.

    ``increments`` has shape ``(..., K)`` with ``K <= n_grid``; uses a fast
    type-I sine transform for large FFT-friendly grids and a dense product
    otherwise.
    """
    increments = np.asarray(increments, dtype=np.float64)
    K = increments.shape[-1]
    if K > n_grid:
        raise ConfigurationError(f"{K} noise modes do not fit on a {n_grid}-point grid")
    n_fft = 2 * (n_grid + 1)
    if n_grid <= 512 or scipy.fft.next_fast_len(n_fft) != n_fft:
        # small or FFT-unfriendly lengths (n_grid + 1 prime, say): a cached
        # dense product is faster than the transform
        return increments @ _sine_matrix(float(L), K, int(n_grid))
    if K < n_grid:
        pad = [(0, 0)] * (increments.ndim - 1) + [(0, n_grid - K)]
        increments = np.pad(increments, pad)
    return (0.5 * np.sqrt(2.0 / L)) * scipy.fft.dst(increments, type=1, axis=-1)


def _require_dealiased(space):
    if not space.dealiased:
        raise ConfigurationError(
            f"grid size M_g={space.M_g} violates the dealiasing requirement M_g >= 3N = {3 * space.N}")


class GalerkinOperators:
    """Batched drift/diffusion for one resolution.

    Coefficient arrays have shape ``(paths, N)``. ``pot=None`` switches the
    nonlinear drift off, leaving the linear biharmonic part only.
    """

    def __init__(self, space, pot, spec, n_noise):
        _require_dealiased(space)
        if n_noise < space.N:
            raise ConfigurationError(f"noise modes K={n_noise} must be >= N={space.N}")
        self.space = space
        self.pot = pot
        self.spec = spec
        self.K = int(n_noise)
        self.noise_grid = max(space.M_g, self.K)
        self.noise_space = space.with_grid(self.noise_grid)
        self.lambdas = np.array(space.lambdas)

    @property
    def needs_noise_grid(self):
        return self.spec.kind == "sublinear" and self.spec.sigma != 0.0

    def drift_F(self, a):
        if self.pot is None:
            return np.zeros_like(a)
        u = self.space.synthesize(a)
        return self.space.project(kernels.cubic_eval(u, *self.pot.derivative))

    def diffusion(self, a, increments, w_grid=None):
        """``P^N [g(u) w]`` for increment rows of shape ``(paths, K)``."""
        spec = self.spec
        if spec.is_zero:
            return np.zeros_like(a)
        if spec.kind == "constant":
            return spec.sigma * increments[..., :self.space.N]
        if w_grid is None:
            w_grid = noise_on_grid(increments, self.space.L, self.noise_grid)
        u = self.noise_space.synthesize(a)
        return self.noise_space.project(kernels.sublinear_product(u, w_grid, spec.sigma, spec.alpha))


def drift_F(u, pot):
    """``P^N f'(u)`` as a field on ``u``'s space."""
    _require_dealiased(u.space)
    u_grid = u.space.synthesize(u.coeffs)
    return SpectralField(u.space, u.space.project(pot.fprime(u_grid)))


def drift_full(u, pot):
    """Right-hand-side drift ``-A(A u + P^N f'(u))``; ``pot=None`` keeps the linear part."""
    lam = u.space.lambdas
    F = np.zeros_like(u.coeffs) if pot is None else drift_F(u, pot).coeffs
    return SpectralField(u.space, -lam * (lam * u.coeffs + F))


def diffusion_apply(u, dW, spec):
    """``P^N [g(u) w]`` with ``w = sum_k dbeta_k e_k`` from the increments ``dW``."""
    if dW.K < u.space.N:
        raise ConfigurationError(f"noise has K={dW.K} modes but the field has N={u.space.N}")
    space = u.space
    if spec.is_zero:
        return SpectralField(space, np.zeros(space.N))
    inc = np.asarray(dW.increments, dtype=np.float64)
    if spec.kind == "constant":
        return SpectralField(space, spec.sigma * inc[:space.N])
    fine = space.with_grid(max(space.M_g, dW.K))
    w = noise_on_grid(inc, space.L, fine.M_g)
    prod = kernels.sublinear_product(fine.synthesize(u.coeffs), w, spec.sigma, spec.alpha)
    return SpectralField(space, fine.project(prod))
