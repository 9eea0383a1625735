"""Counter-based Wiener increments for the truncated cylindrical noise.

The increment of mode ``k`` on path ``p`` at step ``n`` is a pure function of
``(master_seed, p, n, k)``: a Philox4x32-10 block keyed by the 64-bit seed
with counter ``(k // 2, n, p, 0)`` gives two 53-bit uniforms, and a
Box-Muller transform turns them into the normals for modes ``k`` and
``k ^ 1``. Nothing depends on generation order, so coarse and fine runs (and
any number of worker threads) see the same Brownian path.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigurationError


@dataclass(frozen=True, eq=False)
class WienerIncrements:
    K: int
    dt: float
    increments: np.ndarray

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=np.float64)
        if self.K < 1 or inc.shape != (self.K,):
            raise ConfigurationError(f"expected {self.K} increments, got shape {inc.shape}")
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "increments", inc)


@dataclass(frozen=True)
class NoisePlan:
    master_seed: int
    K: int
    dt: float
    steps: int
    paths: int

    def __post_init__(self):
        if not 0 <= self.master_seed < 2 ** 64:
            raise ConfigurationError(f"seed must be an unsigned 64-bit integer, got {self.master_seed}")
        if self.K < 1 or self.steps < 1 or self.paths < 1:
            raise ConfigurationError("K, steps and paths must all be positive")
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")

    def block(self, paths, step):
        """Increments for several paths at one step, shape ``(len(paths), K)``."""
        paths = np.asarray(paths, dtype=np.int64)
        if paths.size and (paths.min() < 0 or paths.max() >= self.paths):
            raise ConfigurationError(f"path index outside 0..{self.paths - 1}")
        if not 0 <= step < self.steps:
            raise ConfigurationError(f"step {step} outside 0..{self.steps - 1}")
        z = kernels.standard_normals(self.master_seed, paths, step, self.K)
        return np.sqrt(self.dt) * z


def sample_increments(plan, path, step):
    inc = plan.block(np.array([path]), step)[0]
    return WienerIncrements(plan.K, plan.dt, inc)


def restrict_modes(w, K):
    """First ``K`` increments of ``w``; the coupling rule between resolutions."""
    if K > w.K:
        raise ConfigurationError(f"cannot restrict {w.K} noise modes to {K}")
    if K < 1:
        raise ConfigurationError(f"mode count must be positive, got {K}")
    return WienerIncrements(K, w.dt, w.increments[:K].copy())
