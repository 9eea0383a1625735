"""Time stepping for the spectral Galerkin system.

All schemes treat the biharmonic part ``A^2`` exactly (``exp_euler``,
``split_yz``) or implicitly (``semi_implicit``) and the projected cubic drift
and the noise explicitly:

* ``exp_euler``:     x' = S(dt) [x - dt A F(x) + D(x, dW)]
* ``semi_implicit``: x' = [x - dt A F(x) + D(x, dW)] / (1 + dt A^2)
* ``split_yz``:      z' = S(dt) [z + D(y+z, dW)],  y' = S(dt) [y - dt A F(y+z)]

where ``F = P^N f'`` and ``D = P^N [g(.) dW]``. The ``split_yz`` scheme keeps
the random-PDE part ``y`` and the stochastic convolution ``z`` separately.

The batched engine :func:`integrate_block` advances several paths, and
optionally several resolutions, in lockstep so that they share the noise
draws and the synthesised noise field of every step.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import GalerkinOperators, noise_on_grid
from .errors import BlowUpError, ConfigurationError
from .spectral import SpectralField

log = logging.getLogger(__name__)

SCHEMES = ("exp_euler", "semi_implicit", "split_yz")

# Paths per block. Fixed so that results never depend on the thread count.
BLOCK_SIZE = 16


@dataclass(frozen=True)
class SchemeConfig:
    """Time-stepping parameters.

    ``dt`` is snapped to ``T / round(T / dt)``. ``record_every`` is the
    snapshot stride in steps; by default at least 65 equispaced snapshots
    are kept. The final time is always recorded.
    """

    dt: float
    T: float
    K: int
    scheme: str = "exp_euler"
    record_every: int = 0
    tamed: bool = False

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not (self.dt > 0 and self.T > 0):
            raise ConfigurationError(f"dt and T must be positive, got dt={self.dt}, T={self.T}")
        if self.K < 1:
            raise ConfigurationError(f"noise modes K must be positive, got {self.K}")
        if self.record_every < 0:
            raise ConfigurationError("record_every must be nonnegative")
        if self.tamed:
            raise ConfigurationError("the tamed drift variant is reserved and not implemented")
        steps = max(1, int(round(self.T / self.dt)))
        object.__setattr__(self, "dt", self.T / steps)

    @property
    def steps(self):
        return max(1, int(round(self.T / self.dt)))

    @property
    def stride(self):
        return self.record_every or max(1, self.steps // 64)

    def record_steps(self):
        idx = np.arange(0, self.steps + 1, self.stride)
        if idx[-1] != self.steps:
            idx = np.append(idx, self.steps)
        return idx


@dataclass
class SolverState:
    t: float
    x: SpectralField
    y: SpectralField = None
    z: SpectralField = None

    @classmethod
    def split(cls, t, y, z):
        return cls(t, y + z, y, z)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    space: object
    config: SchemeConfig
    seed: int
    path: int

    def field(self, i):
        return SpectralField(self.space, self.states[i])


@dataclass
class BlockResult:
    """Outcome of one lockstep block: final states per resolution and path status."""

    finals: list
    alive: np.ndarray
    failures: dict = field(default_factory=dict)


class _Semigroup:
    """Diagonal ``S(dt) = exp(-dt A^2)`` applied to coefficient rows.

    Weakly damped modes (``lambda^2 dt < 1/2``) use ``v + v expm1(-lambda^2 dt)``:
    the rounding of ``exp`` near 1 is otherwise the same every step and
    accumulates linearly over long runs.
    """

    def __init__(self, lambdas, dt):
        rate = lambdas ** 2 * dt
        self.k = int(np.searchsorted(rate, 0.5))
        self.m = np.expm1(-rate[:self.k])
        self.e = np.exp(-rate[self.k:])

    def __mul__(self, v):
        k = self.k
        out = np.empty_like(v)
        head = v[..., :k]
        out[..., :k] = head + head * self.m
        out[..., k:] = v[..., k:] * self.e
        return out

    __rmul__ = __mul__


class _Gains:
    """Per-mode coefficients of one step.

    Exponential schemes integrate the frozen drift exactly over the step,
    ``(1 - e^{-a}) / lambda^2`` with ``a = lambda^2 dt``, and scale the noise
    so each mode receives the exact Ornstein-Uhlenbeck variance
    ``(1 - e^{-2a}) / (2 lambda^2)``. Both tend to the plain Euler weights
    ``dt`` and ``1`` as ``a -> 0``.
    """

    def __init__(self, scheme, lambdas, dt):
        a = lambdas ** 2 * dt
        if scheme == "semi_implicit":
            self.linear = 1.0 + a
            self.drift = dt * lambdas
            self.noise = None
        else:
            self.linear = _Semigroup(lambdas, dt)
            self.drift = -np.expm1(-a) / lambdas
            self.noise = np.sqrt(-np.expm1(-2.0 * a) / (2.0 * a))


def _advance(ops, scheme, g, x, y, z, inc, w_grid):
    if scheme == "split_yz":
        xs = y + z
        D = ops.diffusion(xs, inc, w_grid)
        F = ops.drift_F(xs)
        z = g.linear * z + g.noise * D
        y = g.linear * y - g.drift * F
        return y + z, y, z
    F = ops.drift_F(x)
    D = ops.diffusion(x, inc, w_grid)
    if scheme == "semi_implicit":
        return (x - g.drift * F + D) / g.linear, None, None
    return g.linear * x - g.drift * F + g.noise * D, None, None


def _check_dt(dW, dt):
    if not math.isclose(dW.dt, dt, rel_tol=1e-9):
        raise ConfigurationError(f"noise increments carry dt={dW.dt}, stepper uses dt={dt}")


def _single_step(scheme, s, dt, dW, pot, spec):
    _check_dt(dW, dt)
    space = s.x.space
    ops = GalerkinOperators(space, pot, spec, dW.K)
    g = _Gains(scheme, ops.lambdas, dt)
    inc = dW.increments[None, :]
    if scheme == "split_yz":
        if s.y is None or s.z is None:
            raise ConfigurationError("split_yz needs a state carrying y and z")
        x, y, z = _advance(ops, scheme, g, None, s.y.coeffs[None], s.z.coeffs[None], inc, None)
        return SolverState(s.t + dt, SpectralField(space, x[0]),
                           SpectralField(space, y[0]), SpectralField(space, z[0]))
    x, _, _ = _advance(ops, scheme, g, s.x.coeffs[None], None, None, inc, None)
    return SolverState(s.t + dt, SpectralField(space, x[0]))


def step_exp_euler(s, dt, dW, pot, spec):
    return _single_step("exp_euler", s, dt, dW, pot, spec)


def step_semi_implicit(s, dt, dW, pot, spec):
    return _single_step("semi_implicit", s, dt, dW, pot, spec)


def step_split_yz(s, dt, dW, pot, spec):
    return _single_step("split_yz", s, dt, dW, pot, spec)


def integrate_block(models, x0s, cfg, plan, paths, observer=None):
    """Advance ``paths`` for every resolution in ``models`` from ``x0s`` to ``cfg.T``.

    ``models`` is a list of :class:`GalerkinOperators`; all of them are driven
    by the same increments (restricted to each model's ``K``). ``observer``,
    if given, is called as ``observer(step, t, states)`` at every recorded
    step with the list of ``(paths, N)`` coefficient arrays. Paths that turn
    non-finite are zeroed, flagged dead in ``alive`` and their first failure
    is logged in ``failures`` as ``path -> (step, model_index, mode)``.
    """
    paths = np.asarray(paths, dtype=np.int64)
    P = paths.shape[0]
    dt = cfg.dt
    scheme = cfg.scheme
    if plan.steps != cfg.steps or not math.isclose(plan.dt, dt, rel_tol=1e-9):
        raise ConfigurationError(
            f"noise plan (dt={plan.dt}, steps={plan.steps}) does not match the scheme "
            f"(dt={dt}, steps={cfg.steps})")
    for ops in models:
        if ops.K > plan.K:
            raise ConfigurationError(f"model needs K={ops.K} noise modes, plan has {plan.K}")
    gains = [_Gains(scheme, ops.lambdas, dt) for ops in models]
    xs = [np.tile(np.asarray(x0, dtype=np.float64), (P, 1)) for x0 in x0s]
    if scheme == "split_yz":
        ys = [x.copy() for x in xs]
        zs = [np.zeros_like(x) for x in xs]
    else:
        ys = [None] * len(models)
        zs = [None] * len(models)
    alive = np.ones(P, dtype=bool)
    failures = {}
    record = np.zeros(cfg.steps + 1, dtype=bool)
    record[cfg.record_steps()] = True
    if observer is not None:
        observer(0, 0.0, xs)
    for n in range(cfg.steps):
        inc_full = plan.block(paths, n)
        w_cache = {}
        for i, ops in enumerate(models):
            inc = inc_full if ops.K == plan.K else inc_full[:, :ops.K]
            w_grid = None
            if ops.needs_noise_grid:
                key = (ops.noise_grid, ops.K)
                if key not in w_cache:
                    w_cache[key] = noise_on_grid(inc, ops.space.L, ops.noise_grid)
                w_grid = w_cache[key]
            # blow-up is detected below; silence the overflow chatter that precedes it
            with np.errstate(over="ignore", invalid="ignore"):
                xs[i], ys[i], zs[i] = _advance(ops, scheme, gains[i], xs[i], ys[i], zs[i], inc, w_grid)
            finite = np.isfinite(xs[i])
            if not finite.all():
                bad_rows = np.flatnonzero(~finite.all(axis=1))
                for r in bad_rows:
                    p = int(paths[r])
                    if alive[r]:
                        mode = int(np.flatnonzero(~finite[r])[0]) + 1
                        failures[p] = (n + 1, i, mode)
                        log.warning("path %d blew up at step %d (resolution %d, mode %d)",
                                    p, n + 1, ops.space.N, mode)
                    alive[r] = False
                    for arr in (xs[i], ys[i], zs[i]):
                        if arr is not None:
                            arr[r] = 0.0
        if observer is not None and record[n + 1]:
            observer(n + 1, (n + 1) * dt, xs)
    return BlockResult(xs, alive, failures)


def map_path_blocks(fn, n_paths, threads=1, block_size=BLOCK_SIZE):
    """Apply ``fn(path_indices)`` to consecutive fixed-size blocks, in order.

    Blocks are the unit of work for the thread pool; their composition does
    not depend on ``threads``, so every per-path number is computed
    identically whatever the pool size, and results come back in block order.
    """
    blocks = [np.arange(s, min(s + block_size, n_paths)) for s in range(0, n_paths, block_size)]
    if threads <= 1 or len(blocks) == 1:
        return [fn(b) for b in blocks]
    with _single_threaded_blas(), ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, blocks))


def _single_threaded_blas():
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        import contextlib
        return contextlib.nullcontext()
    return threadpool_limits(limits=1, user_api="blas")


def simulate(x0, cfg, pot, spec, plan, path):
    """Single trajectory from ``x0`` (already in the target space) to ``cfg.T``.

    Raises :class:`BlowUpError` naming the step and mode if the state turns
    non-finite.
    """
    space = x0.space
    if plan.K < cfg.K:
        raise ConfigurationError(f"noise plan has K={plan.K} modes, scheme needs {cfg.K}")
    ops = GalerkinOperators(space, pot, spec, cfg.K)
    times, snaps = [], []

    def observer(step, t, states):
        times.append(t)
        snaps.append(states[0][0].copy())

    res = integrate_block([ops], [x0.coeffs], cfg, plan, [path], observer)
    if not res.alive[0]:
        step, _, mode = res.failures[int(path)]
        raise BlowUpError(f"path {path}: non-finite state at step {step}, mode {mode}",
                          step=step, mode=mode, path=path)
    times[-1] = cfg.T
    return Trajectory(np.array(times), np.array(snaps), space, cfg, plan.master_seed, int(path))
