"""Monte Carlo estimators over ensembles of Galerkin paths.

Every estimator is a deterministic function of its arguments and the master
seed: paths are simulated in fixed blocks (see
:func:`stochch.integrators.map_path_blocks`), reductions run in path order,
and the counter-based noise couples runs at different resolutions.
"""

import logging
import math
import re
from dataclasses import dataclass, field, replace
from functools import reduce

import numpy as np
from scipy.special import logsumexp

from .dynamics import GalerkinOperators
from .errors import ConfigurationError, DegenerateFitError, ExclusionBudgetError
from .integrators import integrate_block, map_path_blocks
from .noise import NoisePlan
from .spectral import SpectralField, build_space, grid_lp_norm

log = logging.getLogger(__name__)

NORM_ALPHA = {"H": 0.0, "Hminus1": -1.0, "H1": 1.0}
Z95 = 1.959963984540054
EXCLUSION_BUDGET = 0.01
OVERFLOW_EXPONENT = 700.0


@dataclass
class ErrorCurve:
    norm_kind: str
    Ns: list
    N_ref: int
    errors: np.ndarray
    ci_half_widths: np.ndarray
    paths: int
    excluded_paths: int = 0
    sup_error: bool = False


@dataclass
class RateFit:
    slope: float
    intercept: float
    r_squared: float


@dataclass
class IncrementCurve:
    """Mean squared increments ``E ||X(s + lag) - X(s)||^2`` and their log-log fit."""

    lags: np.ndarray
    mean_sq_increment: np.ndarray
    ci_half_widths: np.ndarray
    paths: int
    excluded_paths: int
    fit: RateFit


@dataclass
class MomentReport:
    quantity: str
    estimate: float
    ci: float
    N: int
    paths: int
    q: int = 2
    excluded_paths: int = 0
    overflow_count: int = 0
    log_domain: bool = False
    extra: dict = field(default_factory=dict)


def mean_ci(values):
    """Sample mean and 95% CLT half-width."""
    values = np.asarray(values, dtype=np.float64)
    m = float(np.mean(values))
    if values.size < 2:
        return m, 0.0
    return m, float(Z95 * np.std(values, ddof=1) / math.sqrt(values.size))


def initial_coefficients(x0, space):
    """Coefficients of ``P^N x0`` in ``space``.

    ``x0`` may be a :class:`SpectralField` (truncated or zero-padded), an
    object with a ``coefficients(space)`` method, or a sequence of
    ``(mode, amplitude)`` pairs.
    """
    if isinstance(x0, SpectralField):
        out = np.zeros(space.N)
        n = min(space.N, x0.space.N)
        out[:n] = x0.coeffs[:n]
        return out
    if hasattr(x0, "coefficients"):
        return np.asarray(x0.coefficients(space), dtype=np.float64)
    out = np.zeros(space.N)
    for j, amp in x0:
        if not 1 <= int(j):
            raise ConfigurationError(f"mode index must be >= 1, got {j}")
        if int(j) <= space.N:
            out[int(j) - 1] += float(amp)
    return out


def _spaces(L, Ns, mg_factor):
    return [build_space(L, N, mg_factor * N) for N in Ns]


def _check_exclusions(alive, what):
    excluded = int(np.count_nonzero(~alive))
    if excluded:
        log.warning("%s: excluded %d of %d non-finite paths", what, excluded, alive.size)
    if excluded > EXCLUSION_BUDGET * alive.size:
        raise ExclusionBudgetError(
            f"{what}: {excluded} of {alive.size} paths blew up, above the "
            f"{EXCLUSION_BUDGET:.0%} budget; reduce dt")
    return excluded


def _gather(results):
    """Concatenate per-block ``(values, alive)`` pairs in block order."""
    values = [r[0] for r in results]
    alive = np.concatenate([r[1] for r in results])
    return values, alive


def strong_error_curves(cfg, pot, spec, x0, Ns, N_ref, M_paths, norm_kinds=("H",), *,
                        L=np.pi, seed=0, threads=1, mg_factor=4, sup_error=False):
    """:func:`strong_error_curve` for several norms from one coupled ensemble.

    Returns a dict ``norm_kind -> ErrorCurve``.
    """
    for kind in norm_kinds:
        if kind not in NORM_ALPHA:
            raise ConfigurationError(f"norm must be one of {sorted(NORM_ALPHA)}, got {kind!r}")
    Ns = [int(n) for n in Ns]
    if any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise ConfigurationError(f"resolutions must be strictly increasing, got {Ns}")
    if not Ns or Ns[-1] >= N_ref:
        raise ConfigurationError(f"every N must be below N_ref={N_ref}, got {Ns}")
    if cfg.K < 4 * N_ref:
        raise ConfigurationError(f"noise modes K={cfg.K} must be at least 4*N_ref={4 * N_ref}")
    spaces = _spaces(L, Ns + [N_ref], mg_factor)
    models = [GalerkinOperators(s, pot, spec, cfg.K) for s in spaces]
    x0s = [initial_coefficients(x0, s) for s in spaces]
    weights = np.array([spaces[-1].lambdas ** NORM_ALPHA[k] for k in norm_kinds])
    plan = NoisePlan(seed, cfg.K, cfg.dt, cfg.steps, M_paths)

    def sq_errors(states):
        # (norms, resolutions, paths)
        ref = states[-1]
        out = np.empty((len(norm_kinds), len(Ns), ref.shape[0]))
        for i, N in enumerate(Ns):
            d = states[i] - ref[:, :N]
            out[:, i] = weights[:, :N] @ (d ** 2).T + weights[:, N:] @ (ref[:, N:] ** 2).T
        return out

    def run(block):
        worst = np.zeros((len(norm_kinds), len(Ns), block.size))

        def observer(step, t, states):
            np.maximum(worst, sq_errors(states), out=worst)

        res = integrate_block(models, x0s, cfg, plan, block, observer if sup_error else None)
        sq = worst if sup_error else sq_errors(res.finals)
        return sq, res.alive

    values, alive = _gather(map_path_blocks(run, M_paths, threads))
    excluded = _check_exclusions(alive, "strong_error_curve")
    sq = np.concatenate(values, axis=2)[:, :, alive]
    curves = {}
    for n, kind in enumerate(norm_kinds):
        errors = np.empty(len(Ns))
        ci = np.empty(len(Ns))
        for i in range(len(Ns)):
            m, h = mean_ci(sq[n, i])
            errors[i] = math.sqrt(m)
            # delta method: d sqrt(m) = dm / (2 sqrt(m))
            ci[i] = h / (2.0 * errors[i]) if errors[i] > 0 else 0.0
        curves[kind] = ErrorCurve(kind, Ns, int(N_ref), errors, ci, int(alive.sum()),
                                  excluded, sup_error)
    return curves


def strong_error_curve(cfg, pot, spec, x0, Ns, N_ref, M_paths, norm_kind="H", **kw):
    """Root-mean-square error of ``X^N(T)`` against a coupled ``X^{N_ref}(T)``.

    Every resolution runs in lockstep on the same increments, the coarse
    solution is zero-padded into the reference space, and the error is
    measured in ``H`` (``norm_kind="H"``), ``H^-1`` (``"Hminus1"``) or
    ``H^1`` (``"H1"``). With ``sup_error=True`` the pathwise supremum over
    recorded snapshots replaces the terminal-time error.
    """
    return strong_error_curves(cfg, pot, spec, x0, Ns, N_ref, M_paths, (norm_kind,), **kw)[norm_kind]


def fit_loglog(x, y):
    """Ordinary least squares of ``log y`` on ``log x``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size < 3:
        raise ConfigurationError(f"a rate fit needs at least 3 points, got {x.size}")
    if np.any(y <= 0) or np.any(x <= 0):
        raise DegenerateFitError(
            "zero or negative values: the coarse resolutions are already exact, no rate to fit")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    r2 = 1.0 if ss_tot <= 1e-30 else 1.0 - ss_res / ss_tot
    return RateFit(float(slope), float(intercept), float(r2))


def fit_loglog_rate(curve):
    """Empirical order ``-tau`` from an :class:`ErrorCurve`."""
    return fit_loglog(curve.Ns, curve.errors)


def default_lags(cfg, count=10, min_steps=16):
    """Roughly geometric lags from ``min_steps * dt`` to ``T / 8``, all multiples of ``min_steps``."""
    top = max(1, cfg.steps // 8 // min_steps)
    mult = np.unique(np.round(np.geomspace(1, top, count)).astype(int))
    return mult * min_steps * cfg.dt


def temporal_regularity_estimate(cfg, pot, spec, x0, N, M_paths, lags=None, *,
                                 L=np.pi, seed=0, threads=1, mg_factor=4):
    """Mean squared ``H``-increments over anchors in ``[T/2, T]`` and their log-log slope.

    The slope estimates twice the temporal Hölder exponent of the paths.
    Every lag must be at least ``8 dt``.
    """
    if lags is None:
        lags = default_lags(cfg)
    lags = np.asarray(lags, dtype=np.float64)
    lag_steps = np.round(lags / cfg.dt).astype(int)
    if np.any(lag_steps < 8):
        raise ConfigurationError(f"lags must be at least 8*dt={8 * cfg.dt:g}; got {lags.min():g}")
    stride = int(reduce(math.gcd, lag_steps.tolist()))
    first = -(-(cfg.steps // 2) // stride) * stride
    if lag_steps.max() > cfg.steps - first:
        raise ConfigurationError("largest lag exceeds the anchor window [T/2, T]")
    run_cfg = replace(cfg, record_every=stride)
    space = build_space(L, N, mg_factor * N)
    models = [GalerkinOperators(space, pot, spec, cfg.K)]
    x0s = [initial_coefficients(x0, space)]
    plan = NoisePlan(seed, cfg.K, run_cfg.dt, run_cfg.steps, M_paths)
    lag_idx = lag_steps // stride

    def run(block):
        snaps = []

        def observer(step, t, states):
            if step >= first and step % stride == 0:
                snaps.append(states[0].copy())

        res = integrate_block(models, x0s, run_cfg, plan, block, observer)
        S = np.asarray(snaps)
        out = np.empty((lag_idx.size, block.size))
        for i, ell in enumerate(lag_idx):
            d = S[ell:] - S[:-ell]
            out[i] = np.mean(np.sum(d ** 2, axis=2), axis=0)
        return out, res.alive

    values, alive = _gather(map_path_blocks(run, M_paths, threads))
    excluded = _check_exclusions(alive, "temporal_regularity_estimate")
    inc = np.concatenate(values, axis=1)[:, alive]
    stats = [mean_ci(row) for row in inc]
    mean_sq = np.array([s[0] for s in stats])
    ci = np.array([s[1] for s in stats])
    true_lags = lag_steps * run_cfg.dt
    return IncrementCurve(true_lags, mean_sq, ci, int(alive.sum()), excluded,
                          fit_loglog(true_lags, mean_sq))


_QUANTITY = re.compile(r"^(sup|terminal)-(Hminus1|Hgamma|H|E|H-?[0-9.]+)-([0-9]+)$")


@dataclass(frozen=True)
class Quantity:
    """Pathwise functional ``sup_t ||X(t)||^q`` (or its value at ``T``).

    ``norm`` is ``"E"`` (grid supremum) or ``"H"`` with Sobolev order ``alpha``.
    """

    reduction: str
    norm: str
    alpha: float
    q: int

    @property
    def name(self):
        if self.norm == "E":
            label = "E"
        elif self.alpha == 0:
            label = "H"
        elif self.alpha == -1:
            label = "Hminus1"
        else:
            label = f"H{self.alpha:g}"
        return f"{self.reduction}-{label}-{self.q}"

    def evaluate(self, states, space):
        if self.norm == "E":
            return grid_lp_norm(space.synthesize(states), space, np.inf) ** self.q
        # paths that blew up are excluded later; their inf/nan must not warn here
        with np.errstate(over="ignore", invalid="ignore"):
            sq = states ** 2 @ space.lambdas ** self.alpha
            return sq ** (self.q / 2)


def parse_quantity(text, gamma=None):
    """Parse names such as ``sup-H-2``, ``sup-Hminus1-4``, ``sup-E-8``, ``sup-H1-2``.

    ``Hgamma`` takes its order from ``gamma``.
    """
    m = _QUANTITY.match(text.strip())
    if not m:
        raise ConfigurationError(f"unknown moment quantity {text!r}")
    reduction, label, q = m.group(1), m.group(2), int(m.group(3))
    if q < 1:
        raise ConfigurationError("moment order q must be >= 1")
    if label == "E":
        return Quantity(reduction, "E", 0.0, q)
    if label == "H":
        alpha = 0.0
    elif label == "Hminus1":
        alpha = -1.0
    elif label == "Hgamma":
        if gamma is None:
            raise ConfigurationError(f"{text!r} needs a value for gamma")
        alpha = float(gamma)
    else:
        alpha = float(label[1:])
    return Quantity(reduction, "H", alpha, q)


def moment_reports(cfg, pot, spec, x0, N, M_paths, quantities, *,
                   L=np.pi, seed=0, threads=1, mg_factor=4):
    """Monte Carlo means of several pathwise functionals from a single ensemble run."""
    quantities = [parse_quantity(q) if isinstance(q, str) else q for q in quantities]
    space = build_space(L, N, mg_factor * N)
    models = [GalerkinOperators(space, pot, spec, cfg.K)]
    x0s = [initial_coefficients(x0, space)]
    plan = NoisePlan(seed, cfg.K, cfg.dt, cfg.steps, M_paths)

    def run(block):
        out = np.zeros((len(quantities), block.size))

        def observer(step, t, states):
            x = states[0]
            for i, q in enumerate(quantities):
                if q.reduction == "sup":
                    np.maximum(out[i], q.evaluate(x, space), out=out[i])
                elif step == cfg.steps:
                    out[i] = q.evaluate(x, space)

        res = integrate_block(models, x0s, cfg, plan, block, observer)
        return out, res.alive

    values, alive = _gather(map_path_blocks(run, M_paths, threads))
    excluded = _check_exclusions(alive, "moment estimate")
    vals = np.concatenate(values, axis=1)[:, alive]
    reports = []
    for q, row in zip(quantities, vals):
        est, ci = mean_ci(row)
        reports.append(MomentReport(q.name, est, ci, int(N), int(alive.sum()), q.q, excluded))
    return reports


def moment_sup_estimate(cfg, pot, spec, x0, N, M_paths, quantity, *, gamma=None, **kw):
    """``E[sup_t ||X^N(t)||^q]`` for one quantity such as ``"sup-H-2"`` or ``"sup-E-4"``."""
    q = parse_quantity(quantity, gamma) if isinstance(quantity, str) else quantity
    return moment_reports(cfg, pot, spec, x0, N, M_paths, [q], **kw)[0]


def regularity_profile(cfg, pot, spec, x0, N, M_paths, gammas, *, q=2, **kw):
    """Second moments of ``||X^N||_{H^gamma}`` for each ``gamma``.

    For every order the list holds the supremum-in-time report followed by
    the terminal-time report; the latter is directly comparable with the
    explicit variance series of the linear problem.
    """
    quantities = []
    for g in gammas:
        if not 0 < g <= 2:
            raise ConfigurationError(f"gamma must lie in (0, 2], got {g}")
        quantities.append(Quantity("sup", "H", float(g), q))
        quantities.append(Quantity("terminal", "H", float(g), q))
    return moment_reports(cfg, pot, spec, x0, N, M_paths, quantities, **kw)


def lyapunov_exponential_estimate(cfg, pot, spec, x0, N, M_paths, beta=1.0, c=0.1, *,
                                  L=np.pi, seed=0, threads=1, mg_factor=4):
    """Monte Carlo mean of the exponential functional at ``T``::

        exp( e^{-beta T} ||X(T)||_{H^-1}^2 / 2
             + c int_0^T e^{-beta s} (||X(s)||_{L^4}^4 + ||X(s)||_{H^1}^2) ds )

    Time integrals use the trapezoid rule over recorded snapshots. If any
    exponent exceeds 700 the report switches to the log domain
    (``log_domain=True``, estimate = log of the mean) instead of overflowing.
    """
    if not (beta > 0 and c > 0):
        raise ConfigurationError(f"beta and c must be positive, got beta={beta}, c={c}")
    space = build_space(L, N, mg_factor * N)
    models = [GalerkinOperators(space, pot, spec, cfg.K)]
    x0s = [initial_coefficients(x0, space)]
    plan = NoisePlan(seed, cfg.K, cfg.dt, cfg.steps, M_paths)
    lam = space.lambdas

    def integrand(x, t):
        l4 = grid_lp_norm(space.synthesize(x), space, 4) ** 4
        h1 = x ** 2 @ lam
        return c * math.exp(-beta * t) * (l4 + h1)

    def run(block):
        acc = {"t": None, "f": None, "integral": np.zeros(block.size), "hm1": None}

        def observer(step, t, states):
            x = states[0]
            f = integrand(x, t)
            if acc["t"] is not None:
                acc["integral"] += 0.5 * (t - acc["t"]) * (f + acc["f"])
            acc["t"], acc["f"] = t, f
            if step == cfg.steps:
                acc["hm1"] = x ** 2 @ lam ** -1.0

        res = integrate_block(models, x0s, cfg, plan, block, observer)
        expo = 0.5 * math.exp(-beta * cfg.T) * acc["hm1"] + acc["integral"]
        return expo, res.alive

    values, alive = _gather(map_path_blocks(run, M_paths, threads))
    excluded = _check_exclusions(alive, "lyapunov estimate")
    expo = np.concatenate(values)[alive]
    overflow = int(np.count_nonzero(expo > OVERFLOW_EXPONENT))
    extra = {"beta": float(beta), "c": float(c), "max_exponent": float(expo.max())}
    if overflow:
        log.warning("exponential functional: %d paths exceed exp(%g); reporting log domain",
                    overflow, OVERFLOW_EXPONENT)
        shift = expo.max()
        m, h = mean_ci(np.exp(expo - shift))
        est = float(logsumexp(expo) - math.log(expo.size))
        return MomentReport("log-lyapunov-exp", est, h / m, int(N), int(alive.sum()), 1,
                            excluded, overflow, True, extra)
    est, ci = mean_ci(np.exp(expo))
    return MomentReport("lyapunov-exp", est, ci, int(N), int(alive.sum()), 1, excluded, 0, False, extra)
