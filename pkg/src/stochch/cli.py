"""Command-line driver: one subcommand per experiment.

    stochch convergence --config conv.toml --out results/ --threads 4

Each run writes CSV results plus ``manifest.json`` into the output
directory. Exit status is 0 on success, 2 when a configured acceptance
threshold is missed and 1 on any error.
"""

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .config import EXPERIMENTS, load_config
from .errors import ConfigurationError, StochchError
from .experiments import (
    fit_loglog_rate,
    lyapunov_exponential_estimate,
    moment_reports,
    regularity_profile,
    strong_error_curves,
    temporal_regularity_estimate,
    default_lags,
)
from .integrators import simulate
from .noise import NoisePlan
from .spectral import SpectralField, build_space

log = logging.getLogger("stochch")

EXIT_OK, EXIT_ERROR, EXIT_THRESHOLD = 0, 1, 2


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path, header, rows, cfg):
    """UTF-8 CSV with ``\\n`` endings and round-trip floats, prefixed by seed and config hash."""
    lines = [f"# seed={cfg.seed}", f"# config_sha256={cfg.config_hash()}", ",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path.name


def _kw(cfg, threads):
    return dict(L=cfg.L, seed=cfg.seed, threads=threads, mg_factor=cfg.mg_factor)


def _check(checks, name, ok, detail):
    checks.append({"check": name, "passed": bool(ok), "detail": detail})


def _ratio_check(cfg, checks, reports):
    limit = cfg.acceptance["max_ratio"]
    if limit is None:
        return
    by_q = {}
    for r in reports:
        by_q.setdefault(r.quantity, []).append(r.estimate)
    for q, vals in by_q.items():
        if len(vals) > 1:
            ratio = max(vals) / min(vals) if min(vals) > 0 else math.inf
            _check(checks, f"{q} ratio across N", ratio < limit, f"{ratio:.4g} < {limit}")


def _rate_checks(cfg, checks, fit, label):
    acc = cfg.acceptance
    if acc["max_slope"] is not None:
        _check(checks, f"{label} slope <= max_slope", fit.slope <= acc["max_slope"],
               f"{fit.slope:.4g} <= {acc['max_slope']}")
    if acc["min_slope"] is not None:
        _check(checks, f"{label} slope >= min_slope", fit.slope >= acc["min_slope"],
               f"{fit.slope:.4g} >= {acc['min_slope']}")
    if acc["min_r2"] is not None:
        _check(checks, f"{label} r2 >= min_r2", fit.r_squared >= acc["min_r2"],
               f"{fit.r_squared:.4g} >= {acc['min_r2']}")


def run_simulate(cfg, out, threads, args, checks):
    N = cfg.N
    space = build_space(cfg.L, N, cfg.mg_factor * N)
    x0 = SpectralField(space, cfg.initial.coefficients(space))
    path = cfg.experiment["path"]
    plan = NoisePlan(cfg.seed, cfg.K, cfg.scheme.dt, cfg.scheme.steps, cfg.experiment["paths"])
    traj = simulate(x0, cfg.scheme, cfg.potential, cfg.diffusion, plan, path)
    header = ["t"] + [f"a{j}" for j in range(1, N + 1)]
    rows = [[t, *x] for t, x in zip(traj.times, traj.states)]
    return [write_csv(out / "trajectory.csv", header, rows, cfg)]


def run_convergence(cfg, out, threads, args, checks):
    if cfg.N_ref is None:
        raise ConfigurationError("the convergence experiment needs galerkin.N_ref")
    curves = strong_error_curves(cfg.scheme, cfg.potential, cfg.diffusion, cfg.initial, cfg.Ns,
                                 cfg.N_ref, cfg.experiment["paths"], tuple(cfg.experiment["norm"]),
                                 sup_error=args.sup_error or cfg.experiment["sup_error"],
                                 **_kw(cfg, threads))
    err_rows, rate_rows = [], []
    for norm, curve in curves.items():
        for N, e, h in zip(curve.Ns, curve.errors, curve.ci_half_widths):
            err_rows.append([N, e, h, curve.paths, norm])
        if len(curve.Ns) >= 3 and np.all(curve.errors > 0):
            fit = fit_loglog_rate(curve)
            rate_rows.append([fit.slope, fit.intercept, fit.r_squared, norm])
            _rate_checks(cfg, checks, fit, norm)
        else:
            log.warning("%s: no rate fit (fewer than 3 points or exact resolutions)", norm)
    files = [write_csv(out / "errors.csv", ["N", "error", "ci_half", "paths", "norm"], err_rows, cfg)]
    files.append(write_csv(out / "rate.csv", ["slope", "intercept", "r2", "norm"], rate_rows, cfg))
    return files


def run_temporal(cfg, out, threads, args, checks):
    e = cfg.experiment
    lags = e["lags"] if e["lags"] is not None else default_lags(cfg.scheme, e["n_lags"])
    curve = temporal_regularity_estimate(cfg.scheme, cfg.potential, cfg.diffusion, cfg.initial,
                                         cfg.N, e["paths"], lags, **_kw(cfg, threads))
    rows = list(zip(curve.lags, curve.mean_sq_increment, curve.ci_half_widths))
    _rate_checks(cfg, checks, curve.fit, "increment")
    return [write_csv(out / "increments.csv", ["lag", "mean_sq_increment", "ci_half"], rows, cfg),
            write_csv(out / "rate.csv", ["slope", "intercept", "r2"],
                      [[curve.fit.slope, curve.fit.intercept, curve.fit.r_squared]], cfg)]


_MOMENT_HEADER = ["quantity", "N", "q", "estimate", "ci_half", "paths", "excluded_paths"]


def _moment_rows(reports):
    return [[r.quantity, r.N, r.q, r.estimate, r.ci, r.paths, r.excluded_paths] for r in reports]


def run_moments(cfg, out, threads, args, checks):
    reports = []
    for N in cfg.Ns:
        reports += moment_reports(cfg.scheme, cfg.potential, cfg.diffusion, cfg.initial, N,
                                  cfg.experiment["paths"], cfg.experiment["quantities"],
                                  **_kw(cfg, threads))
    _ratio_check(cfg, checks, reports)
    return [write_csv(out / "moments.csv", _MOMENT_HEADER, _moment_rows(reports), cfg)]


def run_lyapunov(cfg, out, threads, args, checks):
    e = cfg.experiment
    reports = [lyapunov_exponential_estimate(cfg.scheme, cfg.potential, cfg.diffusion, cfg.initial,
                                             N, e["paths"], e["beta"], e["c"], **_kw(cfg, threads))
               for N in cfg.Ns]
    overflow = sum(r.overflow_count for r in reports)
    if overflow:
        _check(checks, "no overflow-guard activations", False, f"{overflow} paths")
    _ratio_check(cfg, checks, reports)
    return [write_csv(out / "moments.csv", _MOMENT_HEADER, _moment_rows(reports), cfg)]


def run_profile(cfg, out, threads, args, checks):
    reports = []
    for N in cfg.Ns:
        reports += regularity_profile(cfg.scheme, cfg.potential, cfg.diffusion, cfg.initial, N,
                                      cfg.experiment["paths"], cfg.experiment["gammas"],
                                      **_kw(cfg, threads))
    return [write_csv(out / "moments.csv", _MOMENT_HEADER, _moment_rows(reports), cfg)]


RUNNERS = {
    "simulate": run_simulate,
    "convergence": run_convergence,
    "temporal": run_temporal,
    "moments": run_moments,
    "lyapunov": run_lyapunov,
    "profile": run_profile,
}

_GNUPLOT = {
    "errors.csv": "set logscale xy\nplot 'errors.csv' using 1:2:3 with yerrorlines title 'error'\n",
    "increments.csv": "set logscale xy\nplot 'increments.csv' using 1:2:3 with yerrorlines title 'E|dX|^2'\n",
    "trajectory.csv": "plot 'trajectory.csv' using 1:2 with lines title 'a1'\n",
    "moments.csv": "plot 'moments.csv' using 2:4 with points title 'estimate'\n",
}


def write_gnuplot_stub(out, files):
    body = ["set datafile separator ','", "set datafile commentschars '#'", "set key autotitle columnhead"]
    for name in files:
        if name in _GNUPLOT:
            body.append(f"set output '{Path(name).stem}.png'")
            body.append(_GNUPLOT[name].rstrip("\n"))
    (out / "plot.gp").write_text("set terminal pngcairo\n" + "\n".join(body) + "\n", encoding="utf-8")
    return "plot.gp"


def run(cfg, command, out, threads=1, args=None):
    """Execute ``command`` for ``cfg`` and write artifacts into ``out``; returns the exit code."""
    args = args or argparse.Namespace(sup_error=False, gnuplot_stub=False)
    kind = cfg.experiment["kind"]
    if kind is not None and kind != command:
        raise ConfigurationError(f"config sets experiment.kind={kind!r} but the command is {command!r}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    checks = []
    start = time.perf_counter()
    files = RUNNERS[command](cfg, out, threads, args, checks)
    wall = time.perf_counter() - start
    if args.gnuplot_stub:
        files.append(write_gnuplot_stub(out, files))
    passed = all(c["passed"] for c in checks)
    manifest = {
        "command": command,
        "version": __version__,
        "seed": cfg.seed,
        "config_sha256": cfg.config_hash(),
        "config": cfg.echo(),
        "threads": threads,
        "backend": kernels.BACKEND,
        "stiffness_dt_lambda2": cfg.stiffness,
        "wall_time_s": wall,
        "files": files,
        "checks": checks,
        "status": "ok" if passed else "threshold_failed",
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=repr) + "\n",
                                       encoding="utf-8")
    for c in checks:
        log.info("%s: %s (%s)", "PASS" if c["passed"] else "FAIL", c["check"], c["detail"])
    return EXIT_OK if passed else EXIT_THRESHOLD


def build_parser():
    parser = argparse.ArgumentParser(prog="stochch", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--seed", type=int, default=None, help="override the config seed (u64)")
        p.add_argument("--threads", type=int, default=1, help="worker threads over path blocks")
        p.add_argument("--out", default=None, help="output directory (default: output.directory)")
        p.add_argument("--sup-error", action="store_true",
                       help="convergence: sup over recorded times instead of the terminal error")
        p.add_argument("--gnuplot-stub", action="store_true", help="also write plot.gp")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads < 1:
            raise ConfigurationError(f"--threads must be positive, got {args.threads}")
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        out = args.out or cfg.output["directory"]
        code = run(cfg, args.command, out, args.threads, args)
    except (StochchError, ConfigurationError, OSError) as exc:
        print(f"stochch: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if code == EXIT_THRESHOLD:
        print("stochch: acceptance threshold missed, see manifest.json", file=sys.stderr)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
