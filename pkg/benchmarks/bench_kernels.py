"""Compare the numba and pure-numpy kernel backends.

    python benchmarks/bench_kernels.py --paths 16 --N 64 --K 256

Times each hot kernel on representative shapes, then a full lockstep
integration, once per backend. Numba compile time is excluded by a warm-up
call.
"""

import argparse
import contextlib
import timeit

import numpy as np

from stochch import kernels
from stochch.dynamics import DiffusionSpec, GalerkinOperators, Potential
from stochch.integrators import SchemeConfig, integrate_block
from stochch.noise import NoisePlan
from stochch.spectral import build_space


@contextlib.contextmanager
def use_backend(impl):
    saved = (kernels.standard_normals, kernels.cubic_eval, kernels.sublinear_product)
    kernels.standard_normals = impl.standard_normals
    kernels.cubic_eval = impl.cubic_eval
    kernels.sublinear_product = impl.sublinear_product
    try:
        yield
    finally:
        kernels.standard_normals, kernels.cubic_eval, kernels.sublinear_product = saved


def best_of(fn, repeat, number):
    fn()  # warm-up (numba compilation, caches)
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def kernel_cases(args):
    rng = np.random.default_rng(0)
    paths = np.arange(args.paths)
    u = rng.normal(size=(args.paths, 4 * args.N))
    ug = rng.normal(size=(args.paths, args.K))
    w = rng.normal(size=(args.paths, args.K))
    return {
        "standard_normals": lambda b: b.standard_normals(1234, paths, 7, args.K),
        "cubic_eval": lambda b: b.cubic_eval(u, 0.0, -1.0, 0.0, 1.0),
        "sublinear_product(a=0.5)": lambda b: b.sublinear_product(ug, w, 0.5, 0.5),
        "sublinear_product(a=0.9)": lambda b: b.sublinear_product(ug, w, 0.5, 0.9),
    }


def full_run(args):
    space = build_space(np.pi, args.N)
    ops = GalerkinOperators(space, Potential.double_well(), DiffusionSpec.sublinear(0.5, 0.5), args.K)
    cfg = SchemeConfig(1e-5, args.steps * 1e-5, args.K)
    plan = NoisePlan(1, args.K, cfg.dt, cfg.steps, args.paths)
    x0 = np.eye(args.N)[0]
    return lambda: integrate_block([ops], [x0], cfg, plan, np.arange(args.paths))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--paths", type=int, default=16)
    parser.add_argument("--N", type=int, default=64)
    parser.add_argument("--K", type=int, default=256)
    parser.add_argument("--steps", type=int, default=200)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    backends = {"numpy": kernels.numpy_backend}
    if kernels.numba_backend is not None:
        backends["numba"] = kernels.numba_backend

    print(f"paths={args.paths} N={args.N} K={args.K} (default backend: {kernels.BACKEND})")
    print(f"{'kernel':<28}" + "".join(f"{name:>14}" for name in backends) + f"{'speedup':>10}")
    for label, case in kernel_cases(args).items():
        times = {name: best_of(lambda: case(b), args.repeat, 20) for name, b in backends.items()}
        row = "".join(f"{times[n] * 1e6:>11.1f} us" for n in backends)
        speedup = times["numpy"] / times["numba"] if "numba" in times else float("nan")
        print(f"{label:<28}{row}{speedup:>9.2f}x")

    times = {}
    for name, b in backends.items():
        with use_backend(b):
            times[name] = best_of(full_run(args), args.repeat, 1) / args.steps
    row = "".join(f"{times[n] * 1e6:>11.1f} us" for n in backends)
    speedup = times["numpy"] / times["numba"] if "numba" in times else float("nan")
    print(f"{'full step (per step)':<28}{row}{speedup:>9.2f}x")


if __name__ == "__main__":
    main()
