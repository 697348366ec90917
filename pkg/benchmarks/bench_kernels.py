"""Time the compiled and pure-numpy kernels side by side.

Usage: python3 benchmarks/bench_kernels.py [--p 20] [--n 100] [--H 6] [--chain]

Per-kernel timings call both modules directly on identical inputs. With
``--chain`` a short CUSP chain is also run under each backend in a fresh
interpreter, selected through CUSPFACTOR_BACKEND.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from cuspfactor import _pykernels

try:
    from cuspfactor import _ckernels
except ImportError:
    _ckernels = None

CHAIN_SNIPPET = """
import time
from cuspfactor.gibbs_cusp import FactorHyper, McmcSettings, run_chain
from cuspfactor.prob_core import make_rng
from cuspfactor.sim_harness import generate_dataset
data, _ = generate_dataset({p}, {h0}, {n}, make_rng(1))
start = time.perf_counter()
run_chain(data, FactorHyper(), McmcSettings(n_iterations={iters}, burn_in={burn}, thin=5, seed=2))
print(time.perf_counter() - start)
"""


def kernel_cases(p, n, H, rng):
    y = rng.standard_normal((n, p))
    eta = rng.standard_normal((n, H))
    lam = rng.standard_normal((p, H))
    sigma2 = rng.uniform(0.5, 2.0, p)
    prior_var = rng.uniform(0.05, 2.0, (p, H))
    log_omega = np.log(np.full(H, 1.0 / H))
    return {
        "sample_loadings": lambda k: k.sample_loadings(y, eta, sigma2, prior_var, rng.standard_normal((p, H))),
        "sample_factors": lambda k: k.sample_factors(y, lam, sigma2, rng.standard_normal((n, H))),
        "column_log_densities": lambda k: k.column_log_densities(lam, 0.05, 2.0, 2.0),
        "sample_indicators": lambda k: k.sample_indicators(lam, log_omega, 0.05, 2.0, 2.0, rng.random(H)),
        "residual_ss": lambda k: k.residual_ss(y, eta, lam),
    }


def best_of(fn, number):
    return min(timeit.repeat(fn, number=number, repeat=5)) / number


def chain_seconds(backend, p, h0, n, iters):
    env = dict(os.environ, CUSPFACTOR_BACKEND=backend)
    code = CHAIN_SNIPPET.format(p=p, h0=h0, n=n, iters=iters, burn=iters // 3)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=int, default=20)
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--H", type=int, default=6)
    ap.add_argument("--number", type=int, default=200)
    ap.add_argument("--chain", action="store_true", help="also time a 3000-iteration chain per backend")
    args = ap.parse_args(argv)

    if _ckernels is None:
        print("compiled extension not built; only the numpy backend is available")
    rng = np.random.default_rng(0)
    cases = kernel_cases(args.p, args.n, args.H, rng)
    print(f"p={args.p} n={args.n} H={args.H}, best of 5 x {args.number} calls")
    print(f"{'kernel':22s} {'numpy (us)':>12s} {'cython (us)':>12s} {'speedup':>8s}")
    for name, call in cases.items():
        t_py = best_of(lambda: call(_pykernels), args.number) * 1e6
        if _ckernels is None:
            print(f"{name:22s} {t_py:12.1f} {'-':>12s} {'-':>8s}")
            continue
        t_c = best_of(lambda: call(_ckernels), args.number) * 1e6
        print(f"{name:22s} {t_py:12.1f} {t_c:12.1f} {t_py / t_c:7.1f}x")

    if args.chain:
        backends = ["python"] + (["cython"] if _ckernels is not None else [])
        times = {b: chain_seconds(b, args.p, 5, args.n, 3000) for b in backends}
        line = ", ".join(f"{b} {t:.2f}s" for b, t in times.items())
        if len(times) == 2:
            line += f" (speedup {times['python'] / times['cython']:.2f}x)"
        print(f"3000-iteration CUSP chain, p={args.p}: {line}")


if __name__ == "__main__":
    main()
