"""Benchmark the numba kernels against the pure-numpy fallback.

Times the two hot paths -- the particle simulation loop and the Monte-Carlo
load accumulation -- under both backends and prints a comparison table.

Run from the repo root:
    python3 benchmarks/bench_backends.py
"""
import time

import numpy as np

from ccbo import _kernels
from ccbo._kernels import numpy_impl
from ccbo.basis import BasisFamily, BoxDomain, HyperbolicCross, MultiIndexBasis
from ccbo.cbo import CBOConfig, InitSpec, Variant, run
from ccbo.galerkin import assemble_load_montecarlo
from ccbo.hjb import HJBConfig, solve_hjb
from ccbo.objectives import rastrigin

try:
    from ccbo._kernels import numba_impl  # noqa: F401
    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False
    print("numba not importable - timing the numpy fallback only")

N_REPEATS = 5
N_RUNS_PER_REPEAT = 20


def time_backend(backend, fn):
    _kernels.set_backend(backend)
    try:
        fn()  # warmup (includes JIT compilation for numba)
        times = []
        for _ in range(N_REPEATS):
            t0 = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t0)
    finally:
        _kernels.set_backend(None)
    return min(times)


def main():
    d = 2
    obj = rastrigin(d)
    basis = MultiIndexBasis(BasisFamily.LEGENDRE, BoxDomain.cube(2.0, d), HyperbolicCross(2))
    vfa, _ = solve_hjb(basis, obj, HJBConfig())
    init = InitSpec("uniform_box", (-1.0,) * d, (-0.5,) * d)

    def simulate_batch():
        for seed in range(N_RUNS_PER_REPEAT):
            run(CBOConfig(variant=Variant.CONTROLLED, init=init, seed=seed), obj, vfa)

    def mc_load():
        assemble_load_montecarlo(basis, obj, 400_000, seed=5)

    backends = ["numpy"] + (["numba"] if HAS_NUMBA else [])
    print(f"{'kernel':<28}" + "".join(f"{b:>12}" for b in backends)
          + ("{:>10}".format("speedup") if HAS_NUMBA else ""))
    for name, fn in ((f"simulate ({N_RUNS_PER_REPEAT} runs, T=10)", simulate_batch),
                     ("mc load (4e5 samples)", mc_load)):
        row = {b: time_backend(b, fn) for b in backends}
        line = f"{name:<28}" + "".join(f"{row[b] * 1e3:>10.1f}ms" for b in backends)
        if HAS_NUMBA:
            line += f"{row['numpy'] / row['numba']:>9.1f}x"
        print(line)

    # sanity: both backends agree on a short trajectory
    if HAS_NUMBA:
        cfg = CBOConfig(variant=Variant.CONTROLLED, init=init, seed=0, t_final=0.5)
        _kernels.set_backend("numpy")
        a = run(cfg, obj, vfa)
        _kernels.set_backend("numba")
        b = run(cfg, obj, vfa)
        _kernels.set_backend(None)
        drift = np.max(np.abs(a.final_positions - b.final_positions))
        print(f"\ncross-backend max position drift over 5 steps: {drift:.2e}")


if __name__ == "__main__":
    main()
