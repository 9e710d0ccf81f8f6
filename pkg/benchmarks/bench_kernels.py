#!/usr/bin/env python3
"""Timing comparison of the jit kernels against the pure-numpy fallback.

Run from the repository root:

    python3 benchmarks/bench_kernels.py --paths 2000

The same seeds feed both backends and the outputs are bit-identical, so
the comparison is purely about speed.  The first jit call per kernel pays
the compilation cost; it is excluded by the warm-up run.
"""
import argparse
import math
import time

from freqsim._kernels import HAVE_NUMBA, JIT_IMPL, PY_IMPL
from freqsim.dual import DualRates, dual_ensemble
from freqsim.measures import JumpMeasure
from freqsim.model import ModelParams
from freqsim.simulate import (
    StopBand,
    coupled_ensemble,
    culled_frequency_ensemble,
    culling_chain_ensemble,
)


def reference_model() -> ModelParams:
    return ModelParams(
        c1=0.5, c2=0.25, eta1=0.3, eta2=0.1,
        b11=(0.0, 0.4), b12=(0.0, 0.2), b21=(0.0, 0.05), b22=(0.0, 0.1),
        mu1=JumpMeasure([(1.0, 0.0, 0.3)]),
        mu2=JumpMeasure([(0.0, 0.5, 0.2)]),
        nu=JumpMeasure([(0.2, 0.1, 0.5)]),
    )


def best_of(fn, repeat: int) -> float:
    fn()  # warm-up: jit compilation, page faults
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    ap = argparse.ArgumentParser(description="jit vs numpy kernel timings")
    ap.add_argument("--paths", type=int, default=2000, help="paths per ensemble")
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--horizon", type=float, default=0.5)
    ap.add_argument("--repeat", type=int, default=3, help="timed repeats (best kept)")
    args = ap.parse_args()

    params = reference_model()
    band = StopBand(1e-6, 1e6)
    rates = DualRates(params, 1.0, 24)
    cases = [
        ("culled frequency ensemble", lambda impl: culled_frequency_ensemble(
            params, 1.0, 0.6,
            horizon=args.horizon, dt=args.dt, n_paths=args.paths, seed=1, impl=impl)),
        ("coupled pair ensemble", lambda impl: coupled_ensemble(
            params, 1.0, 0.4, 0.6,
            horizon=args.horizon, dt=args.dt, n_pairs=args.paths // 2, seed=2, impl=impl)),
        ("culling chain ensemble", lambda impl: culling_chain_ensemble(
            params, 1.0, 0.6, 16.0,
            horizon=args.horizon, dt=args.dt, band=band,
            n_paths=args.paths, seed=3, impl=impl)),
        ("dual block-counting ensemble", lambda impl: dual_ensemble(
            rates, 3, args.horizon, args.paths * 10, 4, impl=impl)),
    ]

    if not HAVE_NUMBA:
        print("numba unavailable: timing the numpy fallback only")
    print(f"{'kernel':<30} {'numpy':>10} {'jit':>10} {'speedup':>9}")
    for label, make in cases:
        t_py = best_of(lambda: make(PY_IMPL), args.repeat)
        if JIT_IMPL is None:
            print(f"{label:<30} {t_py:>9.3f}s {'-':>10} {'-':>9}")
            continue
        t_jit = best_of(lambda: make(JIT_IMPL), args.repeat)
        print(f"{label:<30} {t_py:>9.3f}s {t_jit:>9.3f}s {t_py / t_jit:>8.1f}x")


if __name__ == "__main__":
    main()
