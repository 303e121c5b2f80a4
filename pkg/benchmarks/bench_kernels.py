"""Schur-complement assembly: compiled kernel vs numpy fallback.

Times ``schur_matrix`` on the Gram blocks of a few shipped relaxations with a
random positive definite scaling matrix, and checks both kernels agree.

    python benchmarks/bench_kernels.py [--repeat 5] [--heavy]
"""
import argparse
import time

import numpy as np

from mompoly.relaxation import build_sdp, spec_from_problem
from mompoly.sdp.kernels import COMPILED_AVAILABLE, plan_block, schur_matrix

CASES = [("m20m02", 3), ("m20m02", 4), ("cov3322", 2), ("bilocal", 2)]


def bench(name, order, repeat, rng):
    p = build_sdp(spec_from_problem(name, order=order))
    plans = [plan_block(b.dim, r, i, j, v) for b, (r, i, j, v, _) in zip(p.blocks, p.float_blocks())]
    Ws = []
    for b in p.blocks:
        A = rng.standard_normal((b.dim, b.dim))
        Ws.append(A @ A.T / b.dim + np.eye(b.dim))
    kinds = ["python"] + (["compiled"] if COMPILED_AVAILABLE else [])
    times, mats = {}, {}
    for k in kinds:
        schur_matrix(plans, Ws, p.m, k)  # warm-up (builds cached index lists)
        t0 = time.perf_counter()
        for _ in range(repeat):
            mats[k] = schur_matrix(plans, Ws, p.m, k)
        times[k] = (time.perf_counter() - t0) / repeat
    err = 0.0
    if len(mats) == 2:
        M0 = mats["python"]
        err = float(np.max(np.abs(mats["compiled"] - M0)) / max(1.0, np.max(np.abs(M0))))
    return p, times, err


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--heavy", action="store_true", help="include the bilocal order-3 block")
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    cases = CASES + ([("bilocal", 3)] if args.heavy else [])
    print(f"compiled kernel available: {COMPILED_AVAILABLE}")
    print(f"{'problem':<12}{'r':>3}{'rows':>7}{'block':>7}{'python s':>11}{'compiled s':>12}{'speedup':>9}{'rel.err':>10}")
    for name, r in cases:
        p, t, err = bench(name, r, args.repeat, rng)
        tc = t.get("compiled", float("nan"))
        print(f"{name:<12}{r:>3}{p.m:>7}{max(p.block_dims):>7}{t['python']:>11.4f}{tc:>12.4f}"
              f"{t['python'] / tc:>9.2f}{err:>10.1e}")


if __name__ == "__main__":
    main()
