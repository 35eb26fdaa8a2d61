#!/usr/bin/env python3
"""Numba kernels against their pure-numpy fallbacks.

Both implementations are imported side by side from ``gibbsrare.kernels``, so
one process times both regardless of GIBBSRARE_NUMBA (which only picks the
implementation the package uses).  Outputs are compared before timing.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--quick]
"""
import argparse
import time

import numpy as np

from gibbsrare import _jit, kernels, models, rng, samplers
from gibbsrare.lattice import Pattern


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def hits_case(impl, quick):
    m = models.bernoulli(0.5)
    A = Pattern(np.array([[1, 0, 1], [0, 0, 1], [1, 1, 0]]), 2)
    M = 64 if quick else 256
    keys = samplers.stream_keys(1, range(M))
    pats = np.tile(A.flat.astype(np.int8), (M, 1))
    pack = rng.pack_coords(samplers.cube_offsets(2, 2))
    thr = samplers.iid_thresholds(m)
    out = np.empty(M, dtype=np.int64)

    def run():
        impl["first_hit_iid_batch"](keys, thr, pats, pack, 2, 1, 60, out)
        return out.copy()

    return run, f"first hits, {M} replicas, 3x3 pattern, cap 60"


def window_case(impl, quick):
    L = 256 if quick else 1024
    thr = samplers.iid_thresholds(models.iid([0.2, 0.3, 0.5]))
    shape = np.array([L, L], dtype=np.int64)
    out = np.empty(L * L, dtype=np.int8)

    def run():
        impl["iid_window"](np.uint64(7), thr, shape, out)
        return out.copy()

    return run, f"iid window {L}x{L}"


def heat_bath_case(impl, quick):
    L, sweeps = 16, (5 if quick else 20)
    setup = samplers.heat_bath_setup(models.ising(0.2).interaction, L)
    start = samplers._initial_state(2, L * L, 3, 0)

    def run():
        state = start.copy()
        impl["heat_bath"](state, setup.nbr, setup.ent_pos, setup.ent_k, setup.ent_rel, setup.ent_tab,
                          setup.tables, 2, np.uint64(11), 0, sweeps, np.zeros(0, dtype=np.int64), np.zeros(0))
        return state

    return run, f"heat bath {L}x{L} Ising, {sweeps} sweeps"


CASES = (hits_case, window_case, heat_bath_case)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="smaller problem sizes")
    args = ap.parse_args()
    if not _jit.NUMBA_AVAILABLE:
        raise SystemExit("numba is not installed; nothing to compare")

    print(f"{'case':48s} {'numba s':>10s} {'numpy s':>10s} {'speedup':>9s}")
    for case in CASES:
        fast, label = case(kernels.JIT, args.quick)
        slow, _ = case(kernels.NUMPY, args.quick)
        if not np.array_equal(fast(), slow()):  # also compiles the jit path
            raise SystemExit(f"{label}: implementations disagree")
        t_fast = best_of(fast, args.repeat)
        t_slow = best_of(slow, args.repeat)
        print(f"{label:48s} {t_fast:10.4f} {t_slow:10.4f} {t_slow / t_fast:8.1f}x")


if __name__ == "__main__":
    main()
