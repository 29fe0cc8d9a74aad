#!/usr/bin/env python3
"""Benchmark the numba-compiled kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]

The fallback timings come from a subprocess running with QOT_NUMBA=0, so they
measure exactly the code path selected by the environment flag (unwrapping
py_func in-process would still call compiled inner kernels and understate the
difference). Timings are medians over `repeat` calls after a warmup call.
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def build_cases(repeat):
    """(name, callable, args, repeat) for every benchmarked kernel."""
    from qot import kernels, linalg, lindblad
    from qot.transport import DirectTransport

    rng = np.random.default_rng(0)
    cases = []
    for n in (2, 4):
        basis = lindblad.gell_mann_basis(n)
        ls = basis.mats
        l2 = np.ascontiguousarray(basis.l2sum())
        x = linalg.random_hermitian(rng, n)
        v = linalg.random_skew_field(rng, basis.size, n)
        rho = linalg.random_density(rng, n)
        w, u = np.linalg.eigh(rho)
        scale = kernels.logmean_kernel_np(w)
        blocks = np.ascontiguousarray(
            np.stack([linalg.random_hermitian(rng, 2 * n) for _ in range(96)]))
        cases += [
            (f"commutator_field (n={n})", kernels.commutator_field, (ls, x), repeat),
            (f"divergence_field (n={n})", kernels.divergence_field, (ls, v), repeat),
            (f"anticommutator (n={n})", kernels.anticommutator_field, (rho, v), repeat),
            (f"laplacian_apply (n={n})", kernels.laplacian_apply, (ls, l2, x), repeat),
            (f"eigenbasis_scale (n={n})", kernels.eigenbasis_scale, (u, scale, v), repeat),
            (f"psd_project (96 blocks, m={2 * n})", kernels.psd_project, (blocks,), repeat),
            (f"rk4_entropy_step (n={n})", kernels.rk4_entropy_step,
             (ls, rho, 1e-3, kernels.KIND_LOG, 1e-11), repeat),
        ]
    basis2 = lindblad.pauli_basis()
    r0 = linalg.random_density(rng, 2)[None]
    r1 = linalg.random_density(rng, 2)[None]
    solver = DirectTransport(basis2, r0, r1, 16, kind="log")
    kargs = solver._kernel_args()
    a0 = np.ascontiguousarray(solver._init_coords())
    cases += [
        ("path_energy (T=16, n=2, log)", kernels.path_energy,
         (a0, *kargs), max(3, repeat // 3)),
        ("path_energy_grad (T=16, n=2, log)", kernels.path_energy_grad,
         (a0, *kargs, 1e-5), max(2, repeat // 5)),
    ]
    basis3 = lindblad.gell_mann_basis(3)
    s0 = linalg.random_density(rng, 3)[None]
    s1 = linalg.random_density(rng, 3)[None]
    solver3 = DirectTransport(basis3, s0, s1, 16, kind="anticomm")
    a3 = np.ascontiguousarray(solver3._init_coords())
    cases.append(("path_energy_grad (T=16, n=3, anticomm)",
                  kernels.path_energy_grad,
                  (a3, *solver3._kernel_args(), 1e-5), 2))
    return cases


def run_timings(repeat):
    out = {}
    for name, fn, args, reps in build_cases(repeat):
        fn(*args)  # warmup (and JIT when enabled)
        times = []
        for _ in range(reps):
            t0 = time.perf_counter()
            fn(*args)
            times.append(time.perf_counter() - t0)
        out[name] = float(np.median(times))
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=25)
    ap.add_argument("--emit-json", action="store_true",
                    help="print timings as JSON (used by the subprocess)")
    args = ap.parse_args()

    if args.emit_json:
        print(json.dumps(run_timings(args.repeat)))
        return

    from qot import kernels

    if not kernels.NUMBA_ENABLED:
        print("numba is disabled in this process; set QOT_NUMBA=1 to compare.")
        print(json.dumps(run_timings(args.repeat), indent=2))
        return

    fast = run_timings(args.repeat)
    env = dict(os.environ, QOT_NUMBA="0")
    proc = subprocess.run(
        [sys.executable, os.path.abspath(__file__), "--emit-json",
         "--repeat", str(max(2, args.repeat // 3))],
        capture_output=True, text=True, env=env, check=True)
    slow = json.loads(proc.stdout.strip().splitlines()[-1])

    width = max(len(k) for k in fast)
    print(f"{'kernel':<{width}}  {'numba':>10}  {'numpy':>10}  {'speedup':>8}")
    for name in fast:
        f, s = fast[name], slow[name]
        print(f"{name:<{width}}  {f * 1e6:>8.1f}us  {s * 1e6:>8.1f}us  {s / f:>7.1f}x")


if __name__ == "__main__":
    main()
