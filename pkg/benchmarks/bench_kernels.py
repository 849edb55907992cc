"""Time the numba and numpy kernel backends on telecom-sized workloads.

    python3 benchmarks/bench_kernels.py [--repeat 20] [--batch 16]

Prints one line per (kernel, backend) with the best-of-``repeat`` time and
the numpy/numba speed ratio.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from qkanseq import kernels


def workloads(batch):
    rng = np.random.default_rng(0)
    # four stacked QKAN gate layers, d=2 -> 4m with m=1, L=1 (telecom QKAN-LSTM)
    d, m, L = 2, 4, 1
    u = rng.normal(size=(batch, d))
    w, b = rng.normal(size=(d, m, L)), np.zeros((d, m, L))
    theta = rng.uniform(-np.pi, np.pi, (d, m, L + 1, 2))
    g = rng.normal(size=(batch, m))
    # SHM QKAN-LSTM: d=3, 4m=8
    d2, m2 = 3, 8
    u2 = rng.normal(size=(batch, d2))
    w2, b2 = rng.normal(size=(d2, m2, L)), np.zeros((d2, m2, L))
    th2 = rng.uniform(-np.pi, np.pi, (d2, m2, L + 1, 2))
    g2 = rng.normal(size=(batch, m2))
    # telecom QLSTM VQC: 5 qubits, depth 4
    v = rng.uniform(0, 1, (batch, 5))
    ang = rng.uniform(-1, 1, (5, 5))
    gv = rng.normal(size=(batch, 5))
    return {
        "qkan_forward d2m4": lambda: kernels.qkan_forward(u, w, b, theta),
        "qkan_vjp d2m4": lambda: kernels.qkan_vjp(u, w, b, theta, g),
        "qkan_forward d3m8": lambda: kernels.qkan_forward(u2, w2, b2, th2),
        "qkan_vjp d3m8": lambda: kernels.qkan_vjp(u2, w2, b2, th2, g2),
        "vqc_expect 5q d4": lambda: kernels.vqc_expect(v, ang),
        "vqc_vjp 5q d4": lambda: kernels.vqc_vjp(v, ang, gv),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--number", type=int, default=200)
    ap.add_argument("--batch", type=int, default=16)
    args = ap.parse_args(argv)

    times = {}
    for name in kernels.BACKENDS:
        with kernels.use_backend(name):
            for label, fn in workloads(args.batch).items():
                fn()  # compile / warm caches
                best = min(timeit.repeat(fn, repeat=args.repeat, number=args.number)) / args.number
                times[(label, name)] = best
    print(f"{'kernel':<20} {'backend':<7} {'us/call':>10} {'numpy/numba':>12}")
    for label in workloads(args.batch):
        for name in kernels.BACKENDS:
            t = times[(label, name)]
            ratio = ""
            if name == "numba" and (label, "numpy") in times:
                ratio = f"{times[(label, 'numpy')] / t:.1f}x"
            print(f"{label:<20} {name:<7} {t * 1e6:>10.1f} {ratio:>12}")


if __name__ == "__main__":
    main()
