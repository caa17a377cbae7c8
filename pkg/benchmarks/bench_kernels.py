#!/usr/bin/env python3
"""Benchmark the Gibbs-sweep kernels: compiled extension vs pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--quick]

Sweeps dominate every experiment in this package, so the ratio below is
roughly the end-to-end speedup of installing the extension.
"""

import argparse
import time

import numpy as np

import csmci
from csmci import kernels
from csmci.rng import as_generator


def bench_single_chain(backend, p, n_sweeps: int) -> float:
    indptr, targets, weights = p.arc_arrays()
    u = as_generator(42).random((n_sweeps, p.graph.n))
    state = np.ones(p.graph.n)
    t0 = time.perf_counter()
    backend.run_sweeps_binary(state, p.h, indptr, targets, weights, u)
    return n_sweeps * p.graph.n / (time.perf_counter() - t0)


def bench_bank(backend, p, n_chains: int, n_sweeps: int) -> float:
    indptr, targets, weights = p.arc_arrays()
    u = as_generator(43).random((n_chains, n_sweeps, p.graph.n))
    states = np.ascontiguousarray(
        as_generator(44).choice([-1.0, 1.0], size=(n_chains, p.graph.n))
    )
    t0 = time.perf_counter()
    backend.advance_bank_binary(states, p.h, indptr, targets, weights, u)
    return n_chains * n_sweeps * p.graph.n / (time.perf_counter() - t0)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="smaller workloads")
    args = parser.parse_args()
    scale = 10 if args.quick else 1

    cases = [
        ("torus 4x5", csmci.random_params(csmci.build_torus(4, 5), 0.3, seed=1), 200_000 // scale),
        ("lattice 12x12", csmci.random_params(csmci.build_lattice_free(12, 12), 0.3, seed=1), 40_000 // scale),
    ]
    backends = [("python", kernels.get_backend("python"))]
    if kernels.HAVE_COMPILED:
        backends.insert(0, ("cython", kernels.get_backend("cython")))
    else:
        print("note: compiled extension unavailable; benchmarking the fallback only")

    print(f"{'case':<28}{'backend':<10}{'site updates/s':>16}")
    ratios = {}
    for name, params, sweeps in cases:
        for bname, backend in backends:
            n_sw = sweeps if bname == "cython" else max(200, sweeps // 50)
            rate = bench_single_chain(backend, params, n_sw)
            ratios.setdefault(name, {})[bname] = rate
            print(f"{name + ' single chain':<28}{bname:<10}{rate:>16,.0f}")
        for bname, backend in backends:
            chains = 1000 if bname == "cython" else 50
            rate = bench_bank(backend, params, chains, max(1, 2000 // scale // (chains // 25 + 1)))
            print(f"{name + ' chain bank':<28}{bname:<10}{rate:>16,.0f}")
    if kernels.HAVE_COMPILED:
        for name, r in ratios.items():
            print(f"{name}: compiled/pure single-chain speedup {r['cython'] / r['python']:.1f}x")


if __name__ == "__main__":
    main()
