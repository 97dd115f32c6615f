"""Benchmark the compiled kernel backend against the numpy fallback.

Runs the four hot kernels on representative problem sizes in two child
processes, one per ``BLADENV_NUMBA`` setting, and prints a timing table
with the speedup of the compiled path.  Invoke from the repository
root:

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_benchmarks(repeat):
    from bladenv import kernels
    from bladenv.surrogate import build_index_set, legendre_tables

    rng = np.random.Generator(np.random.Philox(0))
    results = {"backend": kernels.backend_name()}

    # symmetric eigensolve: envelope-covariance sized matrix
    g = rng.normal(size=(120, 120))
    sym = g @ g.T / 120.0

    def jacobi():
        a = sym.copy()
        v = np.eye(a.shape[0])
        kernels.jacobi_sweeps(a, v, 1e-12 * np.abs(sym).max(), 50)

    jacobi()  # warm the compile cache before timing
    results["jacobi_sweeps(120x120)"] = _time(jacobi, repeat)

    # hit-and-run chain: 19-dimensional inactive box, 100k steps
    dim = 19
    a_mat = np.vstack([np.eye(dim), -np.eye(dim)])
    b = np.ones(2 * dim)
    steps = 100_000
    directions = rng.normal(size=(steps, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    uniforms = rng.uniform(size=steps)
    out = np.empty((steps // 5, dim))

    def chain():
        kernels.hit_and_run_chain(
            a_mat, b, np.zeros(dim), directions, uniforms, 100, 5, out
        )

    chain()
    results[f"hit_and_run_chain({steps} steps)"] = _time(chain, repeat)

    # basis matrix and ridge gradients: the d=20, p=3 surrogate shape
    basis = build_index_set("total-order", 20, 3)
    x = rng.uniform(-1.0, 1.0, size=(800, 20))
    tables, deriv = legendre_tables(x, basis.max_degree, deriv=True)
    indices = basis.indices
    psi = np.empty((x.shape[0], basis.n_terms))

    def basis_fill():
        kernels.basis_matrix_fill(indices, tables, psi)

    basis_fill()
    results[f"basis_matrix(800x{basis.n_terms})"] = _time(basis_fill, repeat)

    coeffs = np.zeros(basis.n_terms)
    coeffs[rng.choice(basis.n_terms, size=24, replace=False)] = rng.normal(size=24)
    grad = np.zeros((x.shape[0], 20))

    def gradients():
        grad[:] = 0.0
        kernels.ridge_gradients_fill(indices, tables, deriv, coeffs, grad)

    gradients()
    results["ridge_gradients(800x20, 24 nonzero)"] = _time(gradients, repeat)
    return results


def _child(flag, repeat):
    env = dict(os.environ, BLADENV_NUMBA=flag, BLADENV_BENCH_CHILD="1")
    proc = subprocess.run(
        [sys.executable, os.path.abspath(__file__), "--repeat", str(repeat)],
        env=env, capture_output=True, text=True, check=True,
    )
    return json.loads(proc.stdout.splitlines()[-1])


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5,
                        help="timing repetitions per kernel (best is kept)")
    args = parser.parse_args()

    if os.environ.get("BLADENV_BENCH_CHILD"):
        print(json.dumps(run_benchmarks(args.repeat)))
        return

    compiled = _child("1", args.repeat)
    fallback = _child("0", args.repeat)
    if compiled.pop("backend") == fallback.pop("backend"):
        print("note: numba unavailable, both runs used the numpy fallback")

    width = max(len(k) for k in compiled)
    print(f"{'kernel':<{width}}  {'numba':>10}  {'numpy':>10}  {'speedup':>8}")
    for key in compiled:
        a, b = compiled[key], fallback[key]
        print(f"{key:<{width}}  {a * 1e3:>8.2f}ms  {b * 1e3:>8.2f}ms  "
              f"{b / a:>7.1f}x")


if __name__ == "__main__":
    main()
