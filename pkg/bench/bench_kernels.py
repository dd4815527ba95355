#!/usr/bin/env python3
"""Benchmark the numba-compiled kernels against the pure-numpy fallback.

Times each hot kernel at the shapes the training loop actually uses, plus a
full training epoch per backend. Run from the repo root:

    python bench/bench_kernels.py [--repeats 2000]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from colearn import _kernels as kernels
from colearn.data import synth_blobs
from colearn.learner import Adam, Architecture, Learner


def time_call(fn, *args, repeats: int) -> float:
    fn(*args)  # warmup / trigger jit
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats * 1e6  # microseconds


def bench_kernels(repeats: int) -> None:
    rng = np.random.default_rng(0)
    n_params = 545_810  # two ReLU hidden layers (500, 300) on 784 -> 10
    theta = rng.standard_normal(n_params)
    g = rng.standard_normal(n_params)
    m = np.zeros(n_params)
    v = np.zeros(n_params)
    logits = rng.standard_normal((10, 10))
    probs = kernels.backend_impls("numpy")["softmax_rows"](logits)
    labels = rng.integers(0, 10, size=10).astype(np.int64)
    acts = rng.standard_normal((10, 500))
    ups = rng.standard_normal((10, 500))
    stacked = rng.random((30, 10, 10))
    weights = np.full(30, 1.0 / 30)

    # state buffers mutate across repeats; the arithmetic cost is unchanged
    cases = [
        ("adam_step (545k params)", "adam_step",
         lambda impl: impl(theta, g, m, v, 1, 1e-3, 0.9, 0.999, 1e-8)),
        ("sgd_step (545k params)", "sgd_step", lambda impl: impl(theta, g, 1e-3)),
        ("softmax_rows (10x10)", "softmax_rows", lambda impl: impl(logits)),
        ("xent_mean (10x10)", "xent_mean", lambda impl: impl(probs, labels)),
        ("dlogits (10x10)", "dlogits", lambda impl: impl(probs, labels)),
        ("relu (10x500)", "relu", lambda impl: impl(acts)),
        ("relu_grad (10x500)", "relu_grad", lambda impl: impl(ups, np.abs(acts))),
        ("fuse_rows (30x10x10)", "fuse_rows", lambda impl: impl(stacked, weights)),
        ("argmax_rows (10x10)", "argmax_rows", lambda impl: impl(probs)),
    ]

    print(f"{'kernel':<28}{'numpy us':>12}{'numba us':>12}{'speedup':>10}")
    for label, name, runner in cases:
        np_impl = kernels.backend_impls("numpy")[name]
        t_np = time_call(lambda: runner(np_impl), repeats=repeats)
        if "numba" in kernels.available_backends():
            nb_impl = kernels.backend_impls("numba")[name]
            t_nb = time_call(lambda: runner(nb_impl), repeats=repeats)
            print(f"{label:<28}{t_np:>12.2f}{t_nb:>12.2f}{t_np / t_nb:>9.2f}x")
        else:
            print(f"{label:<28}{t_np:>12.2f}{'n/a':>12}{'n/a':>10}")


def bench_epoch() -> None:
    ds = synth_blobs(50, 10, 784, 5.0, seed=3)
    print(f"\n{'training epoch (HL2, 500 samples, batch 10)':<44}{'ms/epoch':>10}")
    for backend in kernels.available_backends():
        kernels.set_backend(backend)
        learner = Learner.create(Architecture("HL2", 784, 10), seed=1, rule=Adam())
        learner.train(ds, batch_size=10, epochs=1, seed=0)  # warmup
        t0 = time.perf_counter()
        for _ in range(3):
            learner.train(ds, batch_size=10, epochs=1, seed=0)
        ms = (time.perf_counter() - t0) / 3 * 1e3
        print(f"  {backend:<42}{ms:>10.1f}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=500)
    args = parser.parse_args()
    print(f"available backends: {kernels.available_backends()}")
    bench_kernels(args.repeats)
    bench_epoch()


if __name__ == "__main__":
    main()
