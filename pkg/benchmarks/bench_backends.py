#!/usr/bin/env python3
"""Benchmark the training kernels: compiled extension vs numpy fallback.

Times the fused train_loop (forward + backward + Adam per epoch) on a few
workload shapes and cross-checks that both backends land on the same loss.

    python benchmarks/bench_backends.py [--epochs N] [--repeats K]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from jitminer.model import AdamState, available_backends, default_layer_sizes, init_network

WORKLOADS = [
    ("small   (60 rows,  8 wide, 3 layers)", 60, 8, 3),
    ("default (140 rows, 32 wide, 9 layers)", 140, 32, 9),
    ("wide    (500 rows, 64 wide, 9 layers)", 500, 64, 9),
]


def run_backend(backend, rows: int, width: int, layers: int, epochs: int, seed: int):
    rng = np.random.default_rng(seed)
    sizes = default_layer_sizes(6, hidden_width=width, weight_layers=layers)
    X = rng.normal(size=(rows, 6))
    y = rng.integers(0, 2, rows).astype(float)
    params = init_network(sizes, seed=seed)
    state = AdamState.for_params(params)
    start = time.perf_counter()
    losses = backend.train_loop(
        params.weights, params.biases, X, y,
        state.m_w, state.v_w, state.m_b, state.v_b,
        0, epochs, 0.001, 0.9, 0.999, 1e-8, 1.0,
    )
    elapsed = time.perf_counter() - start
    return elapsed, float(losses[-1])


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--epochs", type=int, default=1000)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    backends = available_backends()
    names = sorted(backends)
    print(f"backends: {', '.join(names)}   epochs: {args.epochs}\n")
    if "compiled" not in backends:
        print("note: compiled extension not built "
              "(python setup.py build_ext --inplace); timing fallback only\n")

    header = f"{'workload':<40}" + "".join(f"{n:>12}" for n in names) + f"{'loss agree':>12}"
    print(header)
    print("-" * len(header))
    for label, rows, width, layers in WORKLOADS:
        times = {}
        finals = {}
        for name in names:
            best = min(
                run_backend(backends[name], rows, width, layers, args.epochs, seed=7)
                for _ in range(args.repeats)
            )
            times[name], finals[name] = best
        spread = max(finals.values()) - min(finals.values())
        row = f"{label:<40}"
        row += "".join(f"{times[n]:>11.3f}s" for n in names)
        row += f"{spread:>12.2e}"
        print(row)
    print("\ntimes are best-of-repeats wall seconds for the full training loop;")
    print("'loss agree' is the spread of the final epoch loss across backends.")


if __name__ == "__main__":
    main()
