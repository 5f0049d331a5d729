"""Benchmark the numba kernels against the pure-numpy fallback.

Usage:
    python benchmarks/bench_kernels.py              # kernel-level table
    python benchmarks/bench_kernels.py --compare --model fixtures/toyshapes/model.swmf
        # also runs a full-model forward pass in two subprocesses, one per
        # SWINFER_BACKEND value, and prints the side-by-side

The warmup pass absorbs numba's JIT compilation, mirroring how the
latency profiler treats it.
"""

import argparse
import json
import os
import statistics
import subprocess
import sys
import time

import numpy as np

from swinfer.engine import kernels_numba, kernels_numpy

CONV_CASES = [
    # name, input (c,h,w), filters n, k, stride, pad
    ("conv 3x224x224 -> 96 11x11/4", (3, 224, 224), 96, 11, 4, 2),
    ("conv 96x27x27 -> 256 5x5", (96, 27, 27), 256, 5, 1, 2),
    ("conv 256x13x13 -> 384 3x3", (256, 13, 13), 384, 3, 1, 1),
]
POOL_CASES = [
    ("pool 96x55x55 3x3/2", (96, 55, 55), 3, 2),
    ("pool 256x27x27 3x3/2", (256, 27, 27), 3, 2),
]


def time_fn(fn, repeats=5):
    fn()  # warmup (JIT + page faults)
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - t0) * 1000)
    return statistics.median(samples)


def kernel_table(repeats):
    rng = np.random.default_rng(0)
    rows = []
    for name, shape, n, k, stride, pad in CONV_CASES:
        x = rng.normal(size=shape).astype(np.float32)
        w = rng.normal(size=(n, shape[0], k, k)).astype(np.float32)
        b = rng.normal(size=n).astype(np.float32)
        t_np = time_fn(lambda: kernels_numpy.conv2d(x, w, b, stride, pad), repeats)
        t_nb = time_fn(lambda: kernels_numba.conv2d(x, w, b, stride, pad), repeats)
        rows.append((name, t_np, t_nb))
    for name, shape, k, stride in POOL_CASES:
        x = rng.normal(size=shape).astype(np.float32)
        t_np = time_fn(lambda: kernels_numpy.maxpool2d(x, k, k, stride), repeats)
        t_nb = time_fn(lambda: kernels_numba.maxpool2d(x, k, k, stride), repeats)
        rows.append((name, t_np, t_nb))
    print(f"{'case':34s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for name, t_np, t_nb in rows:
        print(f"{name:34s} {t_np:10.3f} {t_nb:10.3f} {t_np / t_nb:7.2f}x")


def model_forward_ms(model_path, repeats):
    from swinfer import modelgraph as mg
    from swinfer.engine import active_backend

    graph = mg.load_model(model_path)
    x = np.random.default_rng(1).normal(size=graph.input_shape).astype(np.float32)
    ms = time_fn(lambda: mg.forward(graph, x), repeats)
    return {"backend": active_backend(), "forward_ms": ms}


def compare_model(model_path, repeats):
    results = {}
    for backend in ("numpy", "numba"):
        env = dict(os.environ, SWINFER_BACKEND=backend)
        out = subprocess.run(
            [sys.executable, __file__, "--model", model_path, "--repeats", str(repeats),
             "--json"],
            env=env, capture_output=True, text=True, check=True,
        )
        results[backend] = json.loads(out.stdout)
        assert results[backend]["backend"] == backend, results[backend]
    np_ms = results["numpy"]["forward_ms"]
    nb_ms = results["numba"]["forward_ms"]
    print(f"\nfull forward of {model_path}:")
    print(f"{'numpy':>8s}: {np_ms:8.3f} ms\n{'numba':>8s}: {nb_ms:8.3f} ms"
          f"   ({np_ms / nb_ms:.2f}x)")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--model", help="SWMF file for a whole-model forward comparison")
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--compare", action="store_true",
                    help="run the model forward under both backends (subprocesses)")
    ap.add_argument("--json", action="store_true",
                    help="model timing as JSON on stdout (used by --compare)")
    args = ap.parse_args()
    if args.json:
        print(json.dumps(model_forward_ms(args.model, args.repeats)))
        return
    kernel_table(args.repeats)
    if args.compare and args.model:
        compare_model(args.model, args.repeats)


if __name__ == "__main__":
    main()
