"""Timing comparison of the compiled kernels against the numpy fallback.

Run from the repo root after installing the package:

    python3 benchmarks/bench_kernels.py

The per-kernel section times both implementations in-process. The end-to-end
section runs the full estimation pipeline in a subprocess with
SCALEVO_NO_NATIVE=1 so the import-time backend switch is exercised for real.
"""

import os
import subprocess
import sys
import time

import numpy as np

from scalevo import kernels
from scalevo.synth import SynthConfig, forward_pose, generate_frame_pair, run_method

SIZES = (50, 200, 1000, 5000)
REPEATS = 200


def _data(n: int, rng: np.random.Generator):
    H = np.eye(3) + 0.01 * rng.normal(size=(3, 3))
    F = rng.normal(size=(3, 3))
    x1 = rng.uniform(0.0, 1200.0, (n, 2))
    x2 = x1 + rng.normal(0.0, 2.0, (n, 2))
    return H, np.linalg.inv(H), F, x1, x2


def _time(fn, repeats: int = REPEATS) -> float:
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def bench_kernels() -> None:
    rng = np.random.default_rng(0)
    print(f"backend selected at import: {kernels.BACKEND}")
    print(f"{'kernel':<26}{'n':>6}{'numpy':>12}{'native':>12}{'speedup':>9}")
    for n in SIZES:
        H, Hinv, F, x1, x2 = _data(n, rng)
        cases = [
            (
                "symmetric_transfer_errors",
                lambda: kernels.symmetric_transfer_errors_numpy(H, Hinv, x1, x2),
                lambda: kernels._native.symmetric_transfer_errors(H, Hinv, x1, x2),
            ),
            (
                "symmetric_huber_cost",
                lambda: kernels.symmetric_huber_cost_numpy(H, Hinv, x1, x2, 1.0),
                lambda: kernels._native.symmetric_huber_cost(H, Hinv, x1, x2, 1.0),
            ),
            (
                "sampson_errors",
                lambda: kernels.sampson_errors_numpy(F, x1, x2),
                lambda: kernels._native.sampson_errors(F, x1, x2),
            ),
        ]
        for name, numpy_fn, native_fn in cases:
            t_np = _time(numpy_fn)
            if kernels._native is None:
                print(f"{name:<26}{n:>6}{t_np * 1e6:>10.1f}us{'-':>12}{'-':>9}")
                continue
            t_nat = _time(native_fn)
            print(
                f"{name:<26}{n:>6}{t_np * 1e6:>10.1f}us{t_nat * 1e6:>10.1f}us"
                f"{t_np / t_nat:>8.1f}x"
            )


def _pipeline_seconds() -> float:
    cfg = SynthConfig(noise_sigma=1.0, speed_mode="high")
    pose = forward_pose(cfg)
    rng = np.random.default_rng(7)
    pairs = [generate_frame_pair(cfg, pose, rng) for _ in range(20)]
    t0 = time.perf_counter()
    for i, pair in enumerate(pairs):
        run_method("sparse_opt", pair, cfg, seed=i)
    return (time.perf_counter() - t0) / len(pairs)


def bench_pipeline() -> None:
    print()
    print("full sparse_opt pipeline, 20 synthetic frame pairs:")
    here = _pipeline_seconds()
    print(f"  {kernels.BACKEND:<8}{here * 1e3:8.1f} ms/frame")
    if kernels.BACKEND != "native":
        return
    code = (
        "from benchmarks.bench_kernels import _pipeline_seconds;"
        "print(_pipeline_seconds())"
    )
    env = dict(os.environ, SCALEVO_NO_NATIVE="1")
    out = subprocess.run(
        [sys.executable, "-c", code],
        capture_output=True,
        text=True,
        env=env,
        cwd=os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
    )
    fallback = float(out.stdout.strip().splitlines()[-1])
    print(f"  {'numpy':<8}{fallback * 1e3:8.1f} ms/frame  ({fallback / here:.1f}x)")


if __name__ == "__main__":
    bench_kernels()
    bench_pipeline()
