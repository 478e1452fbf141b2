#!/usr/bin/env python
"""Benchmark the compiled voting kernels against the numpy reference.

Runs each kernel on identical inputs and reports per-call wall time plus
the speedup, verifying along the way that both backends return identical
accumulators.

Usage: python benchmarks/bench_voting.py [--points N] [--repeat K]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from primfit.kernels import _reference as ref

try:
    from primfit.kernels import _voting as fast
except ImportError:
    fast = None


def _time(fn, *args, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--points", type=int, default=2000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    n = args.points
    points = rng.normal(size=(n, 3))
    points2 = rng.normal(size=(n, 2))
    normals = rng.normal(size=(n, 3))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    offsets = np.einsum("ij,ij->i", normals, points)

    theta = (np.arange(64) + 0.5) * (2 * np.pi / 64)
    phi = (np.arange(64) + 0.5) * (np.pi / 64)
    plane_args = (
        points,
        np.cos(theta),
        np.sin(theta),
        np.cos(phi),
        np.sin(phi),
        -4.0,
        8.0 / 64,
        64,
    )
    circle_args = (
        points2,
        (np.arange(64) + 0.5) * (8.0 / 64) - 4.0,
        (np.arange(64) + 0.5) * (8.0 / 64) - 4.0,
        0.0,
        4.0 / 64,
        64,
    )
    radial = np.hypot(points[:, 0], points[:, 1])
    torus_args = (
        radial,
        points[:, 2].copy(),
        0.0,
        2.0 / 100,
        100,
        (np.arange(100) + 0.5) * (3.0 / 100),
    )
    box_args = (
        normals,
        offsets,
        np.array([-4.0, -4.0, -4.0]),
        np.full(3, 8.0 / 128),
        np.array([128, 128, 128], dtype=np.int64),
    )

    cases = [
        ("vote_plane", plane_args),
        ("vote_circle", circle_args),
        ("vote_torus", torus_args),
        ("vote_planes_box", box_args),
    ]

    if fast is None:
        print("compiled kernels unavailable; only the numpy reference will run")
    print(f"{n} points, best of {args.repeat} runs\n")
    header = f"{'kernel':<18} {'numpy':>10} {'compiled':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, call_args in cases:
        ref_fn = getattr(ref, name)
        t_ref = _time(ref_fn, *call_args, repeat=args.repeat)
        if fast is not None:
            fast_fn = getattr(fast, name)
            counts_ref = ref_fn(*call_args)
            counts_fast = fast_fn(*call_args)
            if not np.array_equal(counts_ref, counts_fast):
                raise SystemExit(f"{name}: backends disagree")
            t_fast = _time(fast_fn, *call_args, repeat=args.repeat)
            print(f"{name:<18} {t_ref * 1e3:>8.2f}ms {t_fast * 1e3:>8.2f}ms {t_ref / t_fast:>7.1f}x")
        else:
            print(f"{name:<18} {t_ref * 1e3:>8.2f}ms {'-':>10} {'-':>8}")


if __name__ == "__main__":
    main()
