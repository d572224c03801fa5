#!/usr/bin/env python3
"""Benchmark the compiled kernel extension against the pure-numpy fallback.

Times each hot kernel over a fixed random workload and verifies that both
implementations return bit-identical results on every sample. Run from the
repository root after an editable install:

    python3 benchmarks/bench_kernels.py [--samples 20000] [--repeats 5]
"""

import argparse
import time

import numpy as np

from mobman._kernels import COMPILED, pure

try:
    from mobman._kernels import _core
except ImportError:
    _core = None


def make_workload(samples: int, rng: np.random.Generator) -> dict:
    quats = rng.normal(size=(samples, 4))
    quats /= np.linalg.norm(quats, axis=1, keepdims=True)
    quats[quats[:, 0] < 0] *= -1.0
    return {
        "quats_a": quats,
        "quats_b": np.roll(quats, 1, axis=0),
        "vecs": rng.normal(size=(samples, 3)),
        "rotvecs": rng.normal(scale=1.2, size=(samples, 3)),
        "segs": rng.uniform(-1.0, 1.0, size=(samples, 4, 3)),
    }


CASES = {
    "quat_mul": lambda impl, w, i: impl.quat_mul(w["quats_a"][i], w["quats_b"][i]),
    "quat_rotate": lambda impl, w, i: impl.quat_rotate(w["quats_a"][i], w["vecs"][i]),
    "quat_from_rotvec": lambda impl, w, i: impl.quat_from_rotvec(w["rotvecs"][i]),
    "rotvec_from_quat": lambda impl, w, i: impl.rotvec_from_quat(w["quats_a"][i]),
    "segment_closest_points": lambda impl, w, i: impl.segment_closest_points(*w["segs"][i]),
}


def time_case(impl, case, workload, samples, repeats):
    fn = CASES[case]
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for i in range(samples):
            fn(impl, workload, i)
        best = min(best, time.perf_counter() - t0)
    return best / samples


def check_parity(case, workload, samples):
    fn = CASES[case]
    for i in range(samples):
        a, b = fn(_core, workload, i), fn(pure, workload, i)
        if isinstance(a, tuple):
            ok = all(np.array_equal(x, y) for x, y in zip(a, b))
        else:
            ok = np.array_equal(a, b)
        if not ok:
            return False
    return True


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--samples", type=int, default=20000)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if _core is None:
        print("compiled extension not built; nothing to compare")
        return 1
    print(f"compiled extension active in package: {COMPILED}")
    workload = make_workload(args.samples, np.random.default_rng(args.seed))

    header = f"{'kernel':<24}{'pure (us)':>12}{'compiled (us)':>15}{'speedup':>10}{'bit-identical':>16}"
    print(header)
    print("-" * len(header))
    for case in CASES:
        t_pure = time_case(pure, case, workload, args.samples, args.repeats)
        t_core = time_case(_core, case, workload, args.samples, args.repeats)
        parity = check_parity(case, workload, min(args.samples, 2000))
        print(
            f"{case:<24}{t_pure * 1e6:>12.2f}{t_core * 1e6:>15.2f}"
            f"{t_pure / t_core:>9.1f}x{'yes' if parity else 'NO':>16}"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
