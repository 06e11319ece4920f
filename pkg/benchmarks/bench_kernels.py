"""Compare the compiled and pure-Python kernels on the same workloads.

    python benchmarks/bench_kernels.py [--depth 14] [--repeat 3]
"""

from __future__ import annotations

import argparse
import time
from pathlib import Path

import numpy as np

from ccdim import _backend, dimension_enclosure, load_system, partition_sum

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def workloads(depth: int):
    perturbed = load_system(CONFIGS / "perturbed.json")
    logistic = load_system(CONFIGS / "logistic.json")
    rng = np.random.default_rng(0)
    words = rng.integers(0, 2, size=(1 << 16, depth)).astype(np.int32)
    xs = rng.random(1 << 16)
    logd = np.log(rng.random(1 << 20))
    k = lambda: _backend.kernels  # noqa: E731

    def fresh(system):
        # bypass the level cache so every run recomputes the intervals
        return load_system(CONFIGS / f"{system}.json")

    return [
        ("fold, explicit branches, 65536 words",
         lambda: k().fold(perturbed.table, perturbed.stage_sequence(depth), words, xs, True)),
        ("fold, forward branches, 65536 words",
         lambda: k().fold(logistic.table, logistic.stage_sequence(depth), words, xs, True)),
        ("log_power_sum, 2^20 terms", lambda: k().log_power_sum(logd, 0.65)),
        (f"partition_sum, perturbed depth {depth}",
         lambda: partition_sum(fresh("perturbed"), depth, 0.65)),
        (f"dimension_enclosure, perturbed depth {depth}",
         lambda: dimension_enclosure(fresh("perturbed"), depth, xi_samples=0)),
    ]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--depth", type=int, default=14)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    names = _backend.available()
    rows = []
    for label, fn in workloads(args.depth):
        times = {}
        for name in names:
            with _backend.use_backend(name):
                times[name] = best_of(fn, args.repeat)
        rows.append((label, times))
    width = max(len(label) for label, _ in rows)
    print(f"{'workload':<{width}}  " + "  ".join(f"{n:>10}" for n in names) + "     speedup")
    for label, times in rows:
        cells = "  ".join(f"{times[n] * 1e3:>8.1f}ms" for n in names)
        speed = ""
        if "cython" in times and "python" in times:
            speed = f"{times['python'] / times['cython']:>10.1f}x"
        print(f"{label:<{width}}  {cells}  {speed}")


if __name__ == "__main__":
    main()
