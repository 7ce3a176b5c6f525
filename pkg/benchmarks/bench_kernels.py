"""Compare the compiled and numpy kernel backends on the capital simulation.

Usage: python3 benchmarks/bench_kernels.py [--paths N] [--repeat R]
"""

import argparse
import time

import numpy as np

from opcred.capital import CellLossModel, HighFrequencyModel, TruncatedLognormal, simulate_cell

CASES = {
    "sparse (rate 0.1, tail 2)": CellLossModel("c", 0.1, 2.0, 1.0),
    "moderate (rate 3, tail 1.5)": CellLossModel("c", 3.0, 1.5, 1.0),
    "dense (rate 300, tail 3)": CellLossModel("c", 300.0, 3.0, 1.0),
    "with hf (rate 2 + hf 50)": CellLossModel(
        "c", 2.0, 2.0, 1.0, HighFrequencyModel(50.0, TruncatedLognormal(-1.0, 0.6, 1.0))
    ),
}


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--paths", type=int, default=1_000_000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    try:
        from opcred.kernels import _ckernels  # noqa: F401
    except ImportError:
        print("compiled extension not built; only the numpy backend is available")
        backends = ["python"]
    else:
        backends = ["cython", "python"]

    print(f"{'case':32}" + "".join(f"{b + ' [s]':>14}" for b in backends) + f"{'speedup':>10}{'max rel diff':>14}")
    for name, model in CASES.items():
        paths = args.paths if model.lf_rate < 100 else args.paths // 20
        res = {b: best_of(lambda b=b: simulate_cell(model, paths, seed=1, backend=b), args.repeat) for b in backends}
        row = f"{name:32}" + "".join(f"{res[b][0]:14.3f}" for b in backends)
        if len(backends) == 2:
            a, p = res["cython"][1], res["python"][1]
            diff = float(np.max(np.abs(a - p) / np.maximum(np.abs(p), 1e-300)))
            row += f"{res['python'][0] / res['cython'][0]:9.1f}x{diff:14.1e}"
        print(row)


if __name__ == "__main__":
    main()
