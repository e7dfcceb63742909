"""Compare the numba and pure-numpy kernel paths.

    python3 benchmarks/bench_kernels.py [--repeats 7] [--json out.json]

Each kernel is called once to trigger JIT compilation, then timed over
``--repeats`` runs; the median is reported. Outputs of the two paths are
checked against each other before timing.
"""

import argparse
import json
import sys
import time

import numpy as np

from footfall import kernels as K
from footfall._accel import HAVE_NUMBA
from footfall.classify.svm import kernel_matrix


def median_ms(fn, args, repeats):
    fn(*args)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        times.append((time.perf_counter() - t0) * 1e3)
    return float(np.median(times))


def cases(rng):
    x = rng.normal(size=4576)  # 5.2 s at 880 Hz
    a = rng.normal(size=190)
    b = rng.normal(size=190)
    X = rng.normal(size=(200, 9))
    y = np.where(X[:, 0] + 0.5 * X[:, 1] ** 2 > 0.3, 1.0, -1.0)
    Km = kernel_matrix(X, X, "rbf", 1.0 / 9)
    return [
        ("sta_lta", K.sta_lta_nb, K.sta_lta_np, (x, 64, 320, 1e-12)),
        ("mer", K.mer_nb, K.mer_np, (x, 190, 1e-12)),
        ("ccw", K.ccw_nb, K.ccw_np, (x, 96, 96, 1e-12)),
        ("dtw 190x190", K.dtw_nb, K.dtw_np, (a, b)),
        ("smo n=200", K.smo_nb, K.smo_np, (Km, y, 1.0, 1e-3, 100_000)),
    ]


def _first(out):
    return out[0] if isinstance(out, tuple) else out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=7)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", help="also write results to this file")
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not installed; nothing to compare", file=sys.stderr)
        return 1

    rows = []
    print(f"{'kernel':<14}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for name, nb, np_, a in cases(np.random.default_rng(args.seed)):
        ref, got = _first(np_(*a)), _first(nb(*a))
        if not np.allclose(ref, got, rtol=1e-9, atol=1e-12, equal_nan=True):
            print(f"{name}: numba and numpy outputs differ", file=sys.stderr)
            return 2
        t_nb = median_ms(nb, a, args.repeats)
        t_np = median_ms(np_, a, args.repeats)
        rows.append({"kernel": name, "numba_ms": t_nb, "numpy_ms": t_np, "speedup": t_np / t_nb})
        print(f"{name:<14}{t_nb:>12.3f}{t_np:>12.3f}{t_np / t_nb:>9.1f}x")

    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
