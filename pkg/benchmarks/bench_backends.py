"""Compare the compiled and numpy tree kernels.

Grows the same forest with both backends, checks that the fitted trees and
the per-tree prediction matrices are identical, and reports wall-clock
time per tree for growing and for prediction.

    python benchmarks/bench_backends.py --n 110 --p 100 --B 200
"""

import argparse
import time

import numpy as np

from oobci._backend import BACKENDS
from oobci.forest import ForestConfig, train_forest, tree_prediction_matrix
from oobci.sim import generate_dataset


def _time(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=110)
    ap.add_argument("--p", type=int, default=100)
    ap.add_argument("--B", type=int, default=200)
    ap.add_argument("--task", default="regression")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    train, _ = generate_dataset(args.n, args.p, 2.0, args.task, seed=args.seed, n_test=1)
    cfg = ForestConfig(B=args.B, seed=args.seed)
    results = {}
    for name, kern in BACKENDS.items():
        t_grow, model = _time(lambda: train_forest(train, cfg, threads=1, kernels=kern), args.repeat)
        t_pred, P = _time(lambda: tree_prediction_matrix(model, kernels=kern), args.repeat)
        results[name] = (t_grow, t_pred, P, model)
        print(f"{name:7s} grow {1e3 * t_grow / args.B:8.3f} ms/tree   "
              f"predict {1e3 * t_pred / args.B:8.3f} ms/tree")
    if "cython" not in results:
        print("compiled extension not available; only the numpy backend was timed")
        return
    Pc, mc = results["cython"][2], results["cython"][3]
    Pp, mp = results["python"][2], results["python"][3]
    same = (np.array_equal(Pc, Pp) and np.array_equal(mc.threshold, mp.threshold)
            and np.array_equal(mc.feature, mp.feature))
    print(f"identical output: {same}")
    print(f"speedup grow {results['python'][0] / results['cython'][0]:.1f}x, "
          f"predict {results['python'][1] / results['cython'][1]:.1f}x")


if __name__ == "__main__":
    main()
