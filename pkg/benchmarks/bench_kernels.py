"""Compiled vs NumPy kernels on the exact solver's inner search.

    python3 benchmarks/bench_kernels.py [--repeat N]

Also times a full exact solve under each backend.
"""

import argparse
import time

import numpy as np

from chipletcost import CostParams, GridSpec, build_topology
from chipletcost.kernels import _fallback
from chipletcost.optimize import build_miqp, solve
from chipletcost.workload import gemm_chain

try:
    from chipletcost.kernels import _core
except ImportError:
    _core = None


def _grid_case(n=400, m=400, X=4, Y=4, seed=0):
    rng = np.random.default_rng(seed)
    FX = rng.integers(1, 6, (n, X))
    FY = rng.integers(1, 6, (m, Y))
    PX = FX * 16.0
    PY = FY * 16.0
    A, B, C = rng.random((X, Y)), rng.random((X, Y)), rng.random((X, Y))
    return FX, FY, PX, PY, 0.05, A, B, C


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = [("python", _fallback)] + ([("compiled", _core)] if _core is not None else [])
    if _core is None:
        print("compiled extension not built; only the fallback is timed")

    case = _grid_case()
    row = np.random.default_rng(1).random(64) * 1e6
    results = {}
    for name, mod in backends:
        t_grid, out = _time(lambda: mod.op_grid_search(*case), args.repeat)
        t_scan, _ = _time(lambda: [mod.gather_scan(row) for _ in range(1000)], args.repeat)
        results[name] = (t_grid, t_scan, out)
        print(f"{name:9s} op_grid_search 400x400 on 4x4: {t_grid * 1e3:8.2f} ms   "
              f"gather_scan x1000: {t_scan * 1e3:8.2f} ms")
    if len(results) == 2:
        (tg_p, ts_p, out_p), (tg_c, ts_c, out_c) = results["python"], results["compiled"]
        assert out_p == out_c, "backends disagree"
        print(f"speedup   op_grid_search {tg_p / tg_c:6.1f}x   gather_scan {ts_p / ts_c:6.1f}x")

    import chipletcost.kernels as k
    task = gemm_chain(4, dims=[256, 128, 64, 256, 128], M=256)
    model = build_miqp(task, build_topology(GridSpec(4, 4)), CostParams())
    for name, mod in backends:
        k.op_grid_search = mod.op_grid_search
        t, res = _time(lambda: solve(model), args.repeat)
        print(f"{name:9s} exact solve gemm-chain-4 on 4x4: {t * 1e3:8.2f} ms  objective {res.objective:.6g}")


if __name__ == "__main__":
    main()
