"""Wall-clock comparison of the compiled and pure-Python integration kernels.

    python benchmarks/bench_kernel.py [--repeat 3] [--builtin additive_beta02 ...]
"""
import argparse
import time

import numpy as np

from etconsensus import kernel
from etconsensus.engine import simulate
from etconsensus.errors import NonFinite
from etconsensus.scenarios import builtin_config


def _time_run(scenario, backend, repeat):
    best = float("inf")
    trace = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        try:
            trace = simulate(scenario, backend=backend)
        except NonFinite as exc:
            trace = exc.trace
        best = min(best, time.perf_counter() - t0)
    return best, trace


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--builtin", nargs="+", default=["nominal", "additive_beta02", "topology"])
    args = ap.parse_args(argv)
    if kernel.CythonKernel is None:
        raise SystemExit("compiled kernel not built; reinstall without ETCONSENSUS_NO_EXT")
    print(f"{'scenario':18s} {'cython [s]':>11s} {'python [s]':>11s} {'speedup':>8s} {'max |dx|':>10s}")
    for name in args.builtin:
        sc = builtin_config(name).scenario
        tc, trc = _time_run(sc, "cython", args.repeat)
        tp, trp = _time_run(sc, "python", args.repeat)
        dx = float(np.max(np.abs(trc.x - trp.x))) if trc.x.shape == trp.x.shape else float("nan")
        print(f"{name:18s} {tc:11.3f} {tp:11.3f} {tp / tc:8.1f} {dx:10.2e}")


if __name__ == "__main__":
    main()
