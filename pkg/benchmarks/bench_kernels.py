"""Time the compiled and vectorised training kernels on the same workload.

    python benchmarks/bench_kernels.py [--dims 10,50,200] [--samples 2000]

Both backends start from identical pools; the script also reports the largest
parameter difference between them after the run.
"""

import argparse
import time

import numpy as np

from valleyseek import _accel, learner, synthdata


def run_once(pool, X, backend):
    p = pool.copy()
    t0 = time.perf_counter()
    learner.train(p, X, cadence=X.shape[0], backend=backend)
    return p, time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--dims", default="10,50,200")
    ap.add_argument("--samples", type=int, default=2000)
    ap.add_argument("--grid", type=int, default=16)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    backends = ["numpy"] + (["numba"] if _accel.numba is not None else [])
    if "numba" in backends:
        # compile outside the timed region
        tiny = learner.init_grid(learner.DomainBox.cube(3, -1, 1), 2, learner.LearnerConfig.scaled())
        learner.train(tiny, np.zeros((1, 3)), backend="numba")

    print(f"{'d':>5} {'planes':>7} " + " ".join(f"{b + ' s':>10}" for b in backends)
          + f" {'speedup':>8} {'max |dW|':>10}")
    for d in (int(t) for t in args.dims.split(",")):
        spec = synthdata.paper_50d_spec(1.0, d)
        lo, hi = synthdata.grid_cube(spec, 4.0)
        pool = learner.init_grid(learner.DomainBox.cube(d, lo, hi), args.grid,
                                 learner.LearnerConfig.scaled(1.0))
        X = synthdata.gen_mixture(spec, args.samples, 0).X
        best, final = {}, {}
        for b in backends:
            times = []
            for _ in range(args.repeat):
                final[b], dt = run_once(pool, X, b)
                times.append(dt)
            best[b] = min(times)
        diff = (float(np.max(np.abs(final["numba"].W - final["numpy"].W)))
                if len(backends) == 2 else float("nan"))
        speed = best["numpy"] / best["numba"] if "numba" in best else float("nan")
        print(f"{d:>5} {len(pool):>7} " + " ".join(f"{best[b]:>10.3f}" for b in backends)
              + f" {speed:>8.1f} {diff:>10.2e}")


if __name__ == "__main__":
    main()
