"""Throughput of the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--scale 1.0] [--repeat 3]

Both backends are called in-process on identical arguments; the first
compiled call is made beforehand so compilation time is not counted.
"""

import argparse
import time

import numpy as np

from jumprestore import rng as _rng
from jumprestore.finite import build_restore, random_instance
from jumprestore.kernels import (
    LOCAL_MALA,
    LOCAL_RWM,
    USE_NUMBA,
    HistogramSpec,
    ObservableSpec,
    _loops,
    _vectorized,
    row_cumsum,
)
from jumprestore.targets import builtin_target

SEED = 7
MIXED = _rng.mix64(SEED)


def workloads(scale):
    tri = builtin_target("trimodal1d").packed
    obs = ObservableSpec.build([{"kind": "coord", "dim": 0}])
    hist = HistogramSpec(0, -40.0, 25.0, 200)
    box = (np.array([-40.0]), np.array([25.0]))
    inst = random_instance(3, n=10)
    sys_ = build_restore(inst)
    p_cum = row_cumsum(sys_.K0)
    mu_cum = np.cumsum(inst.mu_tilde / inst.mu_tilde.sum())
    n_tours = max(1, int(50_000 * scale))
    n_steps = max(1, int(200_000 * scale))

    def tours(kind):
        return ("continuous_tours", (0, n_tours, *tri.args(), False, *box, kind, 1.0, 0.5, 0.1, 5,
                                     np.ones(1), 1.0 / 65.0, *obs.args(), *hist.args(), 10**7))

    return {
        "restore rwm (trimodal)": tours(LOCAL_RWM),
        "restore mala (trimodal)": tours(LOCAL_MALA),
        "mh mixture rwm, 8 chains": ("mh_chains", (np.arange(8), np.zeros((8, 1)), np.zeros(8, np.int64),
                                                   n_steps // 8, *tri.args(), False, *box, 0.3, LOCAL_RWM,
                                                   1.0, 0.5, 0.1, 5, np.ones(1), *obs.args(),
                                                   *hist.args(), 1)),
        "finite tours (n = 10)": ("finite_tours", (0, max(1, n_tours // 5), p_cum, mu_cum, sys_.kappa,
                                                   np.eye(10), 10**7)),
    }


def events_of(name, out):
    if name == "mh_chains":
        return int(out[4][:, 0].sum())
    return int(out[-1][4])


def best_time(fn, args, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", type=float, default=1.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not USE_NUMBA:
        print("numba backend disabled; only the numpy path can be timed")
    print(f"{'workload':28s} {'events':>10s} {'numba ev/s':>12s} {'numpy ev/s':>12s} {'speedup':>8s}")
    for label, (name, fargs) in workloads(args.scale).items():
        t_np, out_np = best_time(lambda *a: getattr(_vectorized, name)(MIXED, *a), fargs, args.repeat)
        ev = events_of(name, out_np)
        if USE_NUMBA:
            fn = lambda *a: getattr(_loops, name)(np.uint64(MIXED), *a)
            fn(*fargs)
            t_nb, out_nb = best_time(fn, fargs, args.repeat)
            assert events_of(name, out_nb) == ev
            print(f"{label:28s} {ev:10d} {ev / t_nb:12.3e} {ev / t_np:12.3e} {t_np / t_nb:8.1f}")
        else:
            print(f"{label:28s} {ev:10d} {'-':>12s} {ev / t_np:12.3e} {'-':>8s}")


if __name__ == "__main__":
    main()
