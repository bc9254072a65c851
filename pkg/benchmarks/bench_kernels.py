"""Compare the numba and numpy paths of the hot kernels.

Run: python3 benchmarks/bench_kernels.py [--repeat 3]
Each row reports the best wall time of both paths and checks that they agree.
"""
import argparse
import time

import numpy as np

from discrete_beta import _kernels
from discrete_beta._accel import HAVE_NUMBA
from discrete_beta.ensembles import JackParams, jack_ensemble


def best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases():
    rng = np.random.default_rng(0)
    w = rng.random(4000)
    w /= w.sum()
    yield "lag_log_sum M=4000", lambda a: _kernels.lag_log_sum(w, a)

    x = rng.normal(size=1500)
    p = np.stack([x / (1 + x * x), x * x / (1 + x * x)], axis=1)
    m = np.full(1500, 1 / 1500)
    yield "chord_cross 1500x1500", lambda a: _kernels.chord_cross(p, m, p, m, a)

    ell = np.sort(rng.choice(100_000, 2000, replace=False))[::-1].astype(float)
    yield "pair_log_q N=2000", lambda a: _kernels.pair_log_q(ell, 1.5, a)

    spec = jack_ensemble(JackParams(1.0, 1.0), 3)
    lams = np.array([(i, j, k) for i in range(40) for j in range(i + 1) for k in range(j + 1)], dtype=float)
    yield "batch_log_weight N=3", lambda a: _kernels.batch_log_weight(lams, 1.0, spec.potential, a)

    spec50 = jack_ensemble(JackParams(1.0, 1.0), 50)
    steps = 20_000
    r = np.random.default_rng(1)
    idx = r.integers(0, 50, steps)
    sg = r.integers(0, 2, steps) * 2 - 1
    lu = np.log(r.random(steps))

    def chain(a):
        lam = np.zeros(50, dtype=np.int64)
        out = np.empty((steps, 50), dtype=np.int64)
        _kernels.mcmc_chunk(lam, 1.0, 0, 2**62, idx, sg, lu, 1, 0, spec50.potential, out, a)
        return out[-1].sum()

    yield f"mcmc_chunk N=50, {steps} steps", chain


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not HAVE_NUMBA:
        print("numba unavailable: only the numpy path runs")
    print(f"{'kernel':<32}{'numpy s':>10}{'numba s':>10}{'speedup':>9}  agree")
    for name, fn in cases():
        t_np, v_np = best_of(lambda: fn(False), args.repeat)
        if HAVE_NUMBA:
            fn(True)  # compile outside the timing
            t_nb, v_nb = best_of(lambda: fn(True), args.repeat)
            agree = np.allclose(v_np, v_nb, rtol=1e-10, atol=1e-12)
            print(f"{name:<32}{t_np:>10.4f}{t_nb:>10.4f}{t_np / t_nb:>9.1f}  {agree}")
        else:
            print(f"{name:<32}{t_np:>10.4f}{'-':>10}{'-':>9}  -")


if __name__ == "__main__":
    main()
