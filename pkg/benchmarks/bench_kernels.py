"""Compare the compiled and numpy kernel backends.

Run ``python benchmarks/bench_kernels.py [--repeat N]``. Each kernel is
timed on both backends with identical inputs and the outputs are checked
for agreement before timings are reported.
"""
import argparse
import time

import numpy as np

from cdinterp import kernels


def _cases(rng):
    xs = np.linspace(0.0, 2.0, 161)
    ys = np.linspace(0.0, 1.0, 81)
    vel = 0.05 * rng.standard_normal((xs.size * ys.size, 2))
    field3 = rng.standard_normal((xs.size * ys.size, 3))
    q = rng.uniform([0, 0], [2, 1], (20000, 2))
    x1 = np.linspace(-1, 1, 20001)
    v1 = rng.standard_normal((x1.size, 1))
    cloud = rng.uniform([0, 0], [2, 1], (300, 2))
    return {
        "interp_linear_1d": (x1, v1, rng.uniform(-1, 1, 50000)),
        "interp_bilinear": (xs, ys, field3, q),
        "min_distance": (cloud, q),
        "euler_flow_bilinear": (xs, ys, vel, q[:5000], 5e-3, 200),
        "euler_flow_1d": (x1, 0.1 * v1[:, 0], rng.uniform(-1, 1, 5000), 5e-3, 200),
    }


def _time(fn, args, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)} (active: {kernels.BACKEND})")
    cases = _cases(np.random.default_rng(0))
    print(f"{'kernel':24s}" + "".join(f"{b:>12s}" for b in backends) + f"{'speedup':>10s}")
    for name, inputs in cases.items():
        inputs = tuple(np.ascontiguousarray(a, dtype=float) if isinstance(a, np.ndarray) else a
                       for a in inputs)
        times, outs = [], []
        for b in backends:
            t, o = _time(getattr(kernels.get_backend(b), name), inputs, args.repeat)
            times.append(t)
            outs.append(o)
        if len(outs) == 2 and not np.allclose(outs[0], outs[1], rtol=1e-12, atol=1e-12):
            raise SystemExit(f"{name}: backends disagree")
        speed = f"{times[0] / times[1]:9.1f}x" if len(times) == 2 else ""
        print(f"{name:24s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times) + f" {speed}")


if __name__ == "__main__":
    main()
