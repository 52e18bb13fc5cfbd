"""Compiled vs pure-Python simulation kernel on the two-branch feedback
example.

    python benchmarks/bench_simulate.py [--samples 20000] [--repeat 3]
"""
import argparse
import time

import numpy as np

from blockloci.config import bundled_config, load_config
from blockloci.signals import MultisineSpec, PowerSpectrum, excitation_record
from blockloci.systems import available_backends, set_backend, get_backend, simulate, solve_setpoint


def best_time(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--samples", type=int, default=20000)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)

    graph = load_config(bundled_config("paper_sec5")).graph
    op = solve_setpoint(graph, 0.5)
    spec = MultisineSpec.from_spectrum(args.samples, PowerSpectrum.flat(), seed=1)
    u = excitation_record(spec, 0.01, 0.5)

    initial = get_backend()
    results = {}
    print(f"{'backend':<10}{'seconds':>12}{'Msamples/s':>14}")
    for name in ("python", "cython"):
        if name not in available_backends():
            print(f"{name:<10}{'unavailable':>12}")
            continue
        set_backend(name)
        t, y = best_time(lambda: simulate(graph, u, warmup=0, op=op), args.repeat)
        results[name] = (t, y.samples)
        print(f"{name:<10}{t:12.4f}{args.samples / t / 1e6:14.3f}")
    set_backend(initial)

    if len(results) == 2:
        (tp, yp), (tc, yc) = results["python"], results["cython"]
        print(f"speed-up {tp / tc:.1f}x, max |difference| {np.max(np.abs(yp - yc)):.3g}")


if __name__ == "__main__":
    main()
