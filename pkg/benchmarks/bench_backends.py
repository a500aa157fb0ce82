"""Timing comparison: compiled extension kernels vs the pure-NumPy fallback.

Run from the repo root after installing the package:

    python benchmarks/bench_backends.py

Each kernel is timed on sizes typical for the bundled scenarios (GP gram
matrices on a few hundred points, likelihood + resampling over a few
thousand particles). Results are wall-clock medians over repeats.
"""

from __future__ import annotations

import timeit

import numpy as np

from bayesfilt import _core_py

try:
    from bayesfilt import _core
except ImportError:
    _core = None


def _median_time(fn, repeats=7, number=20):
    timer = timeit.Timer(fn)
    return min(timer.repeat(repeat=repeats, number=number)) / number


def _cases(rng):
    x = rng.uniform(-3.0, 3.0, 400)
    y = rng.uniform(-3.0, 3.0, 400)
    particles = rng.normal(0.0, 5.0, 5000)
    means = particles**2 / 20.0
    weights = rng.uniform(0.0, 1.0, 5000)
    weights /= weights.sum()
    cumsum = np.cumsum(weights)
    return [
        ("pairwise_sqdist(400x400)", "pairwise_sqdist", (x, y)),
        ("exp_quad_gram(400x400)", "exp_quad_gram", (x, y, 1.0, 0.5)),
        ("periodic_gram(400x400)", "periodic_gram", (x, y, 1.0, 2.0, 0.125)),
        ("rq_gram(400x400)", "rq_gram", (x, y, 1.0, 1.5, 1.0)),
        ("gauss_loglik(5000)", "gauss_loglik", (np.float64(1.3), means, 0.5)),
        ("resample_indices(5000)", "resample_indices", (cumsum, 1e-4)),
    ]


def main():
    rng = np.random.default_rng(7)
    if _core is None:
        print("compiled extension not available; only the python backend was timed")
    print(f"{'kernel':<28} {'python':>12} {'compiled':>12} {'speedup':>9}")
    for label, name, args in _cases(rng):
        t_py = _median_time(lambda: getattr(_core_py, name)(*args))
        if _core is not None:
            t_c = _median_time(lambda: getattr(_core, name)(*args))
            print(f"{label:<28} {t_py * 1e6:>10.1f}us {t_c * 1e6:>10.1f}us {t_py / t_c:>8.2f}x")
        else:
            print(f"{label:<28} {t_py * 1e6:>10.1f}us {'-':>12} {'-':>9}")


if __name__ == "__main__":
    main()
