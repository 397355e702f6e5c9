"""Numba vs numpy timings for the per-mode kernels.

    python benchmarks/bench_kernels.py [--modes 20000] [--repeat 5]

Both implementations are run on the same random inputs; the script checks
they agree before reporting best-of-N wall times.
"""
import argparse
import time

import numpy as np

from tppar import _kernels


def _inputs(rng, modes, m=3, points=64, nodes=4, amps=3):
    c = lambda *s: rng.standard_normal(s) + 1j * rng.standard_normal(s)
    roots = c(modes, 2 * m)
    # keep roots off the real axis so classify_roots has a clean split
    roots.imag = np.where(np.arange(2 * m) < m, 1.0, -1.0) * (0.1 + np.abs(roots.imag))
    q = c(modes, m + 1)
    q[:, -1] = 1.0
    return {
        "horner": (c(modes, 2 * m + 1), c(modes, points)),
        "classify_roots": (roots, 1e-9),
        "vieta": (roots[:, :m],),
        "exp_sum": (c(modes, amps, nodes), c(modes, nodes) * 0.1 + 1j,
                    np.linspace(0.0, 8.0, points)),
        "polymod": (c(modes, 2 * m + 1), q),
    }


def _best(fn, args, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def _close(a, b):
    if isinstance(a, tuple):
        return all(_close(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-12, atol=1e-12)


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--modes", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if _kernels.numba_impl is None:
        print("numba not importable; nothing to compare")
        return 1
    data = _inputs(np.random.default_rng(args.seed), args.modes)
    print(f"{'kernel':16s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s}  agree")
    ok = True
    for name, call in data.items():
        f_np = getattr(_kernels.numpy_impl, name)
        f_nb = getattr(_kernels.numba_impl, name)
        agree = _close(f_np(*call), f_nb(*call))  # also triggers compilation
        ok &= agree
        t_np = _best(f_np, call, args.repeat)
        t_nb = _best(f_nb, call, args.repeat)
        print(f"{name:16s} {1e3 * t_np:11.3f} {1e3 * t_nb:11.3f} {t_np / t_nb:8.2f}  {agree}")
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
