"""Wall-clock comparison of the numba and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from spotfs import _accel
from spotfs.channel import sample_channel
from spotfs.constellation import get_constellation
from spotfs.ldpc import CodeSpec, load_fixture
from spotfs.ldpc import gf2
from spotfs.ldpc.bp import belief_propagation
from spotfs.mp import mp_kernel


def _time(fn, repeat):
    fn()  # warm-up (JIT compile or cache load)
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def bench_mp(repeat):
    rng = np.random.default_rng(0)
    N = M = 15
    ch = sample_channel(rng, 4, 4, 2, N, M)
    q = get_constellation("qpsk")
    pts = q.scaled(10.0)
    x = pts[rng.integers(0, 4, N * M)]
    y = ch.apply_dd(x) + (rng.standard_normal(N * M) + 1j * rng.standard_normal(N * M)) * np.sqrt(0.5)
    active = np.ones(N * M, dtype=bool)
    return {
        b: _time(lambda b=b: mp_kernel(y, ch.taps, active, pts, 1.0, 15, 0.6, 0.0, backend=b), repeat)
        for b in ("numba", "numpy")
    }


def bench_bp(repeat):
    mc = load_fixture("r0.75_n8192")
    spec = CodeSpec(mc, mc.k0, mc.n0)
    llr = np.random.default_rng(1).standard_normal(mc.n0) + 1.0
    _ = spec.mother.graph
    return {
        b: _time(lambda b=b: belief_propagation(llr, mc.graph, 20, backend=b), repeat) for b in ("numba", "numpy")
    }


def bench_gf2(repeat):
    H = load_fixture("r0.75_n8192").H.toarray().astype(np.uint8)
    m = H.shape[0]
    W0 = gf2.pack_rows(np.hstack([H[:, -m:], H[:, :-m]]))
    out = {}
    for b, fn in (("numba", gf2._eliminate_numba), ("numpy", gf2._eliminate_numpy)):
        out[b] = _time(lambda fn=fn: fn(W0.copy(), m), max(1, repeat // 2))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not _accel.HAS_NUMBA:
        print("numba unavailable: both columns time the numpy fallback")
    print(f"{'kernel':<28}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, fn in (
        ("MP detect 15x15, P=4, 15 it", bench_mp),
        ("BP decode n=8192, 20 it", bench_bp),
        ("GF(2) elimination 2048x8192", bench_gf2),
    ):
        t = fn(args.repeat)
        print(f"{name:<28}{1e3 * t['numba']:>12.2f}{1e3 * t['numpy']:>12.2f}{t['numpy'] / t['numba']:>9.1f}x")


if __name__ == "__main__":
    main()
