#!/usr/bin/env python3
"""Throughput comparison of the two APDU scanner backends.

Frame decoding is the hot loop of capture ingest, so the scanner exists
twice: a Cython extension and a pure-Python fallback. This benchmark
decodes the same randomized frame corpus through both and reports frames
per second. Run from the repository root:

    python3 benchmarks/bench_codec.py [n_frames]
"""

import importlib
import os
import statistics
import sys
import time

import numpy as np


def build_corpus(n):
    sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "tests"))
    from conftest import random_frame

    from goosewatch import codec

    rng = np.random.default_rng(7)
    return [codec.encode_frame(random_frame(rng)) for _ in range(n)]


def reload_codec(pure: bool):
    os.environ["GOOSEWATCH_PURE_PY"] = "1" if pure else "0"
    import goosewatch._scan
    import goosewatch.codec

    importlib.reload(goosewatch._scan)
    importlib.reload(goosewatch.codec)
    return goosewatch.codec, goosewatch._scan.BACKEND


def bench(codec_mod, corpus, repeats=3):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        for raw in corpus:
            codec_mod.decode_frame(raw)
        times.append(time.perf_counter() - start)
    return min(times), statistics.fmean(times)


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 50_000
    corpus = build_corpus(n)
    print(f"decoding {n} frames, best of 3 runs per backend\n")
    results = {}
    for pure in (False, True):
        codec_mod, backend = reload_codec(pure)
        if pure and backend != "python":
            continue
        best, mean = bench(codec_mod, corpus)
        results[backend] = best
        print(f"  {backend:<8} {n / best:>12,.0f} frames/s "
              f"(best {best:.3f}s, mean {mean:.3f}s)")
    if len(results) == 2:
        speedup = results["python"] / results["cython"]
        print(f"\n  compiled speedup: {speedup:.1f}x")
    else:
        print("\n  compiled extension not built; only the fallback was measured")


if __name__ == "__main__":
    main()
