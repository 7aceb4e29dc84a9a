"""Compare the compiled SC kernels with the numpy fallback.

Run from the repository root::

    python benchmarks/bench_kernels.py [--n 1024] [--repeat 5]

Prints one line per kernel with the best-of-``repeat`` time per block for
each backend and the speed-up.  The two backends are also checked for
identical decisions (and floats within 1e-9) on the benchmark inputs.
"""

import argparse
import timeit

import numpy as np

from tsapolar import _pykernels
from tsapolar.kernels import DATA, SHAPING

try:
    from tsapolar import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def _inputs(n, count, seed=0):
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, (count, n), dtype=np.uint8)
    chan = np.ascontiguousarray((1 - 2.0 * bits) * rng.gamma(2.0, 1.5, (count, n)))
    kind = np.full(n, DATA, dtype=np.int8)
    kind[: n // 3] = SHAPING
    return chan, bits, kind


def _cases(n, blocks, list_size):
    chan, bits, kind = _inputs(n, blocks)
    return {
        "genie": (lambda m: m.genie_llrs(chan, bits), blocks),
        "sc_decode": (lambda m: [m.sc_decode(chan[i], kind) for i in range(blocks)], blocks),
        f"scl_decode(L={list_size})": (lambda m: [m.scl_decode(chan[i], kind, list_size)
                                                  for i in range(min(blocks, 4))], min(blocks, 4)),
    }


def _same(a, b):
    if isinstance(a, (list, tuple)):
        return len(a) == len(b) and all(_same(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a), np.asarray(b)
    if a.dtype.kind == "f":
        # summation order differs between backends; decisions must match exactly
        return np.allclose(a, b, rtol=1e-9, atol=1e-9)
    return np.array_equal(a, b)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1024)
    ap.add_argument("--blocks", type=int, default=20)
    ap.add_argument("--list-size", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = [("numpy", _pykernels)] + ([("compiled", _ckernels)] if _ckernels else [])
    print(f"n={args.n} blocks={args.blocks}")
    print(f"{'kernel':<18}" + "".join(f"{name:>14}" for name, _ in backends) + f"{'speed-up':>10}")
    for label, (fn, count) in _cases(args.n, args.blocks, args.list_size).items():
        times = [min(timeit.repeat(lambda: fn(m), number=1, repeat=args.repeat)) / count
                 for _, m in backends]
        line = f"{label:<18}" + "".join(f"{t * 1e3:>11.3f} ms" for t in times)
        if len(times) == 2:
            agree = _same(fn(_pykernels), fn(_ckernels))
            line += f"{times[0] / times[1]:>9.1f}x" + ("" if agree else "  OUTPUTS DIFFER")
        print(line)


if __name__ == "__main__":
    main()
