"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--replicates 5000] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from lifsel import _pykernels
from lifsel.wavelets import D20, HAAR

try:
    from lifsel import _ckernels
except ImportError:
    _ckernels = None


def cases(R: int, n: int = 256, M: int = 8):
    rng = np.random.default_rng(0)
    est = np.ascontiguousarray(rng.normal(size=(R, M)))
    H = np.abs(rng.normal(size=(M, M)))
    H = np.ascontiguousarray(H + H.T)
    np.fill_diagonal(H, 0.0)
    pen = np.ascontiguousarray(np.abs(rng.normal(size=M)))
    Y = np.ascontiguousarray(rng.normal(size=(R, n)))
    out = {"crit_select": lambda k: k.crit_select(est, H, pen, 1.0 / n)}
    for basis in (HAAR, D20):
        h = np.ascontiguousarray(basis.filter)
        C = _pykernels.dwt_periodized(Y, h, 1)
        out[f"dwt_{basis.label}"] = lambda k, h=h: k.dwt_periodized(Y, h, 1)
        out[f"idwt_{basis.label}"] = lambda k, h=h, C=C: k.idwt_periodized(C, h, 1)
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--replicates", type=int, default=5000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled extension not built; only the numpy fallback is available")
    print(f"{'kernel':<14}{'numpy [ms]':>12}{'cython [ms]':>13}{'speedup':>9}  agree")
    for name, fn in cases(args.replicates).items():
        t_py = min(timeit.repeat(lambda: fn(_pykernels), number=1, repeat=args.repeat)) * 1e3
        if _ckernels is None:
            print(f"{name:<14}{t_py:12.2f}")
            continue
        t_c = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=args.repeat)) * 1e3
        a, b = fn(_pykernels), fn(_ckernels)
        a = a if isinstance(a, tuple) else (a,)
        b = b if isinstance(b, tuple) else (b,)
        agree = all(np.allclose(x, y, rtol=0, atol=1e-12) for x, y in zip(a, b))
        print(f"{name:<14}{t_py:12.2f}{t_c:13.2f}{t_py / t_c:8.1f}x  {agree}")


if __name__ == "__main__":
    main()
