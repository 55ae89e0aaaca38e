"""Time the compiled kernels against the NumPy fallback, then a full dehaze.

    python3 benchmarks/bench_kernels.py [--size 512] [--repeat 5]
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from polarfog import _fallback
from polarfog.diffusion import gaussian_weights

try:
    from polarfog import _kernels as compiled
except ImportError:
    compiled = None


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_rows(size, repeat):
    r = np.random.default_rng(0)
    img = r.random((size, size))
    vol = r.random((50, size // 2, size // 2))
    w = gaussian_weights(5.0)
    cases = {
        "blur_separable sigma=5": lambda k: k.blur_separable(img, w),
        "moving_average_axis0 w=3": lambda k: k.moving_average_axis0(vol, 3),
        "resample_bilinear 1/2": lambda k: k.resample_bilinear(img, size // 2, size // 2),
    }
    for name, case in cases.items():
        py = best(lambda: case(_fallback), repeat)
        if compiled is None:
            print(f"{name:28s} python {py * 1e3:9.2f} ms   cython  (not built)")
            continue
        cy = best(lambda: case(compiled), repeat)
        print(f"{name:28s} python {py * 1e3:9.2f} ms   cython {cy * 1e3:9.2f} ms   x{py / cy:5.1f}")


def dehaze_time(size, pure):
    # the backend is chosen at import, so each run gets its own interpreter
    code = (
        "import time, numpy as np\n"
        "from polarfog import dehaze, BACKEND\n"
        f"img = np.random.default_rng(0).random(({size}, {size}))\n"
        "t = time.perf_counter(); dehaze(img, workers=1)\n"
        "print(BACKEND, time.perf_counter() - t)\n"
    )
    env = dict(os.environ, POLARFOG_PURE="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    backend, seconds = out.stdout.split()
    return backend, float(seconds)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=512)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"kernels at {args.size}x{args.size} (best of {args.repeat})")
    kernel_rows(args.size, args.repeat)
    print(f"\nfull dehaze at {args.size}x{args.size}, default parameters, one worker")
    for pure in (True, False):
        backend, seconds = dehaze_time(args.size, pure)
        print(f"  {backend:7s} {seconds:7.2f} s")


if __name__ == "__main__":
    main()
