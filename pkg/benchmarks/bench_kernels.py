"""Time the numpy and numba kernel backends on training-sized shapes.

    python benchmarks/bench_kernels.py [--repeat N]

Also times one short training run per backend (the backend is fixed at import, so
each run happens in a subprocess with AUTOBAYES_NUMBA set accordingly).
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from autobayes.nn import _kernels

SHAPES = [(32, 8, 64), (32, 64, 16), (32, 13, 26), (1200, 8, 64)]

TRAIN_SNIPPET = """
import time, numpy as np
from autobayes.graph import paper_catalog
from autobayes.inference import expand_catalog, find_spec
from autobayes.data import synthetic_dataset, split
from autobayes.pipeline import HyperParams, train_model
cat = paper_catalog()
tr, va = split(synthetic_dataset(cat["E"], seed=0, n=2000), 0.2, "task", 0)
spec = find_spec(expand_catalog(cat), "Ez-var")
train_model(spec, tr, va, HyperParams(epochs=1), np.random.default_rng(0))  # warm-up / jit
t = time.perf_counter()
train_model(spec, tr, va, HyperParams(epochs=5), np.random.default_rng(0))
print(time.perf_counter() - t)
"""


def bench_dense(k, n, a, b, repeat):
    rng = np.random.default_rng(0)
    x, W, bias = rng.standard_normal((n, a)), rng.standard_normal((a, b)), rng.standard_normal(b)
    gamma, beta = np.ones(b), np.zeros(b)
    rm, rv = np.zeros(b), np.ones(b)
    gW, gb, gg, gbe = np.zeros_like(W), np.zeros(b), np.zeros(b), np.zeros(b)

    def step():
        y, xhat, inv = k.dense_forward(x, W, bias, gamma, beta, rm, rv, True, True, True, 1e-5, 0.1)
        k.dense_backward(y, x, W, y, xhat, inv, gamma, True, True, True, gW, gb, gg, gbe)

    step()
    return min(timeit.repeat(step, number=200, repeat=repeat)) / 200


def bench_adam(k, size, repeat):
    rng = np.random.default_rng(0)
    p, g = rng.standard_normal(size), rng.standard_normal(size)
    m, v = np.zeros(size), np.zeros(size)
    k.adam_update(p, g, m, v, 1e-3, 0.9, 0.999, 1e-8, 1.0)
    return min(timeit.repeat(lambda: k.adam_update(p, g, m, v, 1e-3, 0.9, 0.999, 1e-8, 1.0),
                             number=500, repeat=repeat)) / 500


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-train", action="store_true")
    args = ap.parse_args()
    backends = {"numpy": _kernels.numpy_kernels}
    if _kernels.numba_kernels is not None:
        backends["numba"] = _kernels.numba_kernels
    print(f"{'kernel':<28}" + "".join(f"{name:>14}" for name in backends))
    for n, a, b in SHAPES:
        row = [bench_dense(k, n, a, b, args.repeat) for k in backends.values()]
        print(f"{f'dense fwd+bwd {n}x{a}->{b}':<28}" + "".join(f"{t * 1e6:>12.1f}us" for t in row))
    for size in (300, 5000):
        row = [bench_adam(k, size, args.repeat) for k in backends.values()]
        print(f"{f'adam {size}':<28}" + "".join(f"{t * 1e6:>12.1f}us" for t in row))
    if args.skip_train:
        return
    row = []
    for name in backends:
        env = dict(os.environ, AUTOBAYES_NUMBA="1" if name == "numba" else "0")
        out = subprocess.run([sys.executable, "-c", TRAIN_SNIPPET], env=env, capture_output=True, text=True,
                             check=True)
        row.append(float(out.stdout.strip().splitlines()[-1]))
    print(f"{'train Ez-var, 5 epochs':<28}" + "".join(f"{t:>13.2f}s" for t in row))


if __name__ == "__main__":
    main()
