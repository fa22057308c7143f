"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--scale desk|paper]

Times conv forward, conv backward (weights and input) and max-pool forward
on the layer shapes of the chosen profile, then one training epoch of the
base network. Each figure is the best of ``--repeat`` runs, and
the backends are checked to agree before timing.
"""

import argparse
import sys
import timeit

import numpy as np
from threadpoolctl import threadpool_limits

from breathga import transfer
from breathga.nn import TrainConfig, init_model, kernels, train
from breathga.nn import model as model_mod

SCALES = {
    # (batch, length, filters, lengths)
    "desk": (50, 600, (64, 32, 16), (64, 32, 16)),
    "paper": (50, 3000, (256, 128, 64), (64, 32, 16)),
}


def layer_cases(scale):
    batch, length, filters, lengths = SCALES[scale]
    cases = []
    cin = 1
    for f, k in zip(filters, lengths):
        cases.append((f"conv {length}x{cin}->{f} k{k}", batch, length, cin, f, k))
        cin = f
        length //= 2
    return cases


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench_layers(impls, scale, repeat, rng):
    rows = []
    for name, batch, length, cin, filters, taps in layer_cases(scale):
        x = rng.normal(size=(batch, length, cin))
        w = rng.normal(size=(filters, taps, cin))
        b = rng.normal(size=filters)
        dy = rng.normal(size=(batch, length, filters))
        ref = impls["python"].conv1d_forward(x, w, b)
        for impl in impls.values():
            np.testing.assert_allclose(impl.conv1d_forward(x, w, b), ref, rtol=1e-10, atol=1e-9)
        timings = {}
        for key, impl in impls.items():
            timings[key] = (
                best(lambda: impl.conv1d_forward(x, w, b), repeat),
                best(lambda: impl.conv1d_backward(x, w, dy), repeat),
                best(lambda: impl.maxpool_forward(ref, 2), repeat),
            )
        rows.append((name, timings))
    return rows


def bench_step(scale, repeat):
    """Seconds for one 50-record training epoch of the base network, per backend."""
    batch, length, filters, lengths = SCALES[scale]
    specs = transfer.base_specs(filters, lengths, 64)
    rng = np.random.default_rng(0)
    x = rng.normal(size=(batch, length, 1))
    y = rng.integers(0, 8, size=batch)
    out = {}
    for key, impl in kernels.backends().items():
        saved = {n: getattr(model_mod.kernels, n) for n in
                 ("conv1d_forward", "conv1d_backward", "maxpool_forward", "maxpool_backward")}
        try:
            for n in saved:
                setattr(model_mod.kernels, n, getattr(impl, n))
            model = init_model(specs, (length, 1), 0)
            cfg = TrainConfig(epochs=1, batch_size=batch)
            out[key] = best(lambda: train(model, x, y, cfg), repeat)
        finally:
            for n, fn in saved.items():
                setattr(model_mod.kernels, n, fn)
    return out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--scale", choices=sorted(SCALES), default="desk")
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)

    impls = kernels.backends()
    if "cython" not in impls:
        print("compiled backend not built; only the numpy fallback is available", file=sys.stderr)
    rng = np.random.default_rng(0)
    with threadpool_limits(args.threads):
        rows = bench_layers(impls, args.scale, args.repeat, rng)
        step = bench_step(args.scale, max(1, args.repeat // 2))

    names = sorted(impls)
    print(f"scale={args.scale} threads={args.threads} repeat={args.repeat} "
          f"default backend={kernels.BACKEND}")
    header = f"{'case':34s} {'op':9s}" + "".join(f"{n:>12s}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10s}"
    print(header)
    for name, timings in rows:
        for i, op in enumerate(("forward", "backward", "pool")):
            line = f"{name:34s} {op:9s}" + "".join(f"{timings[n][i] * 1e3:10.2f}ms" for n in names)
            if len(names) == 2:
                line += f"{timings['python'][i] / timings['cython'][i]:9.2f}x"
            print(line)
    line = f"{'train epoch (' + str(SCALES[args.scale][0]) + ' records)':34s} {'step':9s}"
    line += "".join(f"{step[n]:11.3f}s" for n in names)
    if len(names) == 2:
        line += f"{step['python'] / step['cython']:9.2f}x"
    print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
