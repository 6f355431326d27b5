"""Time the pure-Python and compiled kernels on representative workloads.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Prints one line per (kernel, backend) with the best wall time over the
repeats and the speed-up of the compiled backend.
"""
import argparse
import timeit

import numpy as np

from lprnn import _backend
from lprnn._pykernels import ACT_RELU, ACT_TANH


def _workloads(rng):
    steps, batch, hidden = 100, 32, 128
    x = rng.normal(size=(steps, batch, 2))
    w_in = rng.normal(size=(hidden, 2)) * 0.5
    w_rec = rng.normal(size=(hidden, hidden)) / np.sqrt(hidden)
    b = np.zeros(hidden)
    alpha = rng.uniform(0.5, 0.99, size=hidden)
    y0 = np.zeros((batch, hidden))

    lh = 64
    xc = rng.normal(size=(60, batch, 10))
    wx = rng.normal(size=(4 * lh, 10)) * 0.3
    wh = rng.normal(size=(4 * lh, lh)) / np.sqrt(lh)
    bl = np.zeros(4 * lh)
    al = rng.uniform(0.5, 0.99, size=lh)
    h0 = np.zeros((batch, lh))

    sh = 50
    xs = np.sin(np.arange(300) * 0.1)[:, None]
    ws_in = rng.normal(size=(sh, 1))
    ws_rec = rng.normal(size=(sh, sh)) * 0.95 / np.sqrt(sh)
    beta = np.exp(-1 / (rng.uniform(2, 50, size=sh) * 64))
    theta = np.full(sh, 0.01)
    drive = 0.9 * np.sin(np.linspace(0, 60, 64_000))

    def rnn(k):
        y, s = k.rnn_forward(x, w_in, w_rec, b, alpha, y0, ACT_RELU)
        k.rnn_backward(x, y, s, w_in, w_rec, alpha, ACT_RELU, np.ones_like(y[1:]))

    def lstm(k):
        h, c, g, m = k.lstm_forward(xc, wx, wh, bl, al, h0, h0, ACT_TANH, ACT_TANH)
        k.lstm_backward(xc, h, c, g, m, wx, wh, al, ACT_TANH, ACT_TANH, np.ones_like(h[1:]))

    def encode(k):
        k.ds_encode(drive, 0.01, float(np.exp(-1 / 640)), 64, True, 0.0, 0.0)

    def network(k):
        k.snn_simulate(xs, ws_in, ws_rec, np.zeros(sh), ACT_TANH, beta, theta, 64, True,
                       np.zeros(sh), True, False)

    return {
        "rnn fwd+bwd (T=100, B=32, H=128)": rnn,
        "lstm fwd+bwd (T=60, B=32, H=64)": lstm,
        "ds_encode (64k substeps)": encode,
        "snn_simulate (300 steps x 64, 50 units)": network,
    }


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args()
    backends = {"python": _backend.python_kernels}
    if _backend.compiled_kernels is not None:
        backends["cython"] = _backend.compiled_kernels
    else:
        print("compiled kernels not built; timing the Python backend only")
    for name, fn in _workloads(np.random.default_rng(0)).items():
        times = {}
        for bname, kernels in backends.items():
            times[bname] = min(timeit.repeat(lambda: fn(kernels), number=1, repeat=args.repeat))
            print(f"{name:42s} {bname:7s} {times[bname] * 1e3:9.2f} ms")
        if "cython" in times:
            print(f"{'':42s} speed-up {times['python'] / times['cython']:6.1f}x")


if __name__ == "__main__":
    main()
