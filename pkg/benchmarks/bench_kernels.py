"""Times the compiled kernels against the numpy reference.

Run:  python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from inkrec import _pykernels

try:
    from inkrec import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    fn()  # warmup
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--steps", type=int, default=200, help="sequence length")
    ap.add_argument("--units", type=int, default=64, help="hidden units")
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    T, H = args.steps, args.units
    x_gates = rng.normal(size=(T, 4 * H))
    w_h = rng.normal(scale=0.3, size=(H, 4 * H))
    h0 = np.zeros(H)
    c0 = np.zeros(H)
    weight = rng.normal(size=(T, H))

    S = 41  # lattice width for a 20-character label
    logp = np.log(rng.dirichlet(np.ones(S), size=T))
    skip = np.zeros(S, dtype=np.uint8)
    skip[3::2] = 1

    def case_forward(kern):
        return lambda: kern.lstm_forward(x_gates, w_h, h0, c0)

    def case_backward(kern):
        h, c, gates = kern.lstm_forward(x_gates, w_h, h0, c0)
        return lambda: kern.lstm_backward_da(gates, c, c0, weight, w_h)

    def case_lattice(kern):
        return lambda: kern.ctc_alpha_beta(logp, skip)

    cases = [
        (f"lstm forward T={T} H={H}", case_forward),
        (f"lstm backward T={T} H={H}", case_backward),
        (f"ctc lattice T={T} S={S}", case_lattice),
    ]

    print(f"{'kernel':<28}{'python ms':>12}{'c ms':>10}{'speedup':>10}")
    for name, make in cases:
        py_ms = best_of(make(_pykernels), args.repeat) * 1e3
        if _ckernels is not None:
            c_ms = best_of(make(_ckernels), args.repeat) * 1e3
            print(f"{name:<28}{py_ms:>12.3f}{c_ms:>10.3f}{py_ms / c_ms:>9.1f}x")
        else:
            print(f"{name:<28}{py_ms:>12.3f}{'n/a':>10}{'n/a':>10}")


if __name__ == "__main__":
    main()
