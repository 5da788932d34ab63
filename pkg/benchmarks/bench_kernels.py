"""Compare the compiled and NumPy circuit-evaluation kernels.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``.  Inputs are
the sequence tables of the full design evaluated on the published gate set,
so timings reflect a single likelihood (and gradient) evaluation.
"""
import argparse
import timeit

import numpy as np

from qitomo import _kernels_py
from qitomo.design import build_design
from qitomo.models import published_gateset
from qitomo.simulate import CircuitTable

try:
    from qitomo import _ckernels
except ImportError:
    _ckernels = None


def inputs():
    gs = published_gateset()
    design = build_design(list(gs.gates), target=gs)
    table = CircuitTable.from_design(design, gs)
    ops = np.ascontiguousarray(table.ops_array(gs))
    effects = np.ascontiguousarray(table.effects_array(gs))
    rho = np.ascontiguousarray(gs.rho)
    n_seq = len(table.ptr) - 1
    w = np.random.default_rng(0).random((n_seq, effects.shape[0]))
    return ops, rho, effects, table.ptr, table.seq, w


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args(argv)
    ops, rho, effects, ptr, seq, w = inputs()
    backends = {"python": _kernels_py}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    else:
        print("compiled extension not built; timing the NumPy kernels only")

    ref_p = _kernels_py.forward(ops, rho, effects, ptr, seq)
    ref_b = _kernels_py.backward(ops, rho, effects, ptr, seq, w)
    print(f"{len(ptr) - 1} sequences, {len(seq)} operations, {args.repeat} repeats")
    print(f"{'backend':<8} {'forward (us)':>14} {'backward (us)':>14} {'max |diff|':>12}")
    times = {}
    for name, mod in backends.items():
        p = mod.forward(ops, rho, effects, ptr, seq)
        b = mod.backward(ops, rho, effects, ptr, seq, w)
        diff = max([np.abs(p - ref_p).max()] + [np.abs(x - y).max() for x, y in zip(b, ref_b)])
        tf = timeit.timeit(lambda: mod.forward(ops, rho, effects, ptr, seq),
                           number=args.repeat) / args.repeat
        tb = timeit.timeit(lambda: mod.backward(ops, rho, effects, ptr, seq, w),
                           number=args.repeat) / args.repeat
        times[name] = (tf, tb)
        print(f"{name:<8} {tf * 1e6:14.1f} {tb * 1e6:14.1f} {diff:12.2e}")
    if "cython" in times:
        f = times["python"][0] / times["cython"][0]
        b = times["python"][1] / times["cython"][1]
        print(f"speedup: forward {f:.1f}x, backward {b:.1f}x")


if __name__ == "__main__":
    main()
