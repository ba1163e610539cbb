"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Times the two raw kernels on several state sizes, then an end-to-end
readout with each backend swapped into ``esrqc.kernels``.
"""
import argparse
import json
import math
import timeit

import numpy as np

from esrqc import _pykernels, kernels
from esrqc.chain import ChainLayout
from esrqc.engine import init_register_state, pair_indices
from esrqc.protocols import build_periodic_state, find_smallest_element
from esrqc.thermal import ThermalSpec, build_ensemble, from_state, run_program
from esrqc.lang import parse

try:
    from esrqc import _ckernels
except ImportError:
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def raw_kernels(repeat):
    rows = []
    rng = np.random.default_rng(0)
    for total, mols in [(6, 64), (9, 16), (12, 4), (14, 1)]:
        dim = 1 << total
        amps = rng.normal(size=(mols, dim)) + 1j * rng.normal(size=(mols, dim))
        w = rng.uniform(size=mols)
        i0, i1 = pair_indices(total, 3, "10")
        for name, mod in BACKENDS.items():
            a = amps.copy()
            t_rot = best(lambda: mod.rotate_pairs(a, i0, i1, 0.0, -1j, -1j, 0.0), repeat)
            t_ovl = best(lambda: mod.pair_overlap(a, w, i0, i1), repeat)
            rows.append({"spins": total, "rows": mols, "backend": name,
                         "rotate_us": t_rot * 1e6, "overlap_us": t_ovl * 1e6})
    return rows


def workloads():
    shor = from_state(ChainLayout.default(9),
                      init_register_state(ChainLayout.default(9), build_periodic_state(8, 6)))
    thermal = build_ensemble(ChainLayout.default(7), ThermalSpec(math.log(10)))
    prep = parse("turnon; grad +; prepare; grad +; reverse { prepare }")
    return {
        "shor exhaustive (8 bits)": lambda: find_smallest_element(shor, "exhaustive_scan"),
        "thermal prepare (6 register)": lambda: run_program(thermal, prep),
    }


def end_to_end(repeat):
    rows = []
    saved = kernels.rotate_pairs, kernels.pair_overlap
    try:
        for label, job in workloads().items():
            for name, mod in BACKENDS.items():
                kernels.rotate_pairs, kernels.pair_overlap = mod.rotate_pairs, mod.pair_overlap
                rows.append({"workload": label, "backend": name, "seconds": best(job, repeat)})
    finally:
        kernels.rotate_pairs, kernels.pair_overlap = saved
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json")
    args = ap.parse_args()
    raw, e2e = raw_kernels(args.repeat), end_to_end(args.repeat)
    print(f"{'spins':>5} {'rows':>5} {'backend':>8} {'rotate us':>10} {'overlap us':>11}")
    for r in raw:
        print(f"{r['spins']:>5} {r['rows']:>5} {r['backend']:>8} "
              f"{r['rotate_us']:>10.1f} {r['overlap_us']:>11.1f}")
    print()
    for r in e2e:
        print(f"{r['workload']:<30} {r['backend']:>8} {r['seconds']:.4f} s")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"kernels": raw, "end_to_end": e2e}, fh, indent=2)


if __name__ == "__main__":
    main()
