"""Time the numba kernels against the numpy fallbacks.

Each backend runs in its own interpreter because the backend is fixed at
import time (``CCR_LAB_DISABLE_NUMBA=1`` selects numpy). Usage:

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, timeit
import numpy as np
from ccrlab import _accel, kernels

repeat = int(sys.argv[1])
rng = np.random.default_rng(0)
eps = rng.uniform(0.5, 1.5, (256, 16))
m = rng.normal(size=(256, 16))
dur = rng.uniform(0.1, 1.0, 16)
pts = np.exp(2j * np.pi * rng.random((256, 2048)))
h0 = np.diag(rng.normal(size=12)).astype(complex)
d = rng.normal(size=(2, 12, 12)); d = d + d.transpose(0, 2, 1)
psi = np.zeros(12, complex); psi[0] = 1
fr = np.linspace(0, 1, 7); sg = np.array([1., -1, 1, -1, 1, -1])
tt = np.linspace(1, 30, 20000)

cases = {
    "trace_piecewise": lambda: kernels.trace_piecewise(eps, m, dur, 64),
    "shoelace_area": lambda: kernels.shoelace_area(pts),
    "magnus_propagate": lambda: kernels.magnus_propagate(h0, d, [1.0, 2.0], [0.0, 0.3], psi, 0.0, 5.0, 200),
    "switch_scan": lambda: kernels.switch_scan(fr, sg, 1.0, tt),
}
out = {"backend": _accel.backend()}
for name, fn in cases.items():
    fn()  # warm-up, includes jit compilation
    out[name] = min(timeit.repeat(fn, number=1, repeat=repeat))
print(json.dumps(out))
"""


def run_backend(disable: bool, repeat: int) -> dict:
    env = dict(os.environ)
    if disable:
        env["CCR_LAB_DISABLE_NUMBA"] = "1"
    else:
        env.pop("CCR_LAB_DISABLE_NUMBA", None)
    res = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env, capture_output=True, text=True,
                         check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    fast = run_backend(False, args.repeat)
    slow = run_backend(True, args.repeat)
    print(f"{'kernel':<18}{fast['backend']:>12}{slow['backend']:>12}{'speedup':>10}")
    for k in fast:
        if k == "backend":
            continue
        print(f"{k:<18}{fast[k] * 1e3:>10.3f}ms{slow[k] * 1e3:>10.3f}ms{slow[k] / fast[k]:>10.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
