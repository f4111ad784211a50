"""Wall-time comparison of the compiled and pure-Python kernels.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``.  Both
backends solve the same cracked beam problem; the table reports the best
of ``N`` runs and the maximum difference between the two results.
"""

import argparse
import time

import numpy as np

from wavesim import kernels
from wavesim.excitation import hanning_toneburst
from wavesim.laplace import LaplaceGrid, run_lwfem
from wavesim.mesh import assemble, build_mesh
from wavesim.newmark import NewmarkParams, newmark_solve


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--elements", type=int, default=40)
    args = ap.parse_args()

    dt = 1 / 150e3 / 20
    sig = hanning_toneburst(100e3, 5, dt)
    bswi = assemble(build_mesh(1.5, args.elements, "bswi_beam", cracks=[(0.75, 0.004)]))
    fem = assemble(build_mesh(1.5, 20 * args.elements, "fem_beam"))
    cases = {}
    for label, system in (("sweep", bswi), ("newmark", fem)):
        F = np.zeros(system.n_dof)
        F[system.dof(0, "deflection")] = 1.0
        cases[label] = (system, [(F, sig.samples)])
    grid = LaplaceGrid.for_duration(dt, 1e-3)
    steps = int(np.floor(1e-3 / dt + 1e-6)) + 1

    names = ["python"] + (["cython"] if kernels.compiled is not None else [])
    print(f"{'kernel':<10}{'backend':<10}{'seconds':>10}")
    for label in ("sweep", "newmark"):
        system, loads = cases[label]
        results = {}
        for name in names:
            if label == "sweep":
                run = lambda: run_lwfem(system, loads, grid, backend=name)
            else:
                run = lambda: newmark_solve(system, loads, NewmarkParams(dt, steps), backend=name)
            sec, res = best_of(run, args.repeat)
            results[name] = res.data
            print(f"{label:<10}{name:<10}{sec:>10.3f}")
        if len(results) == 2:
            a, b = results["python"], results["cython"]
            print(f"{label:<10}{'max diff':<10}{np.max(np.abs(a - b)) / np.max(np.abs(a)):>10.1e}")


if __name__ == "__main__":
    main()
