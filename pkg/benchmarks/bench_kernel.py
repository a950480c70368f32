"""Time the closed-loop kernel on each available backend.

    python benchmarks/bench_kernel.py --preset case1_1 --repeat 5
"""

import argparse
import statistics
import time

import numpy as np

from poscascade import _backend
from poscascade.config import PRESETS, parse_config
from poscascade.sim import run_scenario


def bench(cfg, backend: str, repeat: int):
    times = []
    traj = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        traj = run_scenario(cfg.scenario, cfg.sim, backend=backend)
        times.append(time.perf_counter() - t0)
    return times, traj


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", default="case1_1", choices=list(PRESETS))
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    args = ap.parse_args(argv)
    cfg = parse_config(args.preset, args.set)
    print(f"{args.preset}: {cfg.sim.nsteps} steps of dt={cfg.sim.dt}")
    results = {}
    for name in _backend.available():
        times, traj = bench(cfg, name, args.repeat)
        results[name] = (times, traj)
        print(f"  {name:<7} median {statistics.median(times) * 1e3:9.2f} ms  "
              f"best {min(times) * 1e3:9.2f} ms")
    if len(results) == 2:
        (tp, a), (tc, b) = results["python"], results["cython"]
        same = np.array_equal(a.x, b.x) and np.array_equal(a.u, b.u)
        print(f"  speedup {statistics.median(tp) / statistics.median(tc):.1f}x, "
              f"identical trajectories: {same}")


if __name__ == "__main__":
    main()
