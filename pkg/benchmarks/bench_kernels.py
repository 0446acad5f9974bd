"""Timing and agreement of the numba kernels against the numpy fallback.

Part 1 times the payoff evaluator in-process: the jitted loop kernels versus
the vectorised numpy versions used when SGSEVO_DISABLE_NUMBA is set.
Part 2 times a short solver run end to end under each backend (subprocess,
since the backend is fixed at import time).

    python3 benchmarks/bench_kernels.py [--sizes 10 20 50 100] [--support 8]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from sgsevo import kernels
from sgsevo.bench_gen import SuiteConfig, gen_suite
from sgsevo.strategy import random_mixed_chromosome

if not kernels.USE_NUMBA:
    sys.exit("numba backend disabled; unset SGSEVO_DISABLE_NUMBA to compare")


def _per_call(fn, args, min_time=0.3):
    fn(*args)
    reps, t0 = 0, time.perf_counter()
    while True:
        fn(*args)
        reps += 1
        dt = time.perf_counter() - t0
        if dt >= min_time:
            return dt / reps


def evaluator_table(sizes, support, seed):
    print(f"{'N':>4} {'d':>3} {'numba us':>10} {'numpy us':>10} {'speedup':>8} {'max |diff|':>11}")
    for n in sizes:
        games, _ = gen_suite(SuiteConfig("moderate", seed=seed, n=n, games_per_setting=1))
        g = games[0][1]
        ch = random_mixed_chromosome(g, support, np.random.default_rng(seed))
        adj, pi, util = g.graph.adjacency_matrix, g.pi_array, g.utility_array

        def fast():
            m = kernels.outcome_mass_loop(ch.P, ch.S, ch.R, ch.q, ch.psi, ch.phi, adj, g.gamma)
            return kernels.scheme_table_loop(m, pi, util)

        def slow():
            m = kernels.outcome_mass_numpy(ch.P, ch.S, ch.R, ch.q, ch.psi, ch.phi, adj, g.gamma)
            return kernels.scheme_table_numpy(m, pi, util)

        diff = float(np.abs(fast() - slow()).max())
        tf, ts = _per_call(fast, ()), _per_call(slow, ())
        print(f"{n:>4} {support:>3} {tf * 1e6:>10.1f} {ts * 1e6:>10.1f} {ts / tf:>8.1f} {diff:>11.2e}")


def solver_runs(n, pop, gens, seed):
    code = (
        "import json,time,sys;from sgsevo import evolve,backend_name;"
        "from sgsevo.bench_gen import SuiteConfig,gen_suite;"
        f"g=gen_suite(SuiteConfig('moderate',seed={seed},n={n},games_per_setting=1))[0][0][1];"
        f"p=evolve.EvolveParams(n_pop={pop},n_gen={gens},seed={seed});"
        "evolve.run(g,evolve.EvolveParams(n_pop=4,n_gen=2));"
        "t=time.perf_counter();r=evolve.run(g,p);"
        "print(json.dumps([backend_name(),time.perf_counter()-t,r.best_fitness]))"
    )
    print(f"\nsolver: N={n}, pop={pop}, gens={gens}")
    for flag in ("0", "1"):
        env = dict(os.environ, SGSEVO_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        name, secs, best = json.loads(out.stdout)
        print(f"  {name:>6}: {secs:8.2f} s  best_fitness={best!r}")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[10, 20, 50, 100])
    ap.add_argument("--support", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--solver-gens", type=int, default=30)
    args = ap.parse_args()
    evaluator_table(args.sizes, args.support, args.seed)
    solver_runs(20, 50, args.solver_gens, args.seed)


if __name__ == "__main__":
    main()
