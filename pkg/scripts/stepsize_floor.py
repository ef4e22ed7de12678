#!/usr/bin/env python3
"""Step-size adaptation study: per-step rho_k along a practical MGB run.

The p=1 problem is the hardest to center; this prints t_k, the adapted step
size rho_k, the worst per-level Newton count m_k, and whether the direct
fine-grid step succeeded, then the floor min_k rho_k.
"""

import argparse
import sys

from mgbarrier.pathfollow import PathConfig, run_mgb
from mgbarrier.problems import ProblemSpec, build_problem


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=float, default=1.0)
    ap.add_argument("--alpha", type=int, default=2)
    ap.add_argument("--levels", type=int, default=3)
    ap.add_argument("--cells0", type=int, default=4)
    args = ap.parse_args()

    problem = build_problem(ProblemSpec(p=args.p, alpha=args.alpha,
                                        levels=args.levels, cells0=args.cells0))
    trace = run_mgb(problem, PathConfig())
    print(f"status={trace.status} total_newton={trace.total_newton}")
    print(f"{'k':>4} {'t':>12} {'rho_k':>8} {'m_k':>4} {'direct':>6}")
    for r in trace.summary_rows():
        print(f"{r.k:>4} {r.t:>12.4g} {r.rho:>8.4f} {r.newton_iters:>4} "
              f"{'yes' if r.direct_step else 'no':>6}")
    steps = trace.step_sizes()
    if steps:
        print(f"min_k rho_k = {min(steps):.4f}")
    return 0 if trace.status == "converged" else 1


if __name__ == "__main__":
    sys.exit(main())
