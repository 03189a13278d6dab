#!/usr/bin/env python3
"""Stopping behavior of the version-space generator against a fixed dyadic sweep.

Runs seeded threshold experiments at several stream lengths and reports how the
number of hard rounds compares with the 4*(log2 T + log2(1/beta)) budget.
"""

import argparse
import math

import numpy as np

from privpredict.harness import ExperimentConfig, run_experiment


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="runs-out")
    parser.add_argument("--t-rounds", type=int, nargs="+", default=[256, 1024, 4096])
    args = parser.parse_args()

    beta = 0.1
    failed = False
    for t_rounds in args.t_rounds:
        bound = 4 * (math.log2(t_rounds) + math.log2(1 / beta))
        cfg = ExperimentConfig(
            mode="oblivious",
            t_rounds=t_rounds,
            trials=args.trials,
            seed=args.seed,
            domain_size=2**14,
            k=52,
            m=40,
            bt_eps=8.0,
            bt_delta=1e-3,
            beta=beta,
            out_dir=args.out,
            gates=[{"column": "top_count", "max": bound, "fraction": 0.95}],
        )
        result = run_experiment(cfg)
        tops = np.array([r["top_count"] for r in result.rows])
        print(
            f"T={t_rounds:5d}  budget={bound:5.1f}  hard rounds: "
            f"median={np.median(tops):.0f} p95={np.quantile(tops, 0.95):.0f} "
            f"max={tops.max()}  gate={'pass' if result.passed else 'FAIL'}  "
            f"csv={result.csv_path}"
        )
        failed |= not result.passed
    return 1 if failed else 0


if __name__ == "__main__":
    raise SystemExit(main())
