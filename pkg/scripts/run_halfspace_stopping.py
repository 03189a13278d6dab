#!/usr/bin/env python3
"""Hard-round cap for halfspaces under an adaptive boundary-probing stream.

The feasible parameter subspace loses one dimension per non-redundant hard
round, so a d=2 run can pay for at most d+1 = 3 of them.  Prints the observed
distribution and the gate verdict.
"""

import argparse
from collections import Counter

from privpredict.harness import ExperimentConfig, run_experiment


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="runs-out")
    parser.add_argument("--t-rounds", type=int, default=1024)
    parser.add_argument("--tau", type=float, default=0.11, help="probe distance from the estimated boundary")
    args = parser.parse_args()

    cfg = ExperimentConfig(
        mode="halfspace",
        t_rounds=args.t_rounds,
        trials=args.trials,
        seed=args.seed,
        d=2,
        n_budget=600,
        bt_eps=8.0,
        bt_delta=1e-2,
        adversary_tau=args.tau,
        out_dir=args.out,
        gates=[{"column": "top_count", "max": 3, "fraction": 0.99}],
    )
    result = run_experiment(cfg)
    histogram = Counter(r["top_count"] for r in result.rows)
    print(f"plan: k*m = 40*15 = 600 labeled points, T={args.t_rounds}, tau={args.tau}")
    print("hard-round histogram:", dict(sorted(histogram.items())))
    print(f"gate top_count<=3 in >=99%: {'pass' if result.passed else 'FAIL'}")
    print(f"aggregate: {result.csv_path}")
    return 0 if result.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
