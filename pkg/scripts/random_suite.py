"""Run the randomized suite and summarise the slack of the bound per variant.

    python3 scripts/random_suite.py --seeds 200 --csv suite.csv
"""

import argparse
from collections import defaultdict

import numpy as np

from cetool.bounds import reports_to_csv, verify_theorem
from cetool.scenarios import VARIANTS, RandomConfig, random_instance, suite_sizes


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=200)
    ap.add_argument("--moduli", choices=["linear", "envelope"], default="linear")
    ap.add_argument("--csv", help="write every per-step row here")
    args = ap.parse_args()

    reports = []
    stats = defaultdict(list)
    for seed in range(args.seeds):
        n, ny, na, T = suite_sizes(seed)
        for variant in VARIANTS:
            inst = random_instance(RandomConfig(n, ny, na, T, seed, variant))
            rep = verify_theorem(inst.pomdp, inst.abstraction, inst.estimator, kind=args.moduli,
                                 strict=False, instance_id=f"{seed}-{variant}")
            reports.append(rep)
            stats[variant].append((rep.passed, float(rep.slack.min()), float(rep.bound[0]),
                                   float(rep.gap[0])))

    print(f"{'variant':<24} {'n':>4} {'viol':>5} {'min slack':>10} {'med bound_1':>12} "
          f"{'med gap_1':>10}")
    for variant, rows in stats.items():
        ok, slack, b, g = map(np.array, zip(*rows))
        print(f"{variant:<24} {len(rows):4d} {int((~ok).sum()):5d} {slack.min():10.4f} "
              f"{np.median(b):12.4f} {np.median(g):10.4f}")
    if args.csv:
        with open(args.csv, "w") as f:
            f.write(reports_to_csv(reports))


if __name__ == "__main__":
    main()
