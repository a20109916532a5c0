"""Sweep the observation-noise radius on a grid world and tabulate bound against gap.

    python3 scripts/bounded_noise_sweep.py --shape 7 --T 3 --radii 0 1 2 3
"""

import argparse

import numpy as np

from cetool.bounds import verify_theorem
from cetool.scenarios import BoundedNoiseConfig, bounded_noise


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--shape", type=int, nargs="+", default=[7])
    ap.add_argument("--T", type=int, default=3)
    ap.add_argument("--radii", type=float, nargs="+", default=[0, 1, 2, 3])
    ap.add_argument("--noise", choices=["sphere", "ball"], default="sphere")
    ap.add_argument("--moduli", choices=["linear", "envelope"], default="linear")
    args = ap.parse_args()

    print(f"{'r':>5} {'t':>3} {'eta':>8} {'bound':>10} {'gap':>10} {'bound/r':>10}")
    for r in args.radii:
        inst = bounded_noise(BoundedNoiseConfig(r=r, shape=tuple(args.shape), T=args.T,
                                                noise=args.noise))
        rep = verify_theorem(inst.pomdp, inst.abstraction, inst.estimator, kind=args.moduli)
        for t in range(rep.T):
            per_r = rep.bound[t] / r if r else np.nan
            print(f"{r:5g} {t + 1:3d} {rep.eta[t]:8.4f} {rep.bound[t]:10.4f} "
                  f"{rep.gap[t]:10.4f} {per_r:10.4f}")


if __name__ == "__main__":
    main()
