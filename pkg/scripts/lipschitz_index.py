"""Compare two indexings of the Lipschitz recursion for value functions.

The recursion ``Lip(V_t) <= Lc_t + L * Lip(V_{t+1})`` holds when ``L`` is the
W1-Lipschitz constant of the kernel that moves the state from ``t`` to
``t + 1``.  This script counts how often it breaks when ``L`` is instead taken
from the following step's kernel, and prints the first counterexample.

    python3 scripts/lipschitz_index.py --seeds 200
"""

import argparse

from cetool.mdp import backward_induction, lipschitz_constants, lipschitz_of
from cetool.scenarios import RandomConfig, random_model, suite_sizes


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=200)
    args = ap.parse_args()

    checks = own_fail = next_fail = 0
    example = None
    for seed in range(args.seeds):
        n, ny, na, T = suite_sizes(seed)
        m = random_model(RandomConfig(n, ny, na, T, seed)).mdp()
        _, V = backward_induction(m)
        Lc, LP = lipschitz_constants(m)
        lip = [lipschitz_of(V[t], m.space) for t in range(T + 1)]
        # only steps where both kernels exist
        for t in range(T - 2):
            checks += 1
            own_fail += lip[t] > Lc[t] + LP[t] * lip[t + 1] + 1e-9
            if lip[t] > Lc[t] + LP[t + 1] * lip[t + 1] + 1e-9:
                next_fail += 1
                example = example or (seed, t + 1, lip[t], Lc[t], LP[t], LP[t + 1], lip[t + 1])
    print(f"{checks} interior steps: own-step kernel fails {own_fail}, next-step kernel fails {next_fail}")
    if example:
        seed, t, lv, lc, lp_own, lp_next, lv1 = example
        print(f"first counterexample: seed {seed}, t = {t}: Lip(V_t) = {lv:.6f}, Lc_t = {lc:.6f}, "
              f"Lip(V_t+1) = {lv1:.6f}, own-step L = {lp_own:.6f}, next-step L = {lp_next:.6f}")


if __name__ == "__main__":
    main()
