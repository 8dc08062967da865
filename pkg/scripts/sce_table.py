"""SCE values for uniform marginals on [0, 1] across grid sizes and particle numbers.

Each LP value is compared with the exhaustive oracle whenever the instance is small enough.
"""
import argparse

from scelab.discretization import make_grid
from scelab.plans import MarginalDensity
from scelab.sce import BRUTE_SIZE_LIMIT, MmotProblem, brute_force_mmot, monge_diagnostic, solve_mmot


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="2,3,4,6,8,12,16")
    ap.add_argument("--bodies", default="2,3")
    ap.add_argument("--oracle-limit", type=int, default=256, help="largest n^N sent to the oracle")
    args = ap.parse_args()
    print(f"{'n':>3} {'N':>2} {'V_sce':>14} {'oracle':>14} monge")
    for N in (int(s) for s in args.bodies.split(",")):
        for n in (int(s) for s in args.sizes.split(",")):
            if n < N:
                continue
            prob = MmotProblem.coulomb(MarginalDensity.uniform(make_grid(0.0, 1.0, n)), N)
            sol = solve_mmot(prob)
            ref = ""
            if n**N <= min(args.oracle_limit, BRUTE_SIZE_LIMIT):
                ref = f"{brute_force_mmot(prob).value:14.10f}"
            monge = monge_diagnostic(sol).is_monge_like if sol.plan is not None else False
            print(f"{n:3d} {N:2d} {sol.value:14.10f} {ref:>14} {monge}")


if __name__ == "__main__":
    main()
