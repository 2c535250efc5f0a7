"""Find the unit-disk interference radius giving a target mean conflict degree.

    python3 scripts/calibrate_radius.py --target 34.6 --graphs 100
"""
import argparse

from scipy.optimize import brentq

from spbp.harness.verify import conflict_degree_calibration


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--target", type=float, default=34.6)
    p.add_argument("--nodes", type=int, default=100)
    p.add_argument("--graphs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    # same networks for every radius, so the degree is monotone in the radius
    f = lambda r: conflict_degree_calibration(r, args.graphs, args.nodes, args.seed) - args.target
    r = brentq(f, 0.05, 1.5, xtol=1e-3)
    print(f"radius {r:.3f}: mean conflict degree {f(r) + args.target:.2f}")
    for probe in (0.55, 0.567, 0.58):
        print(f"  radius {probe:.2f}: {f(probe) + args.target:.2f}")


if __name__ == "__main__":
    main()
