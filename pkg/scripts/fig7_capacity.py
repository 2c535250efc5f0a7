"""Throughput against constant per-flow arrival rate at 100 nodes.

    python3 scripts/fig7_capacity.py --out results/fig7
"""
import argparse
import os

from spbp.harness.config import ExperimentConfig
from spbp.harness.experiments import capacity_sweep, emit_plot_data


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--algorithms", default="BP,EDR-rbar,SP-1/r-min")
    p.add_argument("--lambdas", default="1,2,4,7,10")
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--seed", type=int, default=300)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="results/fig7")
    args = p.parse_args()

    cfg = ExperimentConfig(name="fig7", algorithms=tuple(args.algorithms.split(",")), sizes=(100,),
                           topologies=args.instances, realizations=1, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    res = capacity_sweep(cfg, [float(v) for v in args.lambdas.split(",")], workers=args.workers,
                         out_path=os.path.join(args.out, "fig7.jsonl"))
    print(res.table.format(("throughput",)))
    for alg, (lam, cap) in res.peaks.items():
        gain = "" if alg == "BP" or "BP" not in res.peaks else f"  (+{100 * res.gain(alg):.0f}% over BP)"
        print(f"{alg:<20} peak {cap:.2f} at lambda={lam:g}{gain}")
    print("wrote", emit_plot_data(res.table, "fig7", args.out))


if __name__ == "__main__":
    main()
