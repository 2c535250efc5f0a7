"""Ideal against neighbour-rule bias maintenance under node mobility.

    python3 scripts/table3_mobility.py --model results/model/gcnn.json --out results/table3
"""
import argparse
import os

from spbp.gnn import GcnnModel
from spbp.harness.config import ExperimentConfig, MobilityConfig
from spbp.harness.experiments import emit_plot_data
from spbp.harness.mobility import run_mobility


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--model", required=True)
    p.add_argument("--size", type=int, default=60)
    p.add_argument("--step-std", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=400)
    p.add_argument("--out", default="results/table3")
    args = p.parse_args()

    cfg = ExperimentConfig(name="table3", algorithms=("EDR-rbar", "SP-rbar/(xr)"), sizes=(args.size,),
                           traffic="mixed", seed=args.seed,
                           mobility=MobilityConfig(enabled=True, step_std=args.step_std))
    os.makedirs(args.out, exist_ok=True)
    table = run_mobility(cfg, GcnnModel.load(args.model), os.path.join(args.out, "table3.jsonl"))
    print(table.format(("latency", "delivery_rate")))
    print("wrote", emit_plot_data(table, "table3", args.out))


if __name__ == "__main__":
    main()
