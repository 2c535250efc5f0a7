"""Latency of hop-count SP-BP against the bias multiplier ``a``.

    python3 scripts/fig4_scaling.py --size 40 --out results/fig4
"""
import argparse
import os

from spbp.harness.config import ExperimentConfig
from spbp.harness.experiments import emit_plot_data, run_matrix


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--size", type=int, default=40)
    p.add_argument("--values", default="0.25,0.5,0.75,1.0,1.25,1.5,2.0")
    p.add_argument("--seed", type=int, default=200)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="results/fig4")
    args = p.parse_args()

    values = tuple(float(v) for v in args.values.split(","))
    cfg = ExperimentConfig(name="fig4", algorithms=("EDR-delta", "SP-1/r-min"), sizes=(args.size,),
                           sweep="multiplier", sweep_values=values, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    table = run_matrix(cfg, workers=args.workers, out_path=os.path.join(args.out, "fig4.jsonl"))
    print(table.format(("latency", "delivery_rate")))
    print("wrote", emit_plot_data(table, "fig4", args.out))


if __name__ == "__main__":
    main()
