"""All fifteen schemes on mixed traffic at one network size.

    python3 scripts/table1.py --model results/model/gcnn.json --size 60 --out results/table1
"""
import argparse
import os

from spbp.gnn import GcnnModel
from spbp.harness.algorithms import ALGORITHMS
from spbp.harness.config import ExperimentConfig
from spbp.harness.experiments import emit_plot_data, run_matrix


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--model", required=True)
    p.add_argument("--size", type=int, default=60)
    p.add_argument("--topologies", type=int, default=4)
    p.add_argument("--realizations", type=int, default=4)
    p.add_argument("--seed", type=int, default=100)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="results/table1")
    args = p.parse_args()

    cfg = ExperimentConfig(name="table1", algorithms=tuple(ALGORITHMS), sizes=(args.size,),
                           topologies=args.topologies, realizations=args.realizations,
                           traffic="mixed", seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    table = run_matrix(cfg, GcnnModel.load(args.model), args.workers,
                       os.path.join(args.out, "table1.jsonl"))
    metrics = ("latency", "delivery_rate", "latency_streaming", "delivery_streaming",
               "latency_bursty", "delivery_bursty")
    print(table.format(metrics))
    print("wrote", emit_plot_data(table, "table1", args.out))


if __name__ == "__main__":
    main()
