"""Train the duty-cycle GCNN on the reduced corpus and report loss progress.

    python3 scripts/train_gcnn.py --out results/model [--epochs 1] [--count 500]
"""
import argparse
import os

from spbp.harness.instances import TrainingSettings
from spbp.harness.training import loss_progress, train_model


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--out", default="results/model")
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--count", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    os.makedirs(args.out, exist_ok=True)
    settings = TrainingSettings(count=args.count, seed=args.seed)
    model, _, losses = train_model(settings, args.epochs,
                                   log_path=os.path.join(args.out, "training_log.csv"))
    model.save(os.path.join(args.out, "gcnn.json"))
    first, last = loss_progress(losses, min(50, len(losses) // 2))
    print(f"{len(losses)} updates; median loss {first:.4f} -> {last:.4f}")


if __name__ == "__main__":
    main()
